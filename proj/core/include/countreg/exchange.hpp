// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_EXCHANGE_HPP_
#define COUNTREG_EXCHANGE_HPP_

#include <cmath>
#include <span>

#include "countreg/data.hpp"
#include "countreg/regression.hpp"
#include "countreg/rng.hpp"

namespace countreg {

// Exchange-algorithm Metropolis-Hastings for COM-Poisson regression
// coefficients. Augmenting each proposal with auxiliary counts drawn from the
// proposed model makes the intractable normalizing constants cancel, so
// acceptance ratios touch only the unnormalized density.

// Random-walk scale with optional Robbins-Monro adaptation toward a target
// acceptance rate. Adaptation is enabled during burn-in and frozen after.
class AdaptiveScale {
 public:
  explicit AdaptiveScale(double initial, double target_accept = 0.25)
      : log_scale_(std::log(initial)), target_(target_accept) {}

  double value() const { return std::exp(log_scale_); }
  double acceptance_rate() const {
    return n_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(n_);
  }
  std::size_t observations() const { return n_; }

  void observe(bool accepted) {
    ++n_;
    if (accepted) ++accepted_;
    if (!frozen_) {
      const double gain = std::pow(static_cast<double>(n_), -0.6);
      log_scale_ += gain * ((accepted ? 1.0 : 0.0) - target_);
    }
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  double log_scale_;
  double target_;
  std::size_t n_ = 0;
  std::size_t accepted_ = 0;
  bool frozen_ = false;
};

struct ExchangeProposalConfig {
  double step_b = 0.1;          // initial random-walk scale on the centering link
  double step_c = 0.1;          // initial scale on the shape link
  double target_accept = 0.25;  // adaptation target, within the 20-30% band
};

// Summed log acceptance ratio of the exchange construction:
//   sum_i [ log q_cur(y*_i) + log q_prop(y_i) - log q_cur(y_i) - log q_prop(y*_i) ]
// where q are unnormalized COM-Poisson terms and y_aux[i] was drawn from the
// unnormalized model at prop[i]. Normalizing constants never appear.
double exchange_log_ratio(std::span<const long> y,
                          std::span<const ComPoissonParams> cur,
                          std::span<const ComPoissonParams> prop,
                          std::span<const long> y_aux);

struct AtomUpdateStats {
  bool accepted_b = false;
  bool accepted_c = false;
};

// One MH sweep on a cluster's atom: block-propose the whole b vector, then the
// whole c vector, each from a spherical random walk whose per-coordinate sd is
// scale / sqrt(member count). For every proposal one auxiliary count per
// member is drawn from the proposed model at that member's covariates.
// Detailed balance holds for the conditional posterior
// prod_{i in members} f(y_i | x_i, atom) * G0(atom).
AtomUpdateStats exchange_update_atom(RegressionAtom& atom,
                                     const Dataset& data,
                                     std::span<const int> members,
                                     const GaussianCoefPrior& prior,
                                     AdaptiveScale& scale_b,
                                     AdaptiveScale& scale_c,
                                     RngStream& rng);

}  // namespace countreg

#endif  // COUNTREG_EXCHANGE_HPP_
