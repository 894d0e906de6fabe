// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_DATA_HPP_
#define COUNTREG_DATA_HPP_

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace countreg {

// Count responses with a covariate design matrix whose first column is an
// intercept. Rows of X and entries of y are paired by index.
struct Dataset {
  std::vector<long> y;
  Eigen::MatrixXd X;

  int n() const { return static_cast<int>(y.size()); }
  int dim() const { return static_cast<int>(X.cols()); }

  void validate() const {
    if (y.empty()) throw std::invalid_argument("Dataset: empty response");
    if (X.rows() != static_cast<Eigen::Index>(y.size()))
      throw std::invalid_argument("Dataset: X rows must match y length");
    if (X.cols() < 1) throw std::invalid_argument("Dataset: X needs at least one column");
    for (long v : y)
      if (v < 0) throw std::invalid_argument("Dataset: counts must be non-negative");
    if (!X.allFinite()) throw std::invalid_argument("Dataset: X has non-finite entries");
  }
};

}  // namespace countreg

#endif  // COUNTREG_DATA_HPP_
