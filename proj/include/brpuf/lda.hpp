#pragma once

#include <Eigen/Core>

#include "brpuf/common.hpp"

namespace brpuf {

class CrpDataset;

/// Two-class Fisher discriminant and the 1-D class densities of its projection.
struct LdaResult {
  Eigen::VectorXd projection;
  double bin_low = 0.0;
  double bin_width = 0.0;
  Eigen::VectorXd density0;  ///< normalized histogram of class 0 projections
  Eigen::VectorXd density1;  ///< normalized histogram of class 1 projections
  /// sum over bins of min(density0, density1); 1 = indistinguishable.
  double overlap_coefficient = 0.0;
  /// |mean1 - mean0| / pooled std of the projections.
  double dprime = 0.0;
};

struct LdaOptions {
  double ridge = 1e-6;
  int bins = 64;
};

/// `x` is n x m (one sample per row), `labels` 0/1.
LdaResult fit_lda(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                  const LdaOptions& opts = {});
/// ±1-encoded challenges against responses.
LdaResult fit_lda(const CrpDataset& ds, const LdaOptions& opts = {});

}  // namespace brpuf
