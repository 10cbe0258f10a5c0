#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "brpuf/common.hpp"

namespace brpuf {

class CrpDataset;

/// Soft-margin kernel machine with k(x, z) = (x.z / m + 1)^degree.
struct SvmModel {
  Eigen::MatrixXd support_vectors;  ///< one support vector per row, ±1 encoded
  Eigen::VectorXd dual_coefficients;  ///< alpha_i * y_i, y in {-1, +1}
  double intercept = 0.0;
  int degree = 4;
  double C = 1.0;
  std::uint64_t iterations = 0;

  /// Decision values for each row of `x`; >= 0 predicts class 1.
  Eigen::VectorXd decision(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

struct SvmOptions {
  double tolerance = 1e-3;
  std::size_t cap = 10'000;
  std::size_t cache_bytes = std::size_t{512} << 20;
  /// 0 selects max(10^7, 100 n).
  std::uint64_t max_iterations = 0;
};

/// Full dual solution, kept for KKT inspection.
struct SvmSolution {
  SvmModel model;
  Eigen::VectorXd alpha;  ///< per training sample, in [0, C]
  double gap = 0.0;       ///< final maximal violating pair gap
};

double polynomial_kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                         int degree);

/// Sequential minimal optimization with second-order working-set selection.
/// `x` is n x m, `labels` 0/1. Throws SizeError above the cap and
/// OptimizerError when the iteration budget runs out.
SvmSolution solve_svm_poly(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                           int degree, double C, const SvmOptions& opts = {});
SvmModel train_svm_poly(const CrpDataset& train, int degree, double C, const SvmOptions& opts = {});

double accuracy(const SvmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& labels);
double accuracy(const SvmModel& model, const CrpDataset& test);

struct SvmGridCell {
  int degree = 0;
  double C = 0.0;
  double accuracy = 0.0;
};

struct SvmGridResult {
  int degree = 0;
  double C = 0.0;
  double accuracy = 0.0;
  SvmModel model;
  std::vector<SvmGridCell> cells;
};

/// Highest validation accuracy wins; ties go to the smaller C, then the
/// smaller degree.
SvmGridResult grid_search_svm(const CrpDataset& train, const CrpDataset& validation, const std::vector<int>& degrees,
                              const std::vector<double>& Cs, const SvmOptions& opts = {});

}  // namespace brpuf
