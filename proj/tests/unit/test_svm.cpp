#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "brpuf/crp.hpp"
#include "brpuf/svm.hpp"

using namespace brpuf;

namespace {

CrpDataset single_br(std::size_t m, std::size_t n, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds{seed};
  const XorPuf puf = XorPuf::generate(XorKind::XorBr, m, seeds);
  GaloisLfsr lfsr = GaloisLfsr::default64(seed | 1);
  return collect_crps(puf, Obfuscation{}, lfsr_generate(lfsr, n, m), {});
}

void separable_toy(Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  x.resize(200, 3);
  y.resize(200);
  for (Eigen::Index r = 0; r < 200; ++r) {
    y[r] = r % 2;
    x(r, 0) = n01(rng) * 0.2 + (y[r] ? 1.0 : -1.0);
    x(r, 1) = n01(rng);
    x(r, 2) = n01(rng);
  }
}

}  // namespace

TEST(Kernel, PolynomialForm) {
  Eigen::VectorXd a(4), b(4);
  a << 1, -1, 1, 1;
  b << 1, 1, -1, 1;
  // a.b = 0 -> (0/4 + 1)^d = 1; a.a = 4 -> 2^d.
  EXPECT_DOUBLE_EQ(polynomial_kernel(a, b, 4), 1.0);
  EXPECT_DOUBLE_EQ(polynomial_kernel(a, a, 3), 8.0);
}

TEST(Svm, SeparableToyLinear) {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  separable_toy(x, y);
  const SvmSolution sol = solve_svm_poly(x, y, 1, 100.0);
  EXPECT_EQ(accuracy(sol.model, x, y), 1.0);
}

TEST(Svm, FourPointXorWithQuadraticKernel) {
  Eigen::MatrixXd x(4, 2);
  x << -1, -1, -1, 1, 1, -1, 1, 1;
  Eigen::VectorXd y(4);
  y << 0, 1, 1, 0;
  const SvmSolution sol = solve_svm_poly(x, y, 2, 10.0);
  EXPECT_EQ(accuracy(sol.model, x, y), 1.0);
  const SvmSolution lin = solve_svm_poly(x, y, 1, 10.0);
  EXPECT_LT(accuracy(lin.model, x, y), 1.0);
}

TEST(Svm, DualSolutionSatisfiesKkt) {
  const CrpDataset ds = single_br(16, 600, 5);
  const Eigen::MatrixXd x = ds.features();
  const Eigen::VectorXd y01 = ds.labels();
  const double C = 0.5;
  SvmOptions opts;
  const SvmSolution sol = solve_svm_poly(x, y01, 3, C, opts);
  const Eigen::VectorXd f = sol.model.decision(x);
  ASSERT_EQ(sol.alpha.size(), x.rows());
  EXPECT_LE(sol.gap, opts.tolerance);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double a = sol.alpha[i];
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, C);
    const double margin = (y01[i] > 0.5 ? 1.0 : -1.0) * f[i];
    if (a <= 0.0)
      EXPECT_GE(margin, 1.0 - opts.tolerance) << i;
    else if (a >= C)
      EXPECT_LE(margin, 1.0 + opts.tolerance) << i;
    else
      EXPECT_NEAR(margin, 1.0, opts.tolerance) << i;
  }
}

TEST(Svm, DualCoefficientsSumToZero) {
  const CrpDataset ds = single_br(16, 400, 6);
  const SvmModel model = train_svm_poly(ds, 2, 1.0);
  EXPECT_NEAR(model.dual_coefficients.sum(), 0.0, 1e-9);
  EXPECT_EQ(model.support_vectors.rows(), model.dual_coefficients.size());
  EXPECT_EQ(model.degree, 2);
}

TEST(Svm, CapIsSizeError) {
  SvmOptions opts;
  opts.cap = 100;
  const CrpDataset ds = single_br(16, 101, 7);
  EXPECT_THROW(train_svm_poly(ds, 1, 1.0, opts), SizeError);
}

TEST(Svm, IterationBudgetIsOptimizerError) {
  SvmOptions opts;
  opts.max_iterations = 3;
  const CrpDataset ds = single_br(16, 500, 8);
  EXPECT_THROW(train_svm_poly(ds, 3, 10.0, opts), OptimizerError);
}

TEST(Svm, InputErrors) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 2);
  Eigen::VectorXd y(3);
  y << 0, 1, 0;
  EXPECT_THROW(solve_svm_poly(x, y, 1, 1.0), DimensionError);
  Eigen::VectorXd y4(4);
  y4 << 0, 1, 0, 1;
  EXPECT_THROW(solve_svm_poly(x, y4, 0, 1.0), InvalidParameter);
  EXPECT_THROW(solve_svm_poly(x, y4, 1, -1.0), InvalidParameter);
}

TEST(Svm, SingleBrPufLinearKernel) {
  const CrpDataset ds = single_br(64, 10'000, 9);
  const auto [train, test] = split_dataset(ds, 5000, 5000, 1);
  const SvmModel model = train_svm_poly(train, 1, 1.0);
  EXPECT_GE(accuracy(model, test), 0.95);
}

TEST(Svm, BlockwiseDecisionMatchesDirectSum) {
  const CrpDataset ds = single_br(16, 300, 10);
  const SvmModel model = train_svm_poly(ds, 2, 1.0);
  const Eigen::MatrixXd x = ds.features();
  const Eigen::VectorXd f = model.decision(x);
  for (Eigen::Index r = 0; r < 20; ++r) {
    double s = model.intercept;
    for (Eigen::Index j = 0; j < model.support_vectors.rows(); ++j)
      s += model.dual_coefficients[j] *
           polynomial_kernel(model.support_vectors.row(j).transpose(), x.row(r).transpose(), 2);
    EXPECT_NEAR(f[r], s, 1e-9);
  }
}

TEST(SvmGrid, TiesGoToSmallerC) {
  // Build a CRP dataset whose labels are a single challenge bit: every C fits it.
  CrpMeta meta;
  meta.m = 8;
  CrpDataset train(meta), validation(meta);
  std::mt19937_64 rng(3);
  while (train.size() < 120 || validation.size() < 60) {
    Challenge c(8);
    for (std::size_t i = 0; i < 8; ++i) c.set(i, rng() & 1u);
    auto& target = train.size() < 120 ? train : validation;
    try {
      target.add({c, c[2]});
    } catch (const InvalidParameter&) {
    }
  }
  const SvmGridResult r = grid_search_svm(train, validation, {1}, {10.0, 1.0, 100.0});
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.C, 1.0);
  EXPECT_EQ(r.cells.size(), 3u);
}
