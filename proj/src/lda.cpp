#include "brpuf/lda.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "brpuf/crp.hpp"

namespace brpuf {

LdaResult fit_lda(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                  const LdaOptions& opts) {
  if (x.rows() != labels.size()) throw DimensionError("sample and label counts differ");
  if (opts.bins < 1) throw InvalidParameter("histogram needs at least one bin");
  const Eigen::Index n = x.rows(), m = x.cols();

  Eigen::Index n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) throw InvalidParameter("labels must be 0 or 1");
    n1 += labels[i] == 1.0;
  }
  const Eigen::Index n0 = n - n1;
  if (n0 == 0 || n1 == 0) throw InvalidParameter("LDA needs samples of both classes");

  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(m), mu1 = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < n; ++i) (labels[i] == 1.0 ? mu1 : mu0) += x.row(i).transpose();
  mu0 /= static_cast<double>(n0);
  mu1 /= static_cast<double>(n1);

  // Pooled within-class covariance.
  Eigen::MatrixXd centered(n, m);
  for (Eigen::Index i = 0; i < n; ++i) centered.row(i) = x.row(i) - (labels[i] == 1.0 ? mu1 : mu0).transpose();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(m, m);
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  scatter = scatter.selfadjointView<Eigen::Lower>();
  scatter /= std::max<double>(1.0, static_cast<double>(n - 2));
  scatter.diagonal().array() += opts.ridge;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(scatter);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw NumericalError("within-class scatter is singular after ridge");
  LdaResult out;
  out.projection = ldlt.solve(mu1 - mu0);
  if (!out.projection.allFinite()) throw NumericalError("LDA projection is not finite");

  const Eigen::VectorXd proj = x * out.projection;
  double s0 = 0, s1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) (labels[i] == 1.0 ? s1 : s0) += proj[i];
  const double pm0 = s0 / static_cast<double>(n0), pm1 = s1 / static_cast<double>(n1);
  double v0 = 0, v1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] == 1.0)
      v1 += (proj[i] - pm1) * (proj[i] - pm1);
    else
      v0 += (proj[i] - pm0) * (proj[i] - pm0);
  }
  v0 /= static_cast<double>(n0);
  v1 /= static_cast<double>(n1);
  const double pooled = std::sqrt(0.5 * (v0 + v1));
  out.dprime = pooled > 0 ? std::abs(pm1 - pm0) / pooled : (pm1 == pm0 ? 0.0 : INFINITY);

  // Histograms over the joint range; a zero-width range puts everything in
  // the first bin.
  const double lo = proj.minCoeff(), hi = proj.maxCoeff();
  out.bin_low = lo;
  out.bin_width = (hi - lo) / opts.bins;
  out.density0 = Eigen::VectorXd::Zero(opts.bins);
  out.density1 = Eigen::VectorXd::Zero(opts.bins);
  for (Eigen::Index i = 0; i < n; ++i) {
    int bin = 0;
    if (out.bin_width > 0) bin = std::clamp(static_cast<int>((proj[i] - lo) / out.bin_width), 0, opts.bins - 1);
    (labels[i] == 1.0 ? out.density1 : out.density0)[bin] += 1.0;
  }
  out.density0 /= static_cast<double>(n0);
  out.density1 /= static_cast<double>(n1);
  out.overlap_coefficient = out.density0.cwiseMin(out.density1).sum();
  return out;
}

LdaResult fit_lda(const CrpDataset& ds, const LdaOptions& opts) {
  return fit_lda(ds.features<double>(), ds.labels<double>(), opts);
}

}  // namespace brpuf
