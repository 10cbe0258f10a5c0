#include "brpuf/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <sstream>
#include <unordered_map>

#include "brpuf/crp.hpp"

namespace brpuf {

namespace {

double ipow(double v, int d) {
  double r = 1.0;
  for (int i = 0; i < d; ++i) r *= v;
  return r;
}

// Least-recently-used cache of kernel columns.
class KernelCache {
 public:
  KernelCache(const Eigen::Ref<const Eigen::MatrixXd>& x, int degree, std::size_t bytes)
      : x_(x), degree_(degree), inv_m_(1.0 / static_cast<double>(x.cols())) {
    const std::size_t col_bytes = static_cast<std::size_t>(x.rows()) * sizeof(double) + 64;
    capacity_ = std::max<std::size_t>(2, bytes / col_bytes);
  }

  const Eigen::VectorXd& column(Eigen::Index i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Eigen::VectorXd col = (x_ * x_.row(i).transpose()).array() * inv_m_ + 1.0;
    if (degree_ != 1) col = col.unaryExpr([d = degree_](double v) { return ipow(v, d); });
    lru_.emplace_front(i, std::move(col));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const Eigen::Ref<const Eigen::MatrixXd>& x_;
  int degree_;
  double inv_m_;
  std::size_t capacity_;
  std::list<std::pair<Eigen::Index, Eigen::VectorXd>> lru_;
  std::unordered_map<Eigen::Index, std::list<std::pair<Eigen::Index, Eigen::VectorXd>>::iterator> index_;
};

constexpr double kTau = 1e-12;

}  // namespace

double polynomial_kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                         int degree) {
  if (a.size() != b.size()) throw DimensionError("kernel arguments differ in width");
  return ipow(a.dot(b) / static_cast<double>(a.size()) + 1.0, degree);
}

Eigen::VectorXd SvmModel::decision(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (support_vectors.rows() > 0 && x.cols() != support_vectors.cols())
    throw DimensionError("input width differs from the support vectors");
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), intercept);
  if (support_vectors.rows() == 0) return out;
  const double inv_m = 1.0 / static_cast<double>(x.cols());
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kBlock) {
    const Eigen::Index rows = std::min(kBlock, x.rows() - r0);
    Eigen::MatrixXd k = (x.middleRows(r0, rows) * support_vectors.transpose()).array() * inv_m + 1.0;
    k = k.unaryExpr([d = degree](double v) { return ipow(v, d); });
    out.segment(r0, rows) += k * dual_coefficients;
  }
  return out;
}

SvmSolution solve_svm_poly(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                           int degree, double C, const SvmOptions& opts) {
  if (degree < 1) throw InvalidParameter("kernel degree must be at least 1");
  if (!(C > 0.0) || !std::isfinite(C)) throw InvalidParameter("C must be positive");
  if (!(opts.tolerance > 0.0)) throw InvalidParameter("tolerance must be positive");
  if (x.rows() != labels.size()) throw DimensionError("sample and label counts differ");
  const Eigen::Index n = x.rows();
  if (n == 0) throw InvalidParameter("empty training set");
  if (static_cast<std::size_t>(n) > opts.cap)
    throw SizeError("SVM training set of " + std::to_string(n) + " exceeds the cap of " + std::to_string(opts.cap));

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) throw InvalidParameter("labels must be 0 or 1");
    y[i] = labels[i] == 1.0 ? 1.0 : -1.0;
  }

  KernelCache cache(x, degree, opts.cache_bytes);
  Eigen::VectorXd diag(n);
  for (Eigen::Index i = 0; i < n; ++i)
    diag[i] = ipow(x.row(i).squaredNorm() / static_cast<double>(x.cols()) + 1.0, degree);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  // Gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij.
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  const auto in_up = [&](Eigen::Index t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
  const auto in_low = [&](Eigen::Index t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

  const std::uint64_t budget =
      opts.max_iterations ? opts.max_iterations : std::max<std::uint64_t>(10'000'000, 100 * static_cast<std::uint64_t>(n));
  std::uint64_t iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] >= gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd* ki = i >= 0 ? &cache.column(i) : nullptr;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      const double b = gmax - v;
      if (b > 0) {
        double a = diag[i] + diag[t] - 2.0 * (*ki)[t];
        if (a <= 0) a = kTau;
        if (-(b * b) / a <= best) {
          best = -(b * b) / a;
          j = t;
        }
      }
    }
    gap = gmax - gmin;
    if (i < 0 || j < 0 || gap < opts.tolerance) break;
    if (iter >= budget) {
      std::ostringstream msg;
      msg << "SMO did not converge within " << budget << " iterations (gap " << gap << ", tolerance "
          << opts.tolerance << ", n " << n << ", C " << C << ", degree " << degree << ")";
      throw OptimizerError(msg.str());
    }

    const Eigen::VectorXd& kj = cache.column(j);
    const Eigen::VectorXd& kii = cache.column(i);
    const double old_ai = alpha[i], old_aj = alpha[j];
    double quad = diag[i] + diag[j] - 2.0 * kii[j];
    if (quad <= 0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_ai, dj = alpha[j] - old_aj;
    // Q_ti = y_t y_i K_ti.
    grad.array() += y.array() * (y[i] * di * kii.array() + y[j] * dj * kj.array());
  }

  // Intercept: mean over free vectors, else the midpoint of the feasible range.
  double sum = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  Eigen::Index free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      ++free;
      sum += yg;
    }
  }
  const double rho = free > 0 ? sum / static_cast<double>(free) : 0.5 * (ub + lb);

  SvmSolution out;
  out.alpha = alpha;
  out.gap = gap;
  Eigen::Index nsv = 0;
  for (Eigen::Index t = 0; t < n; ++t) nsv += alpha[t] > 0;
  out.model.support_vectors.resize(nsv, x.cols());
  out.model.dual_coefficients.resize(nsv);
  for (Eigen::Index t = 0, s = 0; t < n; ++t) {
    if (alpha[t] <= 0) continue;
    out.model.support_vectors.row(s) = x.row(t);
    out.model.dual_coefficients[s] = alpha[t] * y[t];
    ++s;
  }
  out.model.intercept = std::isfinite(rho) ? -rho : 0.0;
  out.model.degree = degree;
  out.model.C = C;
  out.model.iterations = iter;
  return out;
}

SvmModel train_svm_poly(const CrpDataset& train, int degree, double C, const SvmOptions& opts) {
  return solve_svm_poly(train.features<double>(), train.labels<double>(), degree, C, opts).model;
}

double accuracy(const SvmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (x.rows() == 0) throw InvalidParameter("accuracy of an empty set");
  if (x.rows() != labels.size()) throw DimensionError("sample and label counts differ");
  const Eigen::VectorXd f = model.decision(x);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) correct += (f[i] >= 0.0) == (labels[i] == 1.0);
  return static_cast<double>(correct) / static_cast<double>(f.size());
}

double accuracy(const SvmModel& model, const CrpDataset& test) {
  return accuracy(model, test.features<double>(), test.labels<double>());
}

SvmGridResult grid_search_svm(const CrpDataset& train, const CrpDataset& validation, const std::vector<int>& degrees,
                              const std::vector<double>& Cs, const SvmOptions& opts) {
  if (degrees.empty() || Cs.empty()) throw InvalidParameter("empty SVM grid");
  const Eigen::MatrixXd x = train.features<double>();
  const Eigen::VectorXd y = train.labels<double>();
  const Eigen::MatrixXd vx = validation.features<double>();
  const Eigen::VectorXd vy = validation.labels<double>();

  SvmGridResult best;
  best.accuracy = -1.0;
  for (int d : degrees) {
    for (double c : Cs) {
      SvmModel model = solve_svm_poly(x, y, d, c, opts).model;
      const double acc = accuracy(model, vx, vy);
      best.cells.push_back({d, c, acc});
      const bool better = acc > best.accuracy ||
                          (acc == best.accuracy && (c < best.C || (c == best.C && d < best.degree)));
      if (better) {
        best.accuracy = acc;
        best.degree = d;
        best.C = c;
        best.model = std::move(model);
      }
    }
  }
  return best;
}

}  // namespace brpuf
