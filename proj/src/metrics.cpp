#include "brpuf/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brpuf/crp.hpp"

namespace brpuf {

double noise_rate(std::span<const std::vector<std::uint8_t>> raw_evals) {
  if (raw_evals.empty()) throw InvalidParameter("no evaluations");
  const std::size_t iterations = raw_evals.front().size();
  if (iterations % 2 == 0) throw InvalidParameter("iteration count must be odd");
  std::size_t wrong = 0;
  for (const auto& votes : raw_evals) {
    if (votes.size() != iterations) throw InvalidParameter("every challenge needs the same number of evaluations");
    std::size_t ones = 0;
    for (auto v : votes) {
      if (v > 1) throw InvalidParameter("responses must be 0 or 1");
      ones += v;
    }
    const std::size_t majority = 2 * ones > iterations ? 1 : 0;
    wrong += majority ? iterations - ones : ones;
  }
  return static_cast<double>(wrong) / static_cast<double>(iterations * raw_evals.size());
}

double bias(std::span<const std::uint8_t> responses) {
  if (responses.empty()) throw InvalidParameter("bias of an empty response list");
  std::size_t ones = 0;
  for (auto r : responses) ones += r != 0;
  return static_cast<double>(ones) / static_cast<double>(responses.size());
}

double inter_chip_nhd(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw DimensionError("response lists differ in length");
  if (a.empty()) throw InvalidParameter("NHD of empty response lists");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] != 0) != (b[i] != 0);
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

InfluenceProfile influence_profile(std::span<const Challenge> challenges, std::span<const std::uint8_t> responses) {
  if (challenges.size() != responses.size()) throw DimensionError("challenges and responses differ in length");
  if (challenges.empty()) throw InvalidParameter("influence of an empty dataset");
  const std::size_t m = challenges.front().size();

  Eigen::MatrixX2d ones = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(m), 2);
  Eigen::MatrixX2d counts = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(m), 2);
  for (std::size_t r = 0; r < challenges.size(); ++r) {
    if (challenges[r].size() != m) throw DimensionError("challenges differ in width");
    const double resp = responses[r] ? 1.0 : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Eigen::Index col = challenges[r][i];
      counts(static_cast<Eigen::Index>(i), col) += 1.0;
      ones(static_cast<Eigen::Index>(i), col) += resp;
    }
  }

  InfluenceProfile out;
  out.table.resize(static_cast<Eigen::Index>(m), 2);
  double worst = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (counts(row, 0) == 0.0 || counts(row, 1) == 0.0) throw UndefinedInfluence(i);
    for (int v = 0; v < 2; ++v) {
      const double infl = ones(row, v) / counts(row, v);
      out.table(row, v) = infl;
      if (std::abs(infl - 0.5) > worst) {
        worst = std::abs(infl - 0.5);
        out.max_value = infl;
        out.max_bit = i;
        out.max_bit_value = v;
      }
    }
  }
  return out;
}

double convergence_rate(std::span<const EvalOutcome> outcomes) {
  if (outcomes.empty()) throw InvalidParameter("convergence rate of an empty list");
  std::size_t ok = 0;
  for (const auto& o : outcomes) ok += o.is_converged();
  return static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

double measured_noise(const std::vector<std::vector<EvalOutcome>>& evals) {
  std::vector<std::vector<std::uint8_t>> votes;
  votes.reserve(evals.size());
  for (const auto& row : evals) {
    std::vector<std::uint8_t> v;
    v.reserve(row.size());
    bool ok = true;
    for (const auto& e : row) {
      if (!e.is_converged()) {
        ok = false;
        break;
      }
      v.push_back(static_cast<std::uint8_t>(e.bit()));
    }
    if (ok) votes.push_back(std::move(v));
  }
  if (votes.empty()) return 0.0;
  return noise_rate(votes);
}

double calibrate_sigma(const XorPuf& puf, const Obfuscation& obf, double theta, double target_noise,
                       std::span<const Challenge> sample, unsigned iterations, std::uint64_t seed) {
  if (!(target_noise > 0.0 && target_noise < 0.5)) throw InvalidParameter("target noise must lie in (0, 0.5)");
  if (sample.empty()) throw InvalidParameter("empty calibration sample");
  const auto noise_at = [&](double sigma) {
    return measured_noise(evaluate_repeated(puf, obf, sample, iterations, NoiseModel{sigma, seed}, theta));
  };

  // Reference scale: the typical constituent sum magnitude.
  double scale = 0.0;
  for (const auto& c : sample) scale += std::abs(puf.strength_sum(0, c));
  scale /= static_cast<double>(sample.size());

  double lo = 0.0, hi = std::max(scale, 1e-12) * 0.05;
  int grow = 0;
  while (noise_at(hi) < target_noise) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 60) throw NumericalError("noise calibration did not bracket the target");
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (noise_at(mid) < target_noise)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-6 * hi) break;
  }
  return hi;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json infl = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.influence.rows(); ++i) infl.push_back({r.influence(i, 0), r.influence(i, 1)});
  return {
      {"puf_kind", r.puf_kind},
      {"m", r.m},
      {"k", r.k},
      {"challenges", r.challenges},
      {"noise", r.noise},
      {"bias", r.bias},
      {"chip_bias", r.chip_bias},
      {"convergence_rate", r.convergence_rate},
      {"convergence_target", r.convergence_target},
      {"theta", r.theta},
      {"sigma", r.sigma},
      {"nhd", r.nhd},
      {"influence", infl},
      {"max_influence", {{"value", r.max_influence}, {"bit", r.max_influence_bit}}},
  };
}

std::string render_table(const MetricsReport& r) {
  std::ostringstream out;
  const auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * v;
    return s.str();
  };
  out << "Characteristic          " << r.puf_kind << " m=" << r.m << " k=" << r.k << '\n';
  out << "Conv. Avg. (%)          " << pct(r.convergence_rate) << '\n';
  out << "Noise Avg. (%)          " << pct(r.noise) << '\n';
  for (std::size_t c = 0; c < r.chip_bias.size(); ++c)
    out << "Bias Chip " << c + 1 << " (%)        " << pct(r.chip_bias[c]) << '\n';
  double nhd = 0.0;
  for (const auto& [_, v] : r.nhd) nhd += v;
  if (!r.nhd.empty()) out << "NHD Avg. (%)            " << pct(nhd / static_cast<double>(r.nhd.size())) << '\n';
  out << "Max Infl. (%)           " << pct(r.max_influence) << " (bit " << r.max_influence_bit << ")\n";
  return out.str();
}

}  // namespace brpuf
