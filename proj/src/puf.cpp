#include "brpuf/puf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace brpuf {

namespace {

// Generated strengths sit on a 2^-32 grid. Sums, differences and halvings of
// grid values are then exact, so alpha/beta invert back to (t, b) bit for bit.
constexpr double kStrengthGrid = 4294967296.0;

void require_stage_count(std::size_t m) {
  if (m < 2 || m % 2 != 0)
    throw InvalidParameter("stage count must be even and >= 2, got " + std::to_string(m));
}

std::vector<StageStrengths> draw_stages(std::size_t m, std::uint64_t seed) {
  require_stage_count(m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<StageStrengths> stages(m);
  for (auto& s : stages) {
    s.t = std::round(normal(rng) * kStrengthGrid) / kStrengthGrid;
    s.b = std::round(normal(rng) * kStrengthGrid) / kStrengthGrid;
  }
  return stages;
}

double parity_sign(std::size_t i) { return (i % 2 == 0) ? 1.0 : -1.0; }

void require_width(std::size_t m, const Challenge& c) {
  if (c.size() != m)
    throw DimensionError("challenge length " + std::to_string(c.size()) + " does not match " +
                         std::to_string(m) + " stages");
}

double signed_sum(const Eigen::VectorXd& w, const Challenge& c) {
  double s = 0.0;
  const auto& bits = c.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const double wi = w[static_cast<Eigen::Index>(i)];
    s += bits[i] ? wi : -wi;
  }
  return s;
}

}  // namespace

// ---- BR ------------------------------------------------------------------

BrPuf::BrPuf(std::vector<StageStrengths> stages, std::uint64_t seed)
    : stages_(std::move(stages)), seed_(seed) {
  require_stage_count(stages_.size());
  const auto m = static_cast<Eigen::Index>(stages_.size());
  alpha_.resize(m);
  beta_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = stages_[static_cast<std::size_t>(i)];
    if (!std::isfinite(s.t) || !std::isfinite(s.b)) throw InvalidParameter("stage strengths must be finite");
    const double sign = parity_sign(static_cast<std::size_t>(i));
    alpha_[i] = sign * ((s.t + s.b) / 2.0);
    beta_[i] = sign * ((s.t - s.b) / 2.0);
  }
  alpha_sum_ = alpha_.sum();
}

BrPuf BrPuf::generate(std::size_t m, std::uint64_t seed) { return BrPuf(draw_stages(m, seed), seed); }

BrPuf BrPuf::from_stages(std::vector<StageStrengths> stages, std::uint64_t seed) {
  return BrPuf(std::move(stages), seed);
}

double BrPuf::strength_sum(const Challenge& c) const {
  require_width(stages_.size(), c);
  return alpha_sum_ + signed_sum(beta_, c);
}

double BrPuf::beta_only_sum(const Challenge& c) const {
  require_width(stages_.size(), c);
  return signed_sum(beta_, c);
}

// ---- TBR -----------------------------------------------------------------

TbrPuf::TbrPuf(std::vector<StageStrengths> stages, std::uint64_t seed)
    : stages_(std::move(stages)), seed_(seed) {
  require_stage_count(stages_.size());
  weights_.resize(static_cast<Eigen::Index>(stages_.size()));
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto& s = stages_[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.b)) throw InvalidParameter("stage strengths must be finite");
    weights_[static_cast<Eigen::Index>(i)] = parity_sign(i) * (s.t - s.b);
  }
}

TbrPuf TbrPuf::generate(std::size_t m, std::uint64_t seed) { return TbrPuf(draw_stages(m, seed), seed); }

TbrPuf TbrPuf::from_stages(std::vector<StageStrengths> stages, std::uint64_t seed) {
  return TbrPuf(std::move(stages), seed);
}

double TbrPuf::strength_sum(const Challenge& c) const {
  require_width(stages_.size(), c);
  return signed_sum(weights_, c);
}

// ---- XOR -----------------------------------------------------------------

std::string to_string(XorKind kind) { return kind == XorKind::XorBr ? "xor-br" : "xor-tbr"; }

XorKind parse_xor_kind(const std::string& s) {
  if (s == "xor-br" || s == "br") return XorKind::XorBr;
  if (s == "xor-tbr" || s == "tbr") return XorKind::XorTbr;
  throw InvalidParameter("unknown PUF kind '" + s + "'");
}

XorPuf::XorPuf(XorKind kind, std::vector<Constituent> constituents)
    : kind_(kind), constituents_(std::move(constituents)) {
  if (constituents_.empty()) throw InvalidParameter("XOR PUF needs at least one constituent");
  for (const auto& c : constituents_) {
    const bool is_br = std::holds_alternative<BrPuf>(c);
    if (is_br != (kind_ == XorKind::XorBr)) throw InvalidParameter("constituent type does not match XOR kind");
    const std::size_t m = std::visit([](const auto& p) { return p.stages_count(); }, c);
    if (m_ == 0) m_ = m;
    if (m != m_) throw InvalidParameter("XOR constituents must share the same stage count");
  }
}

XorPuf XorPuf::generate(XorKind kind, std::size_t m, std::span<const std::uint64_t> seeds) {
  std::vector<Constituent> parts;
  parts.reserve(seeds.size());
  for (auto s : seeds) {
    if (kind == XorKind::XorBr)
      parts.emplace_back(BrPuf::generate(m, s));
    else
      parts.emplace_back(TbrPuf::generate(m, s));
  }
  return XorPuf(kind, std::move(parts));
}

std::string XorPuf::kind_label() const {
  if (k() == 1) return kind_ == XorKind::XorBr ? "br" : "tbr";
  return to_string(kind_);
}

double XorPuf::strength_sum(std::size_t j, const Challenge& c) const {
  return std::visit([&](const auto& p) { return p.strength_sum(c); }, constituents_.at(j));
}

double XorPuf::min_abs_sum(const Challenge& c) const {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k(); ++j) lo = std::min(lo, std::abs(strength_sum(j, c)));
  return lo;
}

// ---- evaluation ----------------------------------------------------------

NoiseStream::NoiseStream(const NoiseModel& model, std::uint64_t substream)
    : sigma_(model.sigma), rng_(derive_seed(model.rng_seed, "noise", substream)), normal_(0.0, 1.0) {
  if (!(model.sigma >= 0.0) || !std::isfinite(model.sigma))
    throw InvalidParameter("noise sigma must be finite and >= 0");
}

double NoiseStream::draw() {
  if (sigma_ == 0.0) return 0.0;
  return sigma_ * normal_(rng_);
}

EvalOutcome classify_sum(double s, double theta) {
  if (!(theta >= 0.0)) throw InvalidParameter("convergence threshold must be >= 0");
  if (std::abs(s) < theta || s == 0.0) return EvalOutcome::non_converged();
  return EvalOutcome::converged(s > 0.0 ? 1 : 0);
}

EvalOutcome evaluate(const BrPuf& puf, const Challenge& c, double theta) {
  return classify_sum(puf.strength_sum(c), theta);
}

EvalOutcome evaluate(const BrPuf& puf, const Challenge& c, double theta, NoiseStream& noise) {
  return classify_sum(puf.strength_sum(c) + noise.draw(), theta);
}

EvalOutcome evaluate(const TbrPuf& puf, const Challenge& c, double theta) {
  return classify_sum(puf.strength_sum(c), theta);
}

EvalOutcome evaluate(const TbrPuf& puf, const Challenge& c, double theta, NoiseStream& noise) {
  return classify_sum(puf.strength_sum(c) + noise.draw(), theta);
}

namespace {

template <typename Eval>
EvalOutcome evaluate_xor_impl(const XorPuf& puf, const Challenge& c, Eval&& eval_one) {
  if (c.size() != puf.stages_count())
    throw DimensionError("challenge length " + std::to_string(c.size()) + " does not match " +
                         std::to_string(puf.stages_count()) + " stages");
  int acc = 0;
  bool all_converged = true;
  for (const auto& part : puf.constituents()) {
    // Every constituent is evaluated (and draws its noise) even after a
    // non-converged one, so noise streams stay aligned across challenges.
    const EvalOutcome r = std::visit(eval_one, part);
    if (!r.is_converged())
      all_converged = false;
    else
      acc ^= r.bit();
  }
  return all_converged ? EvalOutcome::converged(acc) : EvalOutcome::non_converged();
}

}  // namespace

EvalOutcome evaluate(const XorPuf& puf, const Challenge& c, double theta) {
  return evaluate_xor_impl(puf, c, [&](const auto& p) { return evaluate(p, c, theta); });
}

EvalOutcome evaluate(const XorPuf& puf, const Challenge& c, double theta, NoiseStream& noise) {
  return evaluate_xor_impl(puf, c, [&](const auto& p) { return evaluate(p, c, theta, noise); });
}

double noiseless_convergence_rate(const XorPuf& puf, double theta, std::span<const Challenge> sample) {
  if (sample.empty()) throw InvalidParameter("empty challenge sample");
  std::size_t ok = 0;
  for (const auto& c : sample) {
    const double v = puf.min_abs_sum(c);
    ok += (v >= theta && v > 0.0);
  }
  return static_cast<double>(ok) / static_cast<double>(sample.size());
}

double calibrate_threshold(const XorPuf& puf, double target_rate, std::span<const Challenge> sample) {
  if (!(target_rate > 0.0 && target_rate <= 1.0)) throw InvalidParameter("target rate must lie in (0, 1]");
  if (sample.empty()) throw InvalidParameter("empty calibration sample");
  if (target_rate == 1.0) return 0.0;

  std::vector<double> margins;
  margins.reserve(sample.size());
  for (const auto& c : sample) margins.push_back(puf.min_abs_sum(c));
  std::sort(margins.begin(), margins.end());

  // Need at least `need` samples with margin >= theta; the largest such theta
  // is the need-th largest margin.
  const auto n = margins.size();
  const auto need = static_cast<std::size_t>(std::ceil(target_rate * static_cast<double>(n) - 1e-9));
  return margins[n - std::max<std::size_t>(need, 1)];
}

// ---- serialization -------------------------------------------------------

nlohmann::json to_json(const XorPuf& puf) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& c : puf.constituents()) {
    std::visit(
        [&](const auto& p) {
          nlohmann::json t = nlohmann::json::array(), b = nlohmann::json::array();
          for (const auto& s : p.stages()) {
            t.push_back(s.t);
            b.push_back(s.b);
          }
          parts.push_back({{"seed", p.seed()}, {"t", t}, {"b", b}});
        },
        c);
  }
  return {{"kind", to_string(puf.kind())}, {"m", puf.stages_count()}, {"k", puf.k()}, {"constituents", parts}};
}

XorPuf xor_puf_from_json(const nlohmann::json& j) {
  const XorKind kind = parse_xor_kind(j.at("kind").get<std::string>());
  std::vector<XorPuf::Constituent> parts;
  for (const auto& p : j.at("constituents")) {
    const auto t = p.at("t").get<std::vector<double>>();
    const auto b = p.at("b").get<std::vector<double>>();
    if (t.size() != b.size()) throw InvalidParameter("t and b arrays differ in length");
    std::vector<StageStrengths> stages(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) stages[i] = {t[i], b[i]};
    const auto seed = p.at("seed").get<std::uint64_t>();
    if (kind == XorKind::XorBr)
      parts.emplace_back(BrPuf::from_stages(std::move(stages), seed));
    else
      parts.emplace_back(TbrPuf::from_stages(std::move(stages), seed));
  }
  return XorPuf(kind, std::move(parts));
}

}  // namespace brpuf
