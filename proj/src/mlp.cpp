#include "brpuf/mlp.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brpuf/crp.hpp"

namespace brpuf {

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }
std::string to_string(OptimizerKind o) { return o == OptimizerKind::Adam ? "adam" : "sgd"; }
std::string to_string(StopReason r) { return r == StopReason::Plateau ? "plateau" : "max_iterations"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw InvalidParameter("unknown activation '" + s + "'");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw InvalidParameter("unknown optimizer '" + s + "'");
}

void MlpConfig::validate() const {
  if (m == 0) throw InvalidParameter("input width must be >= 1");
  if (layers == 0) throw InvalidParameter("network needs at least one hidden layer");
  if (hidden == 0) throw InvalidParameter("hidden width must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidParameter("dropout rate must lie in [0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidParameter("learning rate must be > 0");
  if (batch_size == 0) throw InvalidParameter("batch size must be >= 1");
  if (max_iterations == 0) throw InvalidParameter("max_iterations must be >= 1");
  if (checkpoint_every == 0) throw InvalidParameter("checkpoint cadence must be >= 1");
  if (stop_window < 2) throw InvalidParameter("stop window must be >= 2");
  if (stop_digits < 0 || stop_digits > 12) throw InvalidParameter("stop digits must lie in [0, 12]");
}

std::uint64_t count_weights(const MlpConfig& cfg) {
  const std::uint64_t m = cfg.m, k = cfg.hidden, n = cfg.layers;
  return m * k + (n - 1) * k * k + k * 2;
}

std::uint64_t count_biases(const MlpConfig& cfg) { return static_cast<std::uint64_t>(cfg.layers * cfg.hidden + 2); }

std::string TrainTrace::to_csv() const {
  std::ostringstream out;
  out << "iteration,loss,accuracy\n";
  for (const auto& c : checkpoints)
    out << c.iteration << ',' << format_double(c.loss) << ',' << format_double(c.accuracy) << '\n';
  return out.str();
}

// ---- model construction --------------------------------------------------

template struct Mlp<float>;
template struct Mlp<double>;

template <typename Scalar>
Mlp<Scalar> build_mlp(const MlpConfig& cfg, InitKind init) {
  cfg.validate();
  using Matrix = typename Mlp<Scalar>::Matrix;
  using Vector = typename Mlp<Scalar>::Vector;

  Mlp<Scalar> model;
  model.config = cfg;
  std::mt19937_64 rng(derive_seed(cfg.seed, "init"));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::size_t fan_in = cfg.m;
  for (std::size_t l = 0; l <= cfg.layers; ++l) {
    const std::size_t fan_out = l == cfg.layers ? 2 : cfg.hidden;
    Matrix w(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    if (init == InitKind::Zero) {
      w.setZero();
    } else {
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<Scalar>(std * normal(rng));
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(fan_out)));
    fan_in = cfg.hidden;
  }
  return model;
}

// ---- forward / backward --------------------------------------------------

namespace {

template <typename Scalar>
struct Activations {
  using Matrix = typename Mlp<Scalar>::Matrix;
  std::vector<Matrix> hidden;  // post-activation output of each hidden layer
  Matrix dropped;              // last hidden output after dropout (train mode only)
  Matrix mask;                 // inverted-dropout multipliers
  bool has_dropout = false;
};

template <typename Scalar>
void activate(Activation kind, typename Mlp<Scalar>::Matrix& z) {
  if (kind == Activation::Relu)
    z = z.cwiseMax(Scalar(0));
  else
    z = z.array().tanh().matrix();
}

// Runs the hidden stack and returns the two logits per column.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> run_forward(const Mlp<Scalar>& model,
                                                     const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                                                     std::mt19937_64* dropout_rng, Activations<Scalar>* keep) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  const auto& cfg = model.config;
  if (x.rows() != static_cast<Eigen::Index>(cfg.m))
    throw DimensionError("input width " + std::to_string(x.rows()) + " does not match model width " +
                         std::to_string(cfg.m));

  Activations<Scalar> local;
  Activations<Scalar>& acts = keep ? *keep : local;
  acts.hidden.resize(cfg.layers);

  const Matrix* input = nullptr;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Matrix& h = acts.hidden[l];
    if (l == 0)
      h.noalias() = model.weights[0] * x;
    else
      h.noalias() = model.weights[l] * acts.hidden[l - 1];
    h.colwise() += model.biases[l];
    activate<Scalar>(cfg.activation, h);
    input = &h;
  }

  acts.has_dropout = dropout_rng != nullptr && cfg.dropout_rate > 0.0;
  if (acts.has_dropout) {
    const Scalar keep_scale = Scalar(1.0 / (1.0 - cfg.dropout_rate));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    acts.mask.resize(input->rows(), input->cols());
    for (Eigen::Index i = 0; i < acts.mask.size(); ++i)
      acts.mask.data()[i] = uni(*dropout_rng) < cfg.dropout_rate ? Scalar(0) : keep_scale;
    acts.dropped = input->cwiseProduct(acts.mask);
    input = &acts.dropped;
  }

  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> z;
  z.noalias() = model.weights.back() * (*input);
  z.colwise() += model.biases.back();
  return z;
}

// log(1 + exp(v)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar v) {
  return v > Scalar(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

}  // namespace

template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> logits(const Mlp<Scalar>& model,
                                                const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                                                std::mt19937_64* dropout_rng) {
  return run_forward<Scalar>(model, x, dropout_rng, nullptr);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> forward(const Mlp<Scalar>& model,
                                                 const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                                                 std::mt19937_64* dropout_rng) {
  const auto z = run_forward<Scalar>(model, x, dropout_rng, nullptr);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> p(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) p[c] = sigmoid(z(1, c) - z(0, c));
  return p;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> class_probabilities(const Mlp<Scalar>& model,
                                                             const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x) {
  const auto z = run_forward<Scalar>(model, x, nullptr, nullptr);
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> p(2, z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    p(1, c) = sigmoid(z(1, c) - z(0, c));
    p(0, c) = Scalar(1) - p(1, c);
  }
  return p;
}

template <typename Scalar>
Scalar loss_and_gradients(const Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                          const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y, MlpGradients<Scalar>* grads,
                          std::mt19937_64* dropout_rng) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  if (y.size() != x.cols()) throw DimensionError("label count differs from sample count");
  const auto& cfg = model.config;
  const Eigen::Index batch = x.cols();
  if (batch == 0) throw InvalidParameter("empty batch");

  Activations<Scalar> acts;
  const auto z = run_forward<Scalar>(model, x, dropout_rng, &acts);

  // Softmax over two logits is the logistic function of their difference.
  Scalar loss = 0;
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> dz(2, batch);
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const Scalar d = z(1, c) - z(0, c);
    const Scalar label = y[c];
    loss += label * softplus(-d) + (Scalar(1) - label) * softplus(d);
    const Scalar g = (sigmoid(d) - label) * inv_b;
    dz(1, c) = g;
    dz(0, c) = -g;
  }
  loss *= inv_b;
  if (!grads) return loss;

  const std::size_t n_layers = cfg.layers;
  grads->weights.resize(n_layers + 1);
  grads->biases.resize(n_layers + 1);

  const Matrix& head_input = acts.has_dropout ? acts.dropped : acts.hidden.back();
  grads->weights[n_layers].noalias() = dz * head_input.transpose();
  grads->biases[n_layers] = dz.rowwise().sum();

  Matrix delta;
  delta.noalias() = model.weights[n_layers].transpose() * dz;
  if (acts.has_dropout) delta.array() *= acts.mask.array();

  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& h = acts.hidden[l];
    if (cfg.activation == Activation::Relu)
      delta = (h.array() > Scalar(0)).select(delta.array(), Scalar(0)).matrix();
    else
      delta.array() *= (Scalar(1) - h.array().square());

    if (l == 0)
      grads->weights[0].noalias() = delta * x.transpose();
    else
      grads->weights[l].noalias() = delta * acts.hidden[l - 1].transpose();
    grads->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Matrix next;
      next.noalias() = model.weights[l].transpose() * delta;
      delta.swap(next);
    }
  }
  return loss;
}

namespace {

constexpr Eigen::Index kEvalChunk = 4096;

// Eval-mode loss and accuracy over a full dataset, chunked to bound memory.
template <typename Scalar>
std::pair<double, double> evaluate_full(const Mlp<Scalar>& model,
                                        const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                                        const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y) {
  if (x.cols() == 0) throw InvalidParameter("empty evaluation set");
  if (y.size() != x.cols()) throw DimensionError("label count differs from sample count");
  double loss = 0.0;
  std::size_t correct = 0;
  for (Eigen::Index start = 0; start < x.cols(); start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, x.cols() - start);
    const auto z = run_forward<Scalar>(model, x.middleCols(start, len), nullptr, nullptr);
    for (Eigen::Index c = 0; c < len; ++c) {
      const double d = static_cast<double>(z(1, c)) - static_cast<double>(z(0, c));
      const double label = static_cast<double>(y[start + c]);
      loss += label * softplus(-d) + (1.0 - label) * softplus(d);
      // P(t=1|x) >= 0.5 exactly when the logit difference is >= 0.
      const int predicted = z(1, c) - z(0, c) >= Scalar(0) ? 1 : 0;
      correct += predicted == static_cast<int>(label);
    }
  }
  const double n = static_cast<double>(x.cols());
  return {loss / n, static_cast<double>(correct) / n};
}

template <typename Scalar>
struct AdamState {
  std::vector<typename Mlp<Scalar>::Matrix> mw, vw;
  std::vector<typename Mlp<Scalar>::Vector> mb, vb;
  std::uint64_t t = 0;

  explicit AdamState(const Mlp<Scalar>& model) {
    for (const auto& w : model.weights) {
      mw.push_back(Mlp<Scalar>::Matrix::Zero(w.rows(), w.cols()));
      vw.push_back(Mlp<Scalar>::Matrix::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : model.biases) {
      mb.push_back(Mlp<Scalar>::Vector::Zero(b.size()));
      vb.push_back(Mlp<Scalar>::Vector::Zero(b.size()));
    }
  }
};

template <typename Param, typename Grad>
void adam_update(Param& p, const Grad& g, Param& m, Param& v, double lr, double b1, double b2, double eps,
                 double bias1, double bias2) {
  using Scalar = typename Param::Scalar;
  m = Scalar(b1) * m + Scalar(1 - b1) * g;
  v = Scalar(b2) * v + Scalar(1 - b2) * g.cwiseAbs2();
  const Scalar step = Scalar(lr / bias1);
  const Scalar inv_bias2 = Scalar(1.0 / bias2);
  p.array() -= step * m.array() / ((v.array() * inv_bias2).sqrt() + Scalar(eps));
}

}  // namespace

template <typename Scalar>
Scalar mean_loss(const Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                 const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y) {
  return static_cast<Scalar>(evaluate_full(model, x, y).first);
}

template <typename Scalar>
double accuracy(const Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y) {
  return evaluate_full(model, x, y).second;
}

template <typename Scalar>
TrainTrace train_mlp(Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                     const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  using Vector = typename Mlp<Scalar>::Vector;
  const MlpConfig& cfg = model.config;
  cfg.validate();
  const Eigen::Index n = x.cols();
  if (n == 0) throw InvalidParameter("empty training set");
  if (y.size() != n) throw DimensionError("label count differs from sample count");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y[i] != Scalar(0) && y[i] != Scalar(1)) throw InvalidParameter("labels must be 0 or 1");

  std::mt19937_64 batch_rng(derive_seed(cfg.seed, "batches"));
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));
  AdamState<Scalar> adam(model);
  MlpGradients<Scalar> grads;

  const Eigen::Index batch = std::min<Eigen::Index>(static_cast<Eigen::Index>(cfg.batch_size), n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();

  Matrix xb(x.rows(), batch);
  Vector yb(batch);
  TrainTrace trace;
  std::vector<long long> rounded;
  const double scale = std::pow(10.0, cfg.stop_digits);

  for (std::uint64_t it = 1; it <= cfg.max_iterations; ++it) {
    // Shuffled mini-batches; a batch never straddles two epochs.
    if (cursor + static_cast<std::size_t>(batch) > order.size()) {
      std::shuffle(order.begin(), order.end(), batch_rng);
      cursor = 0;
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index src = order[cursor + static_cast<std::size_t>(b)];
      xb.col(b) = x.col(src);
      yb[b] = y[src];
    }
    cursor += static_cast<std::size_t>(batch);

    const Scalar loss = loss_and_gradients<Scalar>(model, xb, yb, &grads, &dropout_rng);
    if (!std::isfinite(static_cast<double>(loss))) throw DivergenceError(it, "non-finite training loss");

    if (cfg.optimizer == OptimizerKind::Adam) {
      ++adam.t;
      const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.t));
      const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.t));
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        adam_update(model.weights[l], grads.weights[l], adam.mw[l], adam.vw[l], cfg.learning_rate, cfg.adam_beta1,
                    cfg.adam_beta2, cfg.adam_epsilon, bias1, bias2);
        adam_update(model.biases[l], grads.biases[l], adam.mb[l], adam.vb[l], cfg.learning_rate, cfg.adam_beta1,
                    cfg.adam_beta2, cfg.adam_epsilon, bias1, bias2);
      }
    } else {
      const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        model.weights[l] -= lr * grads.weights[l];
        model.biases[l] -= lr * grads.biases[l];
      }
    }
    model.trained_iterations = it;

    const bool at_checkpoint = it % cfg.checkpoint_every == 0;
    if (at_checkpoint || it == cfg.max_iterations) {
      const auto [full_loss, acc] = evaluate_full(model, x, y);
      if (!std::isfinite(full_loss)) throw DivergenceError(it, "non-finite training loss");
      trace.checkpoints.push_back({it, full_loss, acc});
      if (at_checkpoint) {
        rounded.push_back(std::llround(acc * scale));
        if (rounded.size() >= cfg.stop_window &&
            std::all_of(rounded.end() - static_cast<std::ptrdiff_t>(cfg.stop_window), rounded.end(),
                        [&](long long v) { return v == rounded.back(); })) {
          trace.stop_reason = StopReason::Plateau;
          return trace;
        }
      }
    }
  }
  trace.stop_reason = StopReason::MaxIterations;
  return trace;
}

template <typename Scalar>
TrainTrace train_mlp(Mlp<Scalar>& model, const CrpDataset& train) {
  if (train.empty()) throw InvalidParameter("empty training set");
  const typename Mlp<Scalar>::Matrix x = train.features<Scalar>().transpose();
  const typename Mlp<Scalar>::Vector y = train.labels<Scalar>();
  return train_mlp<Scalar>(model, x, y);
}

template <typename Scalar>
double accuracy(const Mlp<Scalar>& model, const CrpDataset& test) {
  if (test.empty()) throw InvalidParameter("empty test set");
  const typename Mlp<Scalar>::Matrix x = test.features<Scalar>().transpose();
  const typename Mlp<Scalar>::Vector y = test.labels<Scalar>();
  return accuracy<Scalar>(model, x, y);
}

// ---- checkpoint files ----------------------------------------------------

nlohmann::json to_json(const MlpConfig& c) {
  return {{"m", c.m},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"dropout_rate", c.dropout_rate},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_iterations", c.max_iterations},
          {"restarts", c.restarts},
          {"checkpoint_every", c.checkpoint_every},
          {"stop_window", c.stop_window},
          {"stop_digits", c.stop_digits},
          {"seed", c.seed},
          {"activation", to_string(c.activation)},
          {"optimizer", to_string(c.optimizer)},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& j) {
  MlpConfig c;
  c.m = j.at("m");
  c.layers = j.at("layers");
  c.hidden = j.at("hidden");
  c.dropout_rate = j.at("dropout_rate");
  c.learning_rate = j.at("learning_rate");
  c.batch_size = j.at("batch_size");
  c.max_iterations = j.at("max_iterations");
  c.restarts = j.value("restarts", std::size_t{1});
  c.checkpoint_every = j.at("checkpoint_every");
  c.stop_window = j.at("stop_window");
  c.stop_digits = j.at("stop_digits");
  c.seed = j.at("seed");
  c.activation = parse_activation(j.at("activation"));
  c.optimizer = parse_optimizer(j.at("optimizer"));
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.adam_epsilon = j.at("adam_epsilon");
  c.validate();
  return c;
}

namespace {

constexpr int kModelFormat = 1;

}  // namespace

template <typename Scalar>
void save_model(const Mlp<Scalar>& model, const std::filesystem::path& path) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto& w = model.weights[l];
    std::vector<double> wv(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.size(); ++i) wv[static_cast<std::size_t>(i)] = static_cast<double>(w.data()[i]);
    std::vector<double> bv(static_cast<std::size_t>(model.biases[l].size()));
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i)
      bv[static_cast<std::size_t>(i)] = static_cast<double>(model.biases[l][i]);
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights_colmajor", wv}, {"biases", bv}});
  }
  const nlohmann::json doc = {{"format", "brpuf-mlp"},
                              {"version", kModelFormat},
                              {"scalar", sizeof(Scalar) == 4 ? "float32" : "float64"},
                              {"config", to_json(model.config)},
                              {"trained_iterations", model.trained_iterations},
                              {"layers", layers}};
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump() << '\n';
}

template <typename Scalar>
Mlp<Scalar> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (doc.at("format") != "brpuf-mlp" || doc.at("version") != kModelFormat)
    throw InvalidParameter("not a supported model checkpoint");
  Mlp<Scalar> model = build_mlp<Scalar>(mlp_config_from_json(doc.at("config")), InitKind::Zero);
  model.trained_iterations = doc.at("trained_iterations");
  const auto& layers = doc.at("layers");
  if (layers.size() != model.weights.size()) throw InvalidParameter("checkpoint layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = model.weights[l];
    const auto wv = layers[l].at("weights_colmajor").get<std::vector<double>>();
    const auto bv = layers[l].at("biases").get<std::vector<double>>();
    if (layers[l].at("rows") != w.rows() || layers[l].at("cols") != w.cols() ||
        wv.size() != static_cast<std::size_t>(w.size()) || bv.size() != static_cast<std::size_t>(model.biases[l].size()))
      throw InvalidParameter("checkpoint layer shape mismatch");
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(wv[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i)
      model.biases[l][i] = static_cast<Scalar>(bv[static_cast<std::size_t>(i)]);
  }
  return model;
}

#define BRPUF_INSTANTIATE_MLP(S)                                                                                   \
  template Mlp<S> build_mlp<S>(const MlpConfig&, InitKind);                                                       \
  template Eigen::Matrix<S, 2, Eigen::Dynamic> logits<S>(const Mlp<S>&,                                           \
                                                         const Eigen::Ref<const Mlp<S>::Matrix>&, std::mt19937_64*); \
  template Eigen::Matrix<S, 1, Eigen::Dynamic> forward<S>(const Mlp<S>&, const Eigen::Ref<const Mlp<S>::Matrix>&, \
                                                          std::mt19937_64*);                                      \
  template Eigen::Matrix<S, 2, Eigen::Dynamic> class_probabilities<S>(const Mlp<S>&,                              \
                                                                      const Eigen::Ref<const Mlp<S>::Matrix>&);   \
  template S loss_and_gradients<S>(const Mlp<S>&, const Eigen::Ref<const Mlp<S>::Matrix>&,                        \
                                   const Eigen::Ref<const Mlp<S>::Vector>&, MlpGradients<S>*, std::mt19937_64*);  \
  template S mean_loss<S>(const Mlp<S>&, const Eigen::Ref<const Mlp<S>::Matrix>&,                                 \
                          const Eigen::Ref<const Mlp<S>::Vector>&);                                               \
  template double accuracy<S>(const Mlp<S>&, const Eigen::Ref<const Mlp<S>::Matrix>&,                             \
                              const Eigen::Ref<const Mlp<S>::Vector>&);                                           \
  template TrainTrace train_mlp<S>(Mlp<S>&, const Eigen::Ref<const Mlp<S>::Matrix>&,                              \
                                   const Eigen::Ref<const Mlp<S>::Vector>&);                                      \
  template TrainTrace train_mlp<S>(Mlp<S>&, const CrpDataset&);                                                   \
  template double accuracy<S>(const Mlp<S>&, const CrpDataset&);                                                  \
  template void save_model<S>(const Mlp<S>&, const std::filesystem::path&);                                      \
  template Mlp<S> load_model<S>(const std::filesystem::path&);

BRPUF_INSTANTIATE_MLP(float)
BRPUF_INSTANTIATE_MLP(double)

#undef BRPUF_INSTANTIATE_MLP

}  // namespace brpuf
