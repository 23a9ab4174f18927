#include "dualsource/nnc.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace dualsource::nnc {

using nlohmann::json;

// ---------------------------------------------------------------- network

Network Network::make(std::size_t n_inputs, const std::vector<std::size_t>& hidden,
                      std::size_t n_outputs, bool output_bias, double alpha) {
  Network net;
  net.alpha = alpha;
  std::size_t in = n_inputs;
  for (std::size_t width : hidden) {
    net.layers.push_back(Layer{Matrix::Zero(width, in), Matrix::Zero(1, width), Activation::celu});
    in = width;
  }
  net.layers.push_back(Layer{Matrix::Zero(n_outputs, in),
                             output_bias ? Matrix::Zero(1, n_outputs) : Matrix(),
                             Activation::identity});
  net.validate();
  return net;
}

Network Network::dual_sourcing_default(const CostParams& p) {
  return make(input_width(p, InputMode::state), {128, 64, 32, 16, 8, 4, 2}, 2);
}

Network Network::single_sourcing_minimal() { return make(1, {1}, 1, false); }

Network Network::empirical_default(const CostParams& p) {
  Network net = make(input_width(p, InputMode::reduced_with_moments), {8, 8, 8}, 2);
  net.inputs = InputMode::reduced_with_moments;
  return net;
}

std::size_t Network::n_inputs() const { return layers.empty() ? 0 : layers.front().W.cols(); }
std::size_t Network::n_outputs() const { return layers.empty() ? 0 : layers.back().W.rows(); }

std::size_t Network::parameter_count() const {
  std::size_t n = 1;
  for (const auto& l : layers) n += l.W.size() + l.b.size();
  return n;
}

void Network::validate() const {
  if (layers.empty()) throw NetworkFormatError("network has no layers");
  if (!(alpha > 0.0)) throw NetworkFormatError("CELU alpha must be > 0");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw NetworkFormatError("scale must be > 0");
  if (!std::isfinite(init_inventory)) throw NetworkFormatError("init_inventory not finite");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.W.rows() == 0 || l.W.cols() == 0) throw NetworkFormatError("empty layer");
    if (i > 0 && l.W.cols() != layers[i - 1].W.rows())
      throw NetworkFormatError("layer dimensions do not chain");
    if (l.has_bias() && (l.b.rows() != 1 || l.b.cols() != l.W.rows()))
      throw NetworkFormatError("bias length does not match layer width");
    if (!l.W.allFinite() || !l.b.allFinite()) throw NetworkFormatError("non-finite parameter");
  }
}

bool operator==(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size() || a.alpha != b.alpha ||
      a.init_inventory != b.init_inventory || a.scale != b.scale || a.inputs != b.inputs)
    return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const Layer& x = a.layers[i];
    const Layer& y = b.layers[i];
    if (x.act != y.act || x.W.rows() != y.W.rows() || x.W.cols() != y.W.cols() ||
        x.b.size() != y.b.size() || x.W != y.W || (x.has_bias() && x.b != y.b))
      return false;
  }
  return true;
}

std::size_t input_width(const CostParams& p, InputMode mode) {
  const std::size_t l_e = p.single_source ? 0 : static_cast<std::size_t>(p.l_e);
  const std::size_t l_r = static_cast<std::size_t>(p.l_r);
  if (mode == InputMode::state) return 1 + l_r + l_e;
  if (l_r == 0) throw NetworkFormatError("moment inputs need l_r >= 1");
  return l_r + l_e + 2;
}

double celu(double x, double alpha) { return x > 0.0 ? x : alpha * std::expm1(x / alpha); }

std::int64_t fractional_decouple(double y) {
  return y > 0.0 ? static_cast<std::int64_t>(std::floor(y)) : 0;
}

void init_weights(Network& net, Rng& rng) {
  for (auto& l : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.W.cols()));
    auto draw = [&] { return (2.0 * rng.uniform() - 1.0) * bound; };
    for (Eigen::Index i = 0; i < l.W.size(); ++i) l.W.data()[i] = draw();
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b.data()[i] = draw();
  }
}

// ------------------------------------------------------------ persistence

namespace {

constexpr const char* kFormat = "dualsource-network";
constexpr int kVersion = 1;

const char* to_string(InputMode m) {
  return m == InputMode::state ? "state" : "reduced_with_moments";
}

}  // namespace

std::string save(const Network& net) {
  net.validate();
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["alpha"] = net.alpha;
  j["init_inventory"] = net.init_inventory;
  j["scale"] = net.scale;
  j["inputs"] = to_string(net.inputs);
  json layers = json::array();
  for (const auto& l : net.layers) {
    json jl;
    jl["in"] = l.W.cols();
    jl["out"] = l.W.rows();
    jl["activation"] = l.act == Activation::celu ? "celu" : "identity";
    jl["weights"] = std::vector<double>(l.W.data(), l.W.data() + l.W.size());
    if (l.has_bias())
      jl["bias"] = std::vector<double>(l.b.data(), l.b.data() + l.b.size());
    else
      jl["bias"] = nullptr;
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j.dump(1);
}

Network load(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw NetworkFormatError(std::string("network file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw NetworkFormatError("not a network file");
    if (j.at("version").get<int>() != kVersion)
      throw NetworkFormatError("unsupported network file version");
    Network net;
    net.alpha = j.at("alpha").get<double>();
    net.init_inventory = j.at("init_inventory").get<double>();
    net.scale = j.value("scale", 1.0);
    const std::string inputs = j.value("inputs", std::string("state"));
    if (inputs == "state")
      net.inputs = InputMode::state;
    else if (inputs == "reduced_with_moments")
      net.inputs = InputMode::reduced_with_moments;
    else
      throw NetworkFormatError("unknown input mode '" + inputs + "'");
    for (const auto& jl : j.at("layers")) {
      const auto in = jl.at("in").get<Eigen::Index>();
      const auto out = jl.at("out").get<Eigen::Index>();
      const auto w = jl.at("weights").get<std::vector<double>>();
      if (in <= 0 || out <= 0 || w.size() != static_cast<std::size_t>(in * out))
        throw NetworkFormatError("weight count does not match layer shape");
      Layer l;
      l.W = Eigen::Map<const Matrix>(w.data(), out, in);
      if (!jl.at("bias").is_null()) {
        const auto b = jl.at("bias").get<std::vector<double>>();
        if (b.size() != static_cast<std::size_t>(out))
          throw NetworkFormatError("bias length does not match layer width");
        l.b = Eigen::Map<const Matrix>(b.data(), 1, out);
      }
      const std::string act = jl.at("activation").get<std::string>();
      if (act == "celu")
        l.act = Activation::celu;
      else if (act == "identity")
        l.act = Activation::identity;
      else
        throw NetworkFormatError("unknown activation '" + act + "'");
      net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw NetworkFormatError(std::string("malformed network file: ") + e.what());
  }
}

// --------------------------------------------------------------- training

void TrainingConfig::validate() const {
  if (T == 0) throw std::invalid_argument("training horizon T must be >= 1");
  if (M == 0) throw std::invalid_argument("minibatch size M must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(eta_init_inv >= 0.0)) throw std::invalid_argument("eta_init_inv must be >= 0");
  if (!(alpha_rms > 0.0 && alpha_rms < 1.0)) throw std::invalid_argument("alpha_rms in (0, 1)");
  if (!(eps_rms > 0.0)) throw std::invalid_argument("eps_rms must be > 0");
  if (!(decay_factor > 0.0)) throw std::invalid_argument("decay_factor must be > 0");
}

OptimizerState OptimizerState::for_network(const Network& net) {
  OptimizerState st;
  for (const auto& l : net.layers) {
    st.vW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    st.vb.push_back(Matrix::Zero(l.b.rows(), l.b.cols()));
  }
  return st;
}

double rmsprop_step(double p, double g, double& v, double eta, double alpha_rms, double eps_rms) {
  v = alpha_rms * v + (1.0 - alpha_rms) * g * g;
  return p - eta * g / (std::sqrt(v) + eps_rms);
}

NetworkGradient NetworkGradient::zeros_like(const Network& net) {
  NetworkGradient g;
  for (const auto& l : net.layers) {
    g.dW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    g.db.push_back(Matrix::Zero(l.b.rows(), l.b.cols()));
  }
  return g;
}

Moments moments_of(const DemandModel& model) {
  if (const auto* tv = std::get_if<TruncatedNormalProcess>(&model.variant()))
    return Moments{tv->mu, tv->sigma};
  return {};
}

namespace {

void check_shape(const Network& net, const CostParams& p) {
  net.validate();
  if (net.n_inputs() != input_width(p, net.inputs))
    throw std::invalid_argument("network input width does not match the instance lead times");
  const std::size_t want_out = p.single_source ? 1 : 2;
  if (net.n_outputs() != want_out)
    throw std::invalid_argument(p.single_source ? "single-source controller needs 1 output"
                                                : "dual-source controller needs 2 outputs");
}

void check_moments(const Network& net, const Moments* moments, std::size_t T) {
  if (net.inputs != InputMode::reduced_with_moments) return;
  if (!moments || moments->mu.size() < T || moments->sigma.size() < T)
    throw std::invalid_argument("controller needs demand moments covering the horizon");
}

struct Bound {
  std::vector<Var> W, b;
  Var init;
};

Bound bind(Tape& tape, const Network& net, NetworkGradient* g, const Matrix& init_value,
           Matrix& init_grad) {
  Bound out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    out.W.push_back(tape.parameter(&l.W, g ? &g->dW[i] : nullptr));
    out.b.push_back(l.has_bias() ? tape.parameter(&l.b, g ? &g->db[i] : nullptr) : Var{});
  }
  out.init = tape.parameter(&init_value, g ? &init_grad : nullptr);
  return out;
}

Var net_forward(Tape& tape, const Network& net, const Bound& bnd, Var x) {
  Var h = net.scale != 1.0 ? tape.scale(x, 1.0 / net.scale) : x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    h = l.has_bias() ? tape.affine(h, bnd.W[i], bnd.b[i]) : tape.affine(h, bnd.W[i]);
    if (l.act == Activation::celu) h = tape.celu(h, net.alpha);
  }
  return net.scale != 1.0 ? tape.scale(h, net.scale) : h;
}

// Pops the oldest pipeline entry and appends `order`; zero-length pipelines
// deliver immediately.
Var shift(std::vector<Var>& pipe, Var order) {
  if (pipe.empty()) return order;
  const Var arriving = pipe.front();
  pipe.erase(pipe.begin());
  pipe.push_back(order);
  return arriving;
}

Matrix fixed_charge(const Matrix& q, double f) {
  return (q.array() > 0.0).select(Matrix::Constant(q.rows(), q.cols(), f), 0.0);
}

}  // namespace

double loss_and_gradient(const Network& net, const CostParams& p, const Matrix& demand,
                         const Moments* moments, double gamma, bool surrogate,
                         NetworkGradient* grad) {
  check_shape(net, p);
  const Eigen::Index M = demand.rows();
  const std::size_t T = static_cast<std::size_t>(demand.cols());
  if (M == 0 || T == 0) throw std::invalid_argument("empty demand matrix");
  check_moments(net, moments, T);
  if (grad && (grad->dW.size() != net.layers.size()))
    throw std::invalid_argument("gradient layout does not match network");

  Tape tape(surrogate);
  const Matrix init_value = Matrix::Constant(1, 1, net.init_inventory);
  Matrix init_grad = Matrix::Zero(1, 1);
  const Bound bnd = bind(tape, net, grad, init_value, init_grad);

  const std::size_t l_e = p.single_source ? 0 : static_cast<std::size_t>(p.l_e);
  const Var zero = tape.constant(0.0, M);
  Var I = tape.broadcast(tape.frac_decouple(bnd.init), M);
  std::vector<Var> Q_r(static_cast<std::size_t>(p.l_r), zero);
  std::vector<Var> Q_e(l_e, zero);

  Var total = tape.constant(Matrix::Zero(1, 1));
  double weight = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Var> feats;
    if (net.inputs == InputMode::state) {
      feats.push_back(I);
      feats.insert(feats.end(), Q_r.begin(), Q_r.end());
      feats.insert(feats.end(), Q_e.begin(), Q_e.end());
    } else {
      feats.push_back(tape.add(I, Q_r.front()));
      feats.insert(feats.end(), Q_r.begin() + 1, Q_r.end());
      feats.insert(feats.end(), Q_e.begin(), Q_e.end());
      feats.push_back(tape.constant(moments->mu[t], M));
      feats.push_back(tape.constant(moments->sigma[t], M));
    }
    const Var y = net_forward(tape, net, bnd, tape.concat_cols(feats));

    const Var q_r = tape.frac_decouple(tape.column(y, 0));
    Var arrived = shift(Q_r, q_r);
    Var cost = tape.scale(q_r, p.c_r);
    Matrix fixed = fixed_charge(tape.value(q_r), p.f_r);
    if (!p.single_source) {
      const Var q_e = tape.frac_decouple(tape.column(y, 1));
      arrived = tape.add(arrived, shift(Q_e, q_e));
      cost = tape.add(cost, tape.scale(q_e, p.c_e));
      fixed += fixed_charge(tape.value(q_e), p.f_e);
    }
    I = tape.sub(tape.add(I, arrived), tape.constant(Matrix(demand.col(static_cast<Eigen::Index>(t)))));
    cost = tape.add(cost, tape.scale(tape.relu(I), p.h));
    cost = tape.add(cost, tape.scale(tape.relu(tape.scale(I, -1.0)), p.b));
    if (p.has_fixed_costs()) cost = tape.add(cost, tape.constant(std::move(fixed)));
    total = tape.add(total, tape.scale(tape.mean(cost), weight));
    weight *= gamma;
  }
  const Var loss = tape.scale(total, 1.0 / static_cast<double>(T));
  if (grad) {
    tape.backward(loss);
    grad->d_init += init_grad(0, 0);
  }
  return tape.scalar(loss);
}

void apply_update(Network& net, const NetworkGradient& g, OptimizerState& st, double eta,
                  double eta_init_inv, const TrainingConfig& cfg) {
  const double a = cfg.alpha_rms;
  auto update = [&](Matrix& param, const Matrix& grad, Matrix& v) {
    v = a * v + (1.0 - a) * grad.cwiseAbs2();
    param.array() -= eta * grad.array() / (v.array().sqrt() + cfg.eps_rms);
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    update(net.layers[i].W, g.dW[i], st.vW[i]);
    if (net.layers[i].has_bias()) update(net.layers[i].b, g.db[i], st.vb[i]);
  }
  if (cfg.learn_init_inventory)
    net.init_inventory =
        rmsprop_step(net.init_inventory, g.d_init, st.v_init, eta_init_inv, a, cfg.eps_rms);
}

namespace {

bool all_finite(const NetworkGradient& g) {
  for (const auto& m : g.dW)
    if (!m.allFinite()) return false;
  for (const auto& m : g.db)
    if (!m.allFinite()) return false;
  return std::isfinite(g.d_init);
}

TrainResult train_loop(const CostParams& p, const std::function<const Matrix&(std::size_t)>& demand,
                       const Moments* moments, Network net, const TrainingConfig& cfg,
                       const EpochCallback& on_epoch, std::size_t epoch_offset = 0) {
  cfg.validate();
  p.validate();
  check_shape(net, p);
  OptimizerState st = OptimizerState::for_network(net);
  TrainResult r;
  r.best_loss = std::numeric_limits<double>::infinity();
  r.best_net = net;
  for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
    NetworkGradient g = NetworkGradient::zeros_like(net);
    const double loss = loss_and_gradient(net, p, demand(e), moments, cfg.gamma, false, &g);
    if (!std::isfinite(loss) || !all_finite(g))
      throw NumericError("non-finite loss or gradient at epoch " + std::to_string(e));
    if (loss < r.best_loss) {
      r.best_loss = loss;
      r.best_epoch = e + epoch_offset;
      r.best_net = net;
    }
    r.history.push_back(EpochRecord{e + epoch_offset, loss, r.best_loss});
    if (on_epoch) on_epoch(r.history.back());
    const bool decayed = cfg.decay_epoch > 0 && e >= cfg.decay_epoch;
    const double f = decayed ? cfg.decay_factor : 1.0;
    apply_update(net, g, st, cfg.eta * f, cfg.eta_init_inv * f, cfg);
  }
  r.final_net = std::move(net);
  return r;
}

Matrix sample_demand(const DemandModel& model, std::size_t M, std::size_t T, Rng rng) {
  Matrix d(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(T));
  for (Eigen::Index m = 0; m < d.rows(); ++m)
    for (Eigen::Index t = 0; t < d.cols(); ++t) d(m, t) = model.sample(static_cast<std::size_t>(t), rng);
  return d;
}

}  // namespace

TrainResult train(const CostParams& p, const DemandModel& model, Network net,
                  const TrainingConfig& cfg, const EpochCallback& on_epoch) {
  if (model.is_time_varying()) {
    const auto& proc = std::get<TruncatedNormalProcess>(model.variant());
    if (cfg.T > proc.horizon())
      throw std::invalid_argument("training horizon exceeds the demand process length");
  }
  const Moments moments = moments_of(model);
  const Rng root(cfg.seed);
  Matrix current;
  auto source = [&](std::size_t e) -> const Matrix& {
    current = sample_demand(model, cfg.M, cfg.T, root.substream(e));
    return current;
  };
  return train_loop(p, source, model.is_time_varying() ? &moments : nullptr, std::move(net), cfg,
                    on_epoch);
}

TrainResult train_fixed(const CostParams& p, const Matrix& demand, const Moments* moments,
                        Network net, const TrainingConfig& cfg, const EpochCallback& on_epoch) {
  return train_loop(p, [&](std::size_t) -> const Matrix& { return demand; }, moments,
                    std::move(net), cfg, on_epoch);
}

TrainResult train_empirical(const TruncatedNormalProcess& process, const CostParams& p,
                            Network net, const EmpiricalTrainingConfig& cfg,
                            const EpochCallback& on_epoch) {
  const DemandModel model(process);
  const std::size_t T = process.horizon();
  if (cfg.one_shot.T != T || cfg.fine_tune.T != T)
    throw std::invalid_argument("training horizon must equal the demand process length");
  const Moments moments = moments_of(model);

  const Matrix single = sample_demand(model, 1, T, Rng(cfg.one_shot.seed));
  TrainResult first = train_fixed(p, single, &moments, std::move(net), cfg.one_shot, on_epoch);

  const Matrix batch = sample_demand(model, cfg.fine_tune.M, T, Rng(cfg.fine_tune.seed));
  TrainResult second = train_loop(
      p, [&](std::size_t) -> const Matrix& { return batch; }, &moments, first.best_net,
      cfg.fine_tune, on_epoch, cfg.one_shot.max_epochs);
  first.history.insert(first.history.end(), second.history.begin(), second.history.end());
  second.history = std::move(first.history);
  return second;
}

// ------------------------------------------------------------- deployment

Matrix forward(const Network& net, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != net.n_inputs())
    throw std::invalid_argument("feature width does not match network input");
  Matrix h = net.scale != 1.0 ? Matrix((1.0 / net.scale) * x) : x;
  for (const auto& l : net.layers) {
    Matrix z;
    z.noalias() = h * l.W.transpose();
    if (l.has_bias()) z.rowwise() += l.b.row(0);
    if (l.act == Activation::celu) z = celu_apply(z, net.alpha);
    h = std::move(z);
  }
  if (net.scale != 1.0) h = net.scale * h;
  return h;
}

Matrix features(const Network& net, const InventoryState& s, std::size_t t,
                const Moments* moments) {
  Matrix row(1, static_cast<Eigen::Index>(net.n_inputs()));
  Eigen::Index k = 0;
  auto put = [&](double v) {
    if (k >= row.cols()) throw std::invalid_argument("state does not match network input");
    row(0, k++) = v;
  };
  if (net.inputs == InputMode::state) {
    put(s.I);
    for (auto q : s.Q_r) put(static_cast<double>(q));
    for (auto q : s.Q_e) put(static_cast<double>(q));
  } else {
    if (s.Q_r.empty()) throw std::invalid_argument("moment inputs need l_r >= 1");
    if (!moments || moments->mu.size() <= t)
      throw std::invalid_argument("demand moments do not cover period " + std::to_string(t));
    put(s.I + static_cast<double>(s.Q_r.front()));
    for (std::size_t i = 1; i < s.Q_r.size(); ++i) put(static_cast<double>(s.Q_r[i]));
    for (auto q : s.Q_e) put(static_cast<double>(q));
    put(moments->mu[t]);
    put(moments->sigma[t]);
  }
  if (k != row.cols()) throw std::invalid_argument("state does not match network input");
  return row;
}

Action act(const Network& net, const InventoryState& s, std::size_t t, const Moments* moments) {
  const Matrix y = forward(net, features(net, s, t, moments));
  Action a{fractional_decouple(y(0, 0)), 0};
  if (y.cols() > 1) a.q_e = fractional_decouple(y(0, 1));
  return a;
}

double starting_inventory(const Network& net) {
  return static_cast<double>(fractional_decouple(net.init_inventory));
}

std::vector<double> evaluate_paths(const Network& net, const CostParams& p,
                                   const DemandPaths& paths, const Moments* moments,
                                   std::size_t burn_in) {
  check_shape(net, p);
  check_moments(net, moments, paths.horizon());
  const Eigen::Index n = static_cast<Eigen::Index>(paths.n_reps());
  const Eigen::Index l_r = p.l_r;
  const Eigen::Index l_e = p.single_source ? 0 : p.l_e;
  Matrix I = Matrix::Constant(n, 1, starting_inventory(net));
  Matrix Q_r = Matrix::Zero(n, l_r);
  Matrix Q_e = Matrix::Zero(n, l_e);
  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  Matrix x(n, static_cast<Eigen::Index>(net.n_inputs()));

  auto shift = [](Matrix& pipe, const Matrix& order) -> Matrix {
    if (pipe.cols() == 0) return order;
    Matrix arriving = pipe.col(0);
    for (Eigen::Index c = 1; c < pipe.cols(); ++c) pipe.col(c - 1) = pipe.col(c);
    pipe.col(pipe.cols() - 1) = order;
    return arriving;
  };

  for (std::size_t t = 0; t < paths.horizon(); ++t) {
    if (net.inputs == InputMode::state) {
      x.col(0) = I;
      x.middleCols(1, l_r) = Q_r;
      x.middleCols(1 + l_r, l_e) = Q_e;
    } else {
      x.col(0) = I + Q_r.col(0);
      x.middleCols(1, l_r - 1) = Q_r.rightCols(l_r - 1);
      x.middleCols(l_r, l_e) = Q_e;
      x.col(l_r + l_e).setConstant(moments->mu[t]);
      x.col(l_r + l_e + 1).setConstant(moments->sigma[t]);
    }
    const Matrix y = forward(net, x).cwiseMax(0.0).array().floor().matrix();
    const Matrix q_r = y.col(0);
    Matrix arrived = shift(Q_r, q_r);
    Matrix q_e = Matrix::Zero(n, 1);
    if (!p.single_source) {
      q_e = y.col(1);
      arrived += shift(Q_e, q_e);
    }
    for (Eigen::Index m = 0; m < n; ++m) {
      I(m, 0) += arrived(m, 0) - paths.at(static_cast<std::size_t>(m), t);
      if (t < burn_in) continue;
      const Action a{static_cast<std::int64_t>(q_r(m, 0)), static_cast<std::int64_t>(q_e(m, 0))};
      total[static_cast<std::size_t>(m)] += order_cost(a, p) + p.inventory_cost(I(m, 0));
    }
  }
  const double counted = static_cast<double>(paths.horizon() > burn_in ? paths.horizon() - burn_in : 0);
  for (auto& v : total) v = counted > 0 ? v / counted : 0.0;
  return total;
}

}  // namespace dualsource::nnc
