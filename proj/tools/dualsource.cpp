// Command-line front end: dp | train | eval | sweep | ingest.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dualsource/demand.hpp"
#include "dualsource/dp.hpp"
#include "dualsource/eval.hpp"
#include "dualsource/heuristics.hpp"
#include "dualsource/nnc.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dualsource;

namespace {

constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

/// Exclusive claim on an output directory for the lifetime of the command.
class DirLock {
public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".dualsource.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw ConfigError("output directory " + dir.string() + " is locked by another run");
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  fs::path path_;
};

// ---------------------------------------------------------------- config

struct Context {
  json config = json::object();
  std::optional<std::uint64_t> seed;
  fs::path out;
  fs::path base;  ///< directory relative paths in the config resolve against

  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("this command needs an explicit seed (--seed or \"seed\")");
    return *seed;
  }
  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  }
  json section(const char* name) const {
    return config.contains(name) ? config.at(name) : json::object();
  }
};

Context load_context(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                     const std::string& out_flag) {
  Context c;
  if (!config_path.empty()) {
    c.config = read_json(config_path);
    c.base = fs::path(config_path).parent_path();
  }
  allow_keys(c.config,
             {"schema_version", "instance", "demand", "seed", "out", "dp", "train", "eval",
              "sweep", "ingest"},
             "config");
  if (!config_path.empty()) {
    if (!c.config.contains("schema_version"))
      throw ConfigError("config is missing schema_version");
    if (c.config.at("schema_version") != kSchemaVersion)
      throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) +
                        ")");
  }
  c.config["schema_version"] = kSchemaVersion;
  if (seed_flag) c.config["seed"] = *seed_flag;
  if (c.config.contains("seed")) c.seed = c.config.at("seed").get<std::uint64_t>();
  if (!out_flag.empty()) c.config["out"] = out_flag;
  if (!c.config.contains("out")) throw ConfigError("no output directory (--out or \"out\")");
  c.out = c.config.at("out").get<std::string>();
  return c;
}

CostParams instance_of(const Context& c) {
  return eval::cost_params_from_json(c.section("instance"));
}

DemandModel demand_of(const Context& c, const json& spec) {
  const std::string type = spec.value("type", std::string("uniform"));
  if (type == "csv") {
    allow_keys(spec, {"type", "path"}, "demand");
    std::ifstream in(c.resolve(spec.at("path").get<std::string>()));
    if (!in) throw ConfigError("cannot read demand file " + spec.at("path").get<std::string>());
    return DemandModel(ingest_empirical(read_demand_csv(in)));
  }
  if (type == "synthetic_lifecycle") {
    allow_keys(spec, {"type", "series", "weeks", "seed"}, "demand");
    if (!spec.contains("seed")) throw ConfigError("synthetic_lifecycle demand needs a generator \"seed\"");
    const auto rows = synthetic_lifecycle_demand(spec.value("series", 100), spec.value("weeks", 115),
                                                 spec.at("seed").get<std::uint64_t>());
    return DemandModel(ingest_empirical(rows));
  }
  if (!spec.contains("type")) {
    json s = spec;
    s["type"] = "uniform";
    return eval::demand_from_json(s);
  }
  return eval::demand_from_json(spec);
}

DemandModel demand_of(const Context& c) {
  if (!c.config.contains("demand")) return DemandModel(DiscreteUniform{0, 4});
  return demand_of(c, c.config.at("demand"));
}

// -------------------------------------------------------------------- dp

struct DpRun {
  dp::ValueIterationResult result;
  std::size_t recurrent = 0;
  double stationary_cost = 0.0;
};

void check_dp_scope(const CostParams& p, const DemandModel& model) {
  if (p.single_source) throw ConfigError("dp needs a dual-sourcing instance");
  if (p.l_e != 0 || p.c_r != 0.0) throw ConfigError("dp needs the reduced form l_e = 0, c_r = 0");
  if (!model.is_discrete()) throw ConfigError("dp needs discrete stationary demand");
  if (p.l_r > 4)
    throw ConfigError("l_r = " + std::to_string(p.l_r) +
                      " is out of scope for exact DP (state space too large)");
}

DpRun run_dp(const CostParams& p, const DemandModel& model, const json& cfg) {
  check_dp_scope(p, model);
  allow_keys(cfg, {"eps", "max_iterations", "lo", "hi", "q_max"}, "dp");
  dp::StateSpace space = dp::StateSpace::defaults(p, model);
  space.lo = cfg.value("lo", space.lo);
  space.hi = cfg.value("hi", space.hi);
  space.q_max = cfg.value("q_max", space.q_max);
  dp::ValueIterationOptions opts;
  opts.eps = cfg.value("eps", opts.eps);
  opts.max_iterations = cfg.value("max_iterations", opts.max_iterations);
  DpRun r;
  try {
    r.result = dp::value_iteration(p, model, space, opts);
    r.recurrent = dp::recurrent_states(r.result.policy, p, model).size();
    r.stationary_cost = dp::policy_long_run_cost(r.result.policy, p, model).cost;
  } catch (const dp::DpError& e) {
    throw NumericFailure(e.what());
  }
  return r;
}

int cmd_dp(const Context& c) {
  const CostParams p = instance_of(c);
  const DemandModel model = demand_of(c);
  DirLock lock(c.out);
  const DpRun r = run_dp(p, model, c.section("dp"));
  {
    std::ofstream csv(c.out / "policy.csv");
    dp::write_policy_csv(csv, r.result.policy, &r.result.values);
  }
  write_json(c.out / "policy.json", eval::to_json(eval::PolicyHandle(r.result.policy)));
  write_json(c.out / "summary.json",
             json{{"command", "dp"},
                  {"config", c.config},
                  {"lambda_star", r.result.lambda_star},
                  {"lambda_lo", r.result.lambda_lo},
                  {"lambda_hi", r.result.lambda_hi},
                  {"iterations", r.result.values.iterations},
                  {"states", r.result.policy.space.size()},
                  {"recurrent_states", r.recurrent},
                  {"stationary_cost", r.stationary_cost}});
  std::cout << "lambda* = " << r.result.lambda_star << "\n";
  return 0;
}

// ----------------------------------------------------------------- train

nnc::Network architecture(const CostParams& p, const DemandModel& model, const json& cfg) {
  const json arch = cfg.value("architecture", json("default"));
  if (arch.is_object()) {
    allow_keys(arch, {"hidden", "output_bias", "alpha", "inputs"}, "train.architecture");
    const std::string inputs = arch.value("inputs", std::string("state"));
    const nnc::InputMode mode =
        inputs == "state" ? nnc::InputMode::state : nnc::InputMode::reduced_with_moments;
    nnc::Network net = nnc::Network::make(nnc::input_width(p, mode),
                                          arch.at("hidden").get<std::vector<std::size_t>>(),
                                          p.single_source ? 1 : 2, arch.value("output_bias", true),
                                          arch.value("alpha", 1.0));
    net.inputs = mode;
    return net;
  }
  const std::string name = arch.get<std::string>();
  if (name == "minimal") {
    if (!p.single_source || p.l_r != 0)
      throw ConfigError("the minimal architecture is for a zero-lead-time single supplier");
    return nnc::Network::single_sourcing_minimal();
  }
  if (name == "empirical") return nnc::Network::empirical_default(p);
  if (name == "default") {
    if (model.is_time_varying()) return nnc::Network::empirical_default(p);
    if (p.single_source && p.l_r == 0) return nnc::Network::single_sourcing_minimal();
    if (p.single_source)
      return nnc::Network::make(nnc::input_width(p, nnc::InputMode::state),
                                {128, 64, 32, 16, 8, 4, 2}, 1);
    return nnc::Network::dual_sourcing_default(p);
  }
  throw ConfigError("unknown architecture '" + name + "'");
}

nnc::TrainingConfig training_config(const json& cfg, std::uint64_t seed) {
  nnc::TrainingConfig t;
  t.T = cfg.value("T", t.T);
  t.M = cfg.value("M", t.M);
  t.gamma = cfg.value("gamma", t.gamma);
  t.eta = cfg.value("eta", t.eta);
  t.eta_init_inv = cfg.value("eta_init_inv", t.eta_init_inv);
  t.alpha_rms = cfg.value("alpha_rms", t.alpha_rms);
  t.eps_rms = cfg.value("eps_rms", t.eps_rms);
  t.max_epochs = cfg.value("max_epochs", t.max_epochs);
  t.decay_epoch = cfg.value("decay_epoch", t.decay_epoch);
  t.decay_factor = cfg.value("decay_factor", t.decay_factor);
  t.learn_init_inventory = cfg.value("learn_init_inventory", t.learn_init_inventory);
  t.seed = seed;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return t;
}

struct TrainOutcome {
  nnc::TrainResult result;
  double seconds = 0.0;
};

TrainOutcome run_training(const Context& c, const CostParams& p, const DemandModel& model,
                          const json& cfg, std::uint64_t seed, const std::string& warm_start,
                          std::ostream* loss_csv) {
  allow_keys(cfg,
             {"architecture", "T", "M", "gamma", "eta", "eta_init_inv", "alpha_rms", "eps_rms",
              "max_epochs", "decay_epoch", "decay_factor", "learn_init_inventory", "warm_start",
              "one_shot_epochs", "fine_tune_epochs", "fine_tune_samples", "scale", "eval"},
             "train");
  nnc::Network net;
  const std::string warm = !warm_start.empty() ? warm_start : cfg.value("warm_start", std::string());
  if (!warm.empty()) {
    net = nnc::load(read_file(c.resolve(warm)));
  } else {
    net = architecture(p, model, cfg);
    Rng rng(seed);
    nnc::init_weights(net, rng);
  }
  auto log = [&](const nnc::EpochRecord& e) {
    if (loss_csv) *loss_csv << e.epoch << ',' << e.loss << ',' << e.best << '\n';
  };
  const auto t0 = std::chrono::steady_clock::now();
  TrainOutcome out;
  if (model.is_time_varying()) {
    const auto& proc = std::get<TruncatedNormalProcess>(model.variant());
    if (warm.empty()) {
      double peak = 1.0;
      for (double m : proc.mu) peak = std::max(peak, m);
      net.scale = cfg.value("scale", peak);
    }
    nnc::EmpiricalTrainingConfig e;
    json phase = cfg;
    phase["T"] = proc.horizon();
    phase["M"] = 1;
    phase["max_epochs"] = cfg.value("one_shot_epochs", 2000);
    e.one_shot = training_config(phase, seed);
    phase["M"] = cfg.value("fine_tune_samples", 4);
    phase["max_epochs"] = cfg.value("fine_tune_epochs", 1000);
    e.fine_tune = training_config(phase, Rng::mix(seed + 1));
    out.result = nnc::train_empirical(proc, p, std::move(net), e, log);
  } else {
    out.result = nnc::train(p, model, std::move(net), training_config(cfg, seed), log);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

int cmd_train(const Context& c, const std::string& warm_start) {
  const CostParams p = instance_of(c);
  const DemandModel model = demand_of(c);
  const std::uint64_t seed = c.require_seed();
  const json cfg = c.section("train");
  DirLock lock(c.out);
  std::ofstream loss(c.out / "loss.csv");
  loss << "epoch,loss,best\n";
  loss.precision(17);
  const TrainOutcome t = run_training(c, p, model, cfg, seed, warm_start, &loss);
  write_file(c.out / "network.json", nnc::save(t.result.best_net));
  write_file(c.out / "network_final.json", nnc::save(t.result.final_net));
  json s{{"command", "train"},
         {"config", c.config},
         {"best_loss", t.result.best_loss},
         {"best_epoch", t.result.best_epoch},
         {"epochs", t.result.history.size()},
         {"init_inventory", t.result.best_net.init_inventory}};
  if (cfg.contains("eval")) {
    const json ev = cfg.at("eval");
    allow_keys(ev, {"n_reps", "horizon", "seed"}, "train.eval");
    const std::size_t horizon =
        model.is_time_varying() ? std::get<TruncatedNormalProcess>(model.variant()).horizon()
                                : ev.value("horizon", std::size_t{1000});
    const auto report =
        eval::evaluate(eval::NeuralPolicy{t.result.best_net}, p, model, ev.value("n_reps", std::size_t{500}),
                       ev.value("horizon", horizon), ev.value("seed", seed + 1));
    s["eval"] = eval::summary(report);
  }
  write_json(c.out / "summary.json", s);
  std::cerr << "trained " << t.result.history.size() << " epochs in " << t.seconds << " s\n";
  std::cout << "best loss = " << t.result.best_loss << " (epoch " << t.result.best_epoch << ")\n";
  return 0;
}

// ------------------------------------------------------------------ eval

eval::PolicyHandle resolve_policy(const Context& c, const CostParams& p, const DemandModel& model,
                                  const json& spec) {
  if (!spec.is_object() || !spec.contains("type"))
    throw ConfigError("policy spec needs a \"type\"");
  const std::string type = spec.at("type").get<std::string>();
  if (type == "file") {
    allow_keys(spec, {"type", "path"}, "policy");
    const fs::path path = c.resolve(spec.at("path").get<std::string>());
    if (!fs::exists(path)) throw ConfigError("policy file not found: " + path.string());
    return resolve_policy(c, p, model, read_json(path));
  }
  if (type == "network" && spec.contains("file")) {
    allow_keys(spec, {"type", "file"}, "policy");
    const fs::path path = c.resolve(spec.at("file").get<std::string>());
    if (!fs::exists(path)) throw ConfigError("network file not found: " + path.string());
    return eval::NeuralPolicy{nnc::load(read_file(path))};
  }
  if (type == "optimal") {
    allow_keys(spec, {"type"}, "policy");
    return run_dp(p, model, c.section("dp")).result.policy;
  }
  const std::uint64_t search_seed = c.seed.value_or(1);
  heuristics::SearchOptions opts;
  opts.seed = search_seed;
  if (type == "cdi_optimized" || type == "si_optimized" || type == "di_optimized") {
    allow_keys(spec, {"type", "n_reps", "horizon"}, "policy");
    opts.n_reps = spec.value("n_reps", opts.n_reps);
    opts.horizon = spec.value("horizon", opts.horizon);
    if (type == "cdi_optimized") return heuristics::optimize_cdi(p, model, opts).policy;
    if (type == "si_optimized") return heuristics::optimize_si(p, model, opts).policy;
    return heuristics::optimize_di(p, model, opts).policy;
  }
  if (type == "cdi_time_varying") {
    allow_keys(spec, {"type", "variant"}, "policy");
    if (!model.is_time_varying()) throw ConfigError("cdi_time_varying needs time-varying demand");
    const std::string v = spec.value("variant", std::string("current"));
    if (v != "current" && v != "future") throw ConfigError("variant must be current or future");
    return heuristics::cdi_time_varying_params(
        std::get<TruncatedNormalProcess>(model.variant()), p,
        v == "current" ? heuristics::CdiVariant::current : heuristics::CdiVariant::future);
  }
  return eval::policy_from_json(spec);
}

void write_report(const fs::path& dir, const std::string& stem, const eval::EvalReport& r) {
  std::ofstream costs(dir / (stem + "_costs.csv"));
  eval::write_costs_csv(costs, r);
  std::ofstream cdf(dir / (stem + "_cdf.csv"));
  eval::write_cdf_csv(cdf, r);
}

int cmd_eval(const Context& c, const std::string& policy_file, const std::string& compare_file,
             bool project) {
  const CostParams p = instance_of(c);
  const DemandModel model = demand_of(c);
  const std::uint64_t seed = c.require_seed();
  json cfg = c.section("eval");
  allow_keys(cfg, {"policy", "compare", "n_reps", "horizon", "burn_in", "project", "rmse",
                   "projection_periods"},
             "eval");
  if (!policy_file.empty()) cfg["policy"] = json{{"type", "file"}, {"path", policy_file}};
  if (!compare_file.empty()) cfg["compare"] = json{{"type", "file"}, {"path", compare_file}};
  if (!cfg.contains("policy")) throw ConfigError("eval needs a policy (--policy or eval.policy)");
  const std::size_t n_reps = cfg.value("n_reps", std::size_t{500});
  std::size_t horizon = cfg.value("horizon", std::size_t{1000});
  if (model.is_time_varying() && !cfg.contains("horizon"))
    horizon = std::get<TruncatedNormalProcess>(model.variant()).horizon();
  const std::size_t burn_in = cfg.value("burn_in", std::size_t{0});

  const eval::PolicyHandle policy = resolve_policy(c, p, model, cfg.at("policy"));
  eval::check_compatible(policy, p, model);
  std::optional<eval::PolicyHandle> other;
  if (cfg.contains("compare")) {
    other = resolve_policy(c, p, model, cfg.at("compare"));
    eval::check_compatible(*other, p, model);
  }

  DirLock lock(c.out);
  const DemandPaths paths = DemandPaths::generate(model, n_reps, horizon, seed);
  const eval::EvalReport r = eval::evaluate_on(policy, p, model, paths, seed, burn_in);
  write_report(c.out, "policy", r);
  write_json(c.out / "policy.json", eval::to_json(policy));
  json s{{"command", "eval"}, {"config", c.config}, {"policy", eval::summary(r)}};

  if (other) {
    const eval::EvalReport o = eval::evaluate_on(*other, p, model, paths, seed, burn_in);
    write_report(c.out, "compare", o);
    std::ofstream paired(c.out / "paired.csv");
    paired << "realization,policy,compare,difference\n";
    paired.precision(17);
    std::vector<double> diffs(r.costs.size());
    std::size_t wins = 0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      diffs[i] = o.costs[i] - r.costs[i];
      wins += r.costs[i] < o.costs[i];
      paired << i << ',' << r.costs[i] << ',' << o.costs[i] << ',' << diffs[i] << '\n';
    }
    json cmp{{"compare", eval::summary(o)},
             {"win_fraction", static_cast<double>(wins) / static_cast<double>(diffs.size())},
             {"relative_mean_reduction", (o.mean - r.mean) / o.mean}};
    try {
      const auto w = eval::wilcoxon_signed_rank(diffs);
      cmp["wilcoxon"] = json{{"n", w.n}, {"w_plus", w.w_plus}, {"p_value", w.p_value},
                             {"exact", w.exact}, {"alternative", "policy cheaper than compare"}};
    } catch (const eval::EvalError& e) {
      cmp["wilcoxon"] = json{{"error", e.what()}};
    }
    s["comparison"] = cmp;
  }
  if (project || cfg.value("project", false)) {
    eval::SimulationSpan span;
    span.seed = seed;
    span.periods = cfg.value("projection_periods", span.periods);
    std::ofstream out(c.out / "projection.csv");
    eval::write_projection_csv(out, eval::project_policy(policy, p, model, span));
  }
  if (cfg.value("rmse", false)) {
    const DpRun opt = run_dp(p, model, c.section("dp"));
    s["rmse"] = eval::policy_rmse(policy, opt.result.policy, p, model);
  }
  write_json(c.out / "summary.json", s);
  std::cout << "mean cost = " << r.mean << " (se " << r.std_error << ")\n";
  return 0;
}

// ----------------------------------------------------------------- sweep

struct Row {
  std::string name;
  CostParams p;
};

std::vector<Row> table_rows(const std::string& table, const std::vector<int>& lead_times) {
  std::vector<Row> rows;
  auto add = [&](int l_r, double c_e, double h, double b, double f_r, double f_e) {
    CostParams p;
    p.l_r = l_r;
    p.c_e = c_e;
    p.h = h;
    p.b = b;
    p.f_r = f_r;
    p.f_e = f_e;
    std::ostringstream name;
    name << "lr" << l_r << "_ce" << c_e << "_h" << h << "_b" << b;
    if (f_r > 0 || f_e > 0) name << "_fr" << f_r << "_fe" << f_e;
    rows.push_back(Row{name.str(), p});
  };
  for (int l : lead_times) {
    if (table == "table1") {
      for (double c_e : {5.0, 10.0, 20.0})
        for (double b : {95.0, 495.0}) add(l, c_e, 5, b, 0, 0);
    } else if (table == "table2") {
      add(l, 5, 5, 95, 5, 10);
      add(l, 5, 5, 495, 5, 10);
      add(l, 10, 5, 95, 5, 10);
      add(l, 10, 5, 495, 5, 10);
      add(l, 20, 5, 95, 5, 10);
      add(l, 20, 5, 495, 5, 10);
    } else if (table == "low_service") {
      for (double c_e : {5.0, 10.0, 20.0}) add(l, c_e, 15, 85, 0, 0);
    } else {
      throw ConfigError("unknown sweep table '" + table + "'");
    }
  }
  return rows;
}

int cmd_sweep(const Context& c, bool dry_run, bool resume) {
  const json cfg = c.section("sweep");
  allow_keys(cfg, {"table", "l_r", "solvers", "n_reps", "horizon", "train"}, "sweep");
  const auto rows = table_rows(cfg.value("table", std::string("table1")),
                               cfg.value("l_r", std::vector<int>{2}));
  const auto solvers = cfg.value("solvers", std::vector<std::string>{"dp", "cdi"});
  for (const auto& s : solvers)
    if (s != "dp" && s != "cdi" && s != "nnc") throw ConfigError("unknown solver '" + s + "'");
  const DemandModel model = demand_of(c);
  if (dry_run) {
    for (const auto& r : rows) std::cout << r.name << "\n";
    return 0;
  }
  const std::uint64_t seed = c.require_seed();
  const std::size_t n_reps = cfg.value("n_reps", std::size_t{500});
  const std::size_t horizon = cfg.value("horizon", std::size_t{1000});

  DirLock lock(c.out);
  const fs::path results = c.out / "results.jsonl";
  std::set<std::string> done;
  if (resume && fs::exists(results)) {
    std::ifstream in(results);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) done.insert(json::parse(line).at("name").get<std::string>());
  } else {
    std::ofstream(results, std::ios::trunc);
  }
  for (const auto& row : rows) {
    if (done.count(row.name)) {
      std::cout << row.name << ": done, skipped\n";
      continue;
    }
    json rec{{"name", row.name}, {"instance", eval::to_json(row.p)}};
    for (const auto& s : solvers) {
      if (s == "dp") {
        const DpRun r = run_dp(row.p, model, c.section("dp"));
        rec["dp"] = r.result.lambda_star;
      } else if (s == "cdi") {
        heuristics::SearchOptions opts;
        opts.seed = seed;
        const auto best = heuristics::optimize_cdi(row.p, model, opts);
        rec["cdi"] = eval::evaluate(best.policy, row.p, model, n_reps, horizon, seed + 1).mean;
        rec["cdi_policy"] = json(best.policy);
      } else {
        const TrainOutcome t =
            run_training(c, row.p, model, cfg.value("train", json::object()), seed, "", nullptr);
        rec["nnc"] = eval::evaluate(eval::NeuralPolicy{t.result.best_net}, row.p, model, n_reps,
                                    horizon, seed + 1)
                         .mean;
        write_file(c.out / (row.name + "_network.json"), nnc::save(t.result.best_net));
      }
    }
    std::ofstream(results, std::ios::app) << rec.dump() << "\n";
    std::cout << rec.dump() << "\n";
  }
  json all = json::array();
  {
    std::ifstream in(results);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) all.push_back(json::parse(line));
  }
  write_json(c.out / "summary.json", json{{"command", "sweep"}, {"config", c.config}, {"rows", all}});
  return 0;
}

// ---------------------------------------------------------------- ingest

int cmd_ingest(const Context& c, const std::string& input) {
  json cfg = c.section("ingest");
  allow_keys(cfg, {"path", "synthetic_series", "weeks"}, "ingest");
  std::vector<DemandRow> rows;
  std::string source;
  if (!input.empty() || cfg.contains("path")) {
    const fs::path path = !input.empty() ? fs::path(input) : c.resolve(cfg.at("path").get<std::string>());
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read demand file " + path.string());
    rows = read_demand_csv(in);
    source = path.string();
  } else {
    rows = synthetic_lifecycle_demand(cfg.value("synthetic_series", std::size_t{100}),
                                      cfg.value("weeks", std::size_t{115}), c.require_seed());
    source = "synthetic_lifecycle";
  }
  const TruncatedNormalProcess proc = ingest_empirical(rows);
  DirLock lock(c.out);
  if (source == "synthetic_lifecycle") {
    std::ofstream raw(c.out / "demand.csv");
    write_demand_csv(raw, rows);
  }
  std::ofstream m(c.out / "moments.csv");
  m << "period,mu,sigma\n";
  m.precision(17);
  for (std::size_t t = 0; t < proc.horizon(); ++t)
    m << t << ',' << proc.mu[t] << ',' << proc.sigma[t] << '\n';
  write_json(c.out / "demand.json", eval::to_json(DemandModel(proc)));
  write_json(c.out / "summary.json", json{{"command", "ingest"},
                                          {"config", c.config},
                                          {"source", source},
                                          {"periods", proc.horizon()},
                                          {"rows", rows.size()}});
  std::cout << "ingested " << rows.size() << " rows over " << proc.horizon() << " periods\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-sourcing inventory control: exact DP, heuristics and neural controllers"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");

  auto* dp_cmd = app.add_subcommand("dp", "average-cost value iteration");
  auto* train_cmd = app.add_subcommand("train", "train a neural controller");
  std::string warm_start;
  train_cmd->add_option("--warm-start", warm_start, "network.json to start from");
  auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo policy evaluation");
  std::string policy_file, compare_file;
  bool project = false;
  eval_cmd->add_option("--policy", policy_file, "policy JSON file");
  eval_cmd->add_option("--compare", compare_file, "second policy for a paired comparison");
  eval_cmd->add_flag("--project", project, "write the steady-state policy projection");
  auto* sweep_cmd = app.add_subcommand("sweep", "reproduce a table of instances");
  bool dry_run = false, resume = false;
  sweep_cmd->add_flag("--dry-run", dry_run, "list the planned instances only");
  sweep_cmd->add_flag("--resume", resume, "skip rows already in results.jsonl");
  auto* ingest_cmd = app.add_subcommand("ingest", "estimate demand moments from series data");
  std::string input;
  ingest_cmd->add_option("--input", input, "CSV with period,series_id,demand");
  for (auto* sub : {dp_cmd, train_cmd, eval_cmd, sweep_cmd, ingest_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const Context c = load_context(config_path, seed, dry_run ? std::string(".") : out_dir);
    if (*dp_cmd) return cmd_dp(c);
    if (*train_cmd) return cmd_train(c, warm_start);
    if (*eval_cmd) return cmd_eval(c, policy_file, compare_file, project);
    if (*sweep_cmd) return cmd_sweep(c, dry_run, resume);
    if (*ingest_cmd) return cmd_ingest(c, input);
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const nnc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const dp::DpError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    // ConfigError, DemandError, EvalError, NetworkFormatError and I/O errors.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
