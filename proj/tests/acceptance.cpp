// Acceptance suite: one PASS/FAIL line per criterion. Criteria can be
// selected by number on the command line; the default runs all of them.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualsource/dp.hpp"
#include "dualsource/eval.hpp"
#include "dualsource/heuristics.hpp"
#include "dualsource/nnc.hpp"
#include "dualsource/tape.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dualsource;
using nlohmann::json;
using nnc::Matrix;

namespace {

const DemandModel kUniform(DiscreteUniform{0, 4});

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

CostParams instance(int l_r, double c_e, double b, double h = 5, double f_r = 0, double f_e = 0) {
  CostParams p;
  p.l_r = l_r;
  p.c_e = c_e;
  p.b = b;
  p.h = h;
  p.f_r = f_r;
  p.f_e = f_e;
  return p;
}

struct Row {
  CostParams p;
  double reference;
};

Verdict dp_rows(const std::vector<Row>& rows, double budget_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string values;
  for (const auto& r : rows) {
    const double got = dp::value_iteration(r.p, kUniform, dp::StateSpace::defaults(r.p, kUniform)).lambda_star;
    worst = std::max(worst, std::abs(got - r.reference));
    values += fmt(" %.3f", got);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 0.02 && secs <= budget_seconds,
          fmt("%zu rows, max |err| %.4f (tol 0.02), %.1f s;", rows.size(), worst, secs) + values};
}

// ---------------------------------------------------------------- shared runs

struct DualNet {
  nnc::Network net;
  double cpu = 0.0;
  std::size_t epochs = 0;
};

// Desk-scale protocol: M = 256, T = 100, eta = 3e-3, 3000 epochs, seed 1.
DualNet train_dual(const CostParams& p) {
  nnc::Network net = nnc::Network::dual_sourcing_default(p);
  Rng rng(1);
  nnc::init_weights(net, rng);
  nnc::TrainingConfig cfg;
  cfg.M = 256;
  cfg.T = 100;
  cfg.max_epochs = 3000;
  cfg.seed = 1;
  const double c0 = cpu_seconds();
  auto r = nnc::train(p, kUniform, std::move(net), cfg);
  return {std::move(r.best_net), cpu_seconds() - c0, r.history.size()};
}

struct Shared {
  std::optional<DualNet> net_20_495;
  std::optional<heuristics::CdiPolicy> cdi_20_495;

  const DualNet& dual() {
    if (!net_20_495) net_20_495 = train_dual(instance(2, 20, 495));
    return *net_20_495;
  }
  const heuristics::CdiPolicy& cdi() {
    if (!cdi_20_495) cdi_20_495 = heuristics::optimize_cdi(instance(2, 20, 495), kUniform, {}).policy;
    return *cdi_20_495;
  }
};

// ------------------------------------------------------------------ criteria

Verdict c1() {
  std::vector<Row> rows;
  const double reference[2][6] = {{16.77, 16.77, 19.73, 19.74, 22.83, 23.07},
                                   {16.88, 16.88, 20.34, 20.34, 24.30, 24.34}};
  for (int l : {2, 3}) {
    int i = 0;
    for (double c_e : {5.0, 10.0, 20.0})
      for (double b : {95.0, 495.0}) rows.push_back({instance(l, c_e, b), reference[l - 2][i++]});
  }
  return dp_rows(rows, 1800.0);
}

Verdict c2() {
  std::vector<Row> rows;
  const double reference[6] = {23.61, 23.61, 25.63, 25.90, 26.95, 28.08};
  int i = 0;
  for (double c_e : {5.0, 10.0, 20.0})
    for (double b : {95.0, 495.0}) rows.push_back({instance(2, c_e, b, 5, 5, 10), reference[i++]});
  return dp_rows(rows, 1800.0);
}

Verdict c3() {
  return dp_rows({{instance(2, 5, 85, 15), 39.45},
                  {instance(2, 10, 85, 15), 43.98},
                  {instance(2, 20, 85, 15), 49.33}},
                 1800.0);
}

Verdict c4(Shared& shared) {
  const double reference[6] = {16.87, 16.86, 19.81, 19.81, 23.01, 23.26};
  double worst = 0.0;
  std::string values;
  int i = 0;
  for (double c_e : {5.0, 10.0, 20.0})
    for (double b : {95.0, 495.0}) {
      const CostParams p = instance(2, c_e, b);
      const auto policy = (c_e == 20 && b == 495) ? shared.cdi()
                                                  : heuristics::optimize_cdi(p, kUniform, {}).policy;
      const double got = eval::evaluate(policy, p, kUniform, 500, 1000, 777).mean;
      worst = std::max(worst, std::abs(got - reference[i]) / reference[i]);
      values += fmt(" %.3f", got);
      ++i;
    }
  return {worst <= 0.005, fmt("max rel err %.4f (tol 0.005);", worst) + values};
}

Verdict c5() {
  const CostParams p = CostParams::single(5, 495, 0);
  nnc::Network net = nnc::Network::single_sourcing_minimal();
  Rng rng(1);
  nnc::init_weights(net, rng);
  nnc::TrainingConfig cfg;
  cfg.M = 128;
  cfg.T = 50;
  cfg.max_epochs = 5000;
  cfg.seed = 1;
  const auto r = nnc::train(p, kUniform, std::move(net), cfg);
  const double cost = eval::evaluate(eval::NeuralPolicy{r.best_net}, p, kUniform, 500, 1000, 777).mean;

  // States the trained controller keeps visiting.
  std::set<double> visited;
  Rng demand(99);
  InventoryState s = InventoryState::zero(p, nnc::starting_inventory(r.best_net));
  for (int t = 0; t < 100000; ++t) {
    if (t >= 100) visited.insert(s.I);
    const Action a = nnc::act(r.best_net, s, 0, nullptr);
    advance(s, a, static_cast<double>(demand.uniform_int(0, 4)), p);
  }
  bool base_stock = !visited.empty();
  std::string acts;
  for (double I : visited) {
    const Action a = nnc::act(r.best_net, InventoryState{I, {}, {}}, 0, nullptr);
    base_stock = base_stock && a.q_r == static_cast<std::int64_t>(std::max(0.0, 4.0 - I));
    acts += fmt(" %g->%lld", I, static_cast<long long>(a.q_r));
  }
  const bool close = std::abs(cost - 10.0) <= 0.02 * 10.0;
  return {close && base_stock, fmt("cost %.4f (10 +- 2%%), best epoch %zu; orders", cost, r.best_epoch) + acts};
}

Verdict c6(Shared& shared) {
  const DualNet& d = shared.dual();
  const CostParams p = instance(2, 20, 495);
  const double cost = eval::evaluate(eval::NeuralPolicy{d.net}, p, kUniform, 500, 1000, 777).mean;
  return {cost <= 23.30 && d.cpu <= 1800.0 && d.epochs <= 5000,
          fmt("cost %.3f (<= 23.30), %zu epochs, %.0f s CPU (<= 1800)", cost, d.epochs, d.cpu)};
}

Verdict c7(Shared& shared) {
  const CostParams p = instance(2, 20, 495);
  const auto vi = dp::value_iteration(p, kUniform, dp::StateSpace::defaults(p, kUniform));
  const double nnc_rmse = eval::policy_rmse(eval::NeuralPolicy{shared.dual().net}, vi.policy, p, kUniform);
  const double cdi_rmse = eval::policy_rmse(shared.cdi(), vi.policy, p, kUniform);
  return {nnc_rmse <= 0.7 && std::abs(cdi_rmse - 0.46) <= 0.1,
          fmt("NNC %.3f (<= 0.7), CDI %.3f (0.46 +- 0.1)", nnc_rmse, cdi_rmse)};
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
  return m;
}

double tape_check(std::vector<Matrix> params,
                  const std::function<nnc::Var(nnc::Tape&, const std::vector<nnc::Var>&)>& build) {
  std::vector<Matrix> grads;
  for (const auto& m : params) grads.push_back(Matrix::Zero(m.rows(), m.cols()));
  auto run = [&](bool with_grad) {
    nnc::Tape tape;
    std::vector<nnc::Var> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.parameter(&params[i], &grads[i]));
    const nnc::Var out = build(tape, vars);
    if (with_grad) tape.backward(out);
    return tape.scalar(out);
  };
  run(true);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (Eigen::Index k = 0; k < params[i].size(); ++k) {
      double& x = params[i].data()[k];
      const double keep = x;
      x = keep + h;
      const double up = run(false);
      x = keep - h;
      const double down = run(false);
      x = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(grads[i].data()[k] - fd) / std::max(1.0, std::abs(fd)));
    }
  return worst;
}

Verdict c8() {
  using nnc::Tape;
  Rng rng(5);
  const Matrix x = random_matrix(4, 3, rng), W = random_matrix(2, 3, rng), b = random_matrix(1, 2, rng);
  const Matrix y = random_matrix(4, 2, rng);
  Matrix off_kink(2, 3);
  off_kink << -0.8, 0.3, 1.1, 0.05, -0.2, 2.0;
  double ops = 0.0;
  ops = std::max(ops, tape_check({x, W, b}, [](Tape& t, const auto& v) {
                   return t.sum(t.celu(t.affine(v[0], v[1], v[2]), 0.7));
                 }));
  ops = std::max(ops, tape_check({x, W}, [](Tape& t, const auto& v) {
                   return t.mean(t.celu(t.affine(v[0], v[1]), 1.3));
                 }));
  ops = std::max(ops, tape_check({y, y}, [](Tape& t, const auto& v) {
                   return t.sum(t.sub(t.add(v[0], t.scale(v[1], 2.5)), t.scale(v[0], 0.5)));
                 }));
  ops = std::max(ops, tape_check({y}, [](Tape& t, const auto& v) {
                   const auto a = t.column(v[0], 1);
                   return t.sum(t.celu(t.concat_cols({a, t.scale(a, 3.0), t.column(v[0], 0)}), 1.0));
                 }));
  ops = std::max(ops, tape_check({Matrix::Constant(1, 1, 0.4), y}, [](Tape& t, const auto& v) {
                   return t.mean(t.celu(t.add(t.broadcast(v[0], 4), t.column(v[1], 0)), 1.0));
                 }));
  ops = std::max(ops, tape_check({off_kink}, [](Tape& t, const auto& v) { return t.sum(t.relu(v[0])); }));

  // Fractional decoupling backpropagates exactly the positive-part gradient.
  Matrix pre(1, 5);
  pre << -1.5, -0.2, 0.2, 2.7, 3.0;
  Matrix g_frac = Matrix::Zero(1, 5), g_relu = Matrix::Zero(1, 5);
  {
    Tape t;
    t.backward(t.sum(t.scale(t.frac_decouple(t.parameter(&pre, &g_frac)), 3.0)));
    Tape r;
    r.backward(r.sum(r.scale(r.relu(r.parameter(&pre, &g_relu)), 3.0)));
  }
  const bool decouple = g_frac == g_relu;

  // Full loss on a 2-2-2 controller (l_r = 1), T = 3, M = 2, fixed demand.
  CostParams p;
  p.l_r = 1;
  nnc::Network net = nnc::Network::make(2, {2}, 2);
  Rng init(8);
  nnc::init_weights(net, init);
  net.layers.back().b.setConstant(1.5);
  net.init_inventory = 2.3;
  Matrix demand(2, 3);
  demand << 1, 4, 2, 3, 0, 2;
  auto g = nnc::NetworkGradient::zeros_like(net);
  nnc::loss_and_gradient(net, p, demand, nullptr, 1.0, true, &g);
  double full = 0.0;
  const double h = 1e-6;
  auto probe = [&](double& w, double analytic) {
    const double keep = w;
    w = keep + h;
    const double up = nnc::loss_and_gradient(net, p, demand, nullptr, 1.0, true, nullptr);
    w = keep - h;
    const double down = nnc::loss_and_gradient(net, p, demand, nullptr, 1.0, true, nullptr);
    w = keep;
    const double fd = (up - down) / (2 * h);
    full = std::max(full, std::abs(analytic - fd) / std::max(1.0, std::abs(fd)));
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (Eigen::Index k = 0; k < net.layers[i].W.size(); ++k) probe(net.layers[i].W.data()[k], g.dW[i].data()[k]);
    for (Eigen::Index k = 0; k < net.layers[i].b.size(); ++k) probe(net.layers[i].b.data()[k], g.db[i].data()[k]);
  }
  return {ops < 1e-5 && decouple && full < 1e-5,
          fmt("ops max rel err %.2e, decouple %s, 2-2-2 loss max rel err %.2e (tol 1e-5)", ops,
              decouple ? "exact" : "MISMATCH", full)};
}

Verdict c9() {
  // (a) compressed and full dynamics under random orders and demands
  bool same = true;
  for (int l_r : {2, 3}) {
    CostParams p = instance(l_r, 10, 95);
    Rng rng(2024 + static_cast<std::uint64_t>(l_r));
    InventoryState full = InventoryState::zero(p);
    CompressedState comp = compress(full, p);
    for (int i = 0; i < 10000; ++i) {
      const Action a{rng.uniform_int(0, 4), rng.uniform_int(0, 4)};
      const double d = static_cast<double>(rng.uniform_int(0, 4));
      const auto f = step(full, a, d, p);
      const auto c = compressed_step(comp, a, d, p);
      same = same && c.cost == f.cost && c.next == compress(f.next, p);
      full = f.next;
      comp = c.next;
    }
  }

  // (b) simulated optimal-table cost against the stationary solution
  const CostParams p = instance(2, 10, 95);
  const auto vi = dp::value_iteration(p, kUniform, dp::StateSpace::defaults(p, kUniform));
  const double exact = dp::policy_long_run_cost(vi.policy, p, kUniform).cost;
  const auto sim = eval::evaluate(vi.policy, p, kUniform, 200, 1000, 9, 100);
  const double z = std::abs(sim.mean - exact) / sim.std_error;

  // (c) recurrent-state counts
  const std::size_t dp_count = dp::recurrent_states(vi.policy, p, kUniform).size();
  const DualNet trained = train_dual(p);
  const std::size_t nnc_count =
      eval::visited_compressed_states(eval::NeuralPolicy{trained.net}, p, kUniform, {}).size();

  return {same && z <= 3.0 && dp_count == 17 && nnc_count == 25,
          fmt("(a) %s over 2x10^4 steps; (b) |sim - exact| = %.2f SE; (c) DP %zu (17), NNC %zu (25)",
              same ? "identical" : "DIFFER", z, dp_count, nnc_count)};
}

struct EmpiricalOutcome {
  double wins = 0.0, reduction = 0.0, p_value = 1.0;
};

// Five restarts from derived seeds; the restart with the lowest mean cost on
// 200 validation realizations is tested on 1000 held-out realizations.
EmpiricalOutcome empirical_run(double b) {
  const CostParams p = instance(2, 20, b);
  const auto proc = ingest_empirical(synthetic_lifecycle_demand(100, 115, 1));
  const DemandModel model(proc);
  double peak = 1.0;
  for (double m : proc.mu) peak = std::max(peak, m);

  double best_val = std::numeric_limits<double>::infinity();
  nnc::Network best;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const std::uint64_t seed = Rng::mix(1 + k);
    nnc::Network net = nnc::Network::empirical_default(p);
    Rng rng(seed);
    nnc::init_weights(net, rng);
    net.scale = peak;
    nnc::EmpiricalTrainingConfig cfg;
    cfg.one_shot.T = cfg.fine_tune.T = proc.horizon();
    cfg.one_shot.M = 1;
    cfg.one_shot.max_epochs = 2000;
    cfg.one_shot.seed = seed;
    cfg.fine_tune.M = 4;
    cfg.fine_tune.max_epochs = 1000;
    cfg.fine_tune.seed = Rng::mix(seed + 1);
    auto r = nnc::train_empirical(proc, p, std::move(net), cfg);
    const double val = eval::evaluate(eval::NeuralPolicy{r.best_net}, p, model, 200, proc.horizon(), 9001).mean;
    if (val < best_val) {
      best_val = val;
      best = std::move(r.best_net);
    }
  }
  const auto cdi = heuristics::cdi_time_varying_params(proc, p, heuristics::CdiVariant::current);
  const auto nn = eval::evaluate(eval::NeuralPolicy{best}, p, model, 1000, proc.horizon(), 4242);
  const auto base = eval::evaluate(cdi, p, model, 1000, proc.horizon(), 4242);
  std::vector<double> diffs;
  std::size_t wins = 0;
  for (std::size_t i = 0; i < nn.costs.size(); ++i) {
    diffs.push_back(base.costs[i] - nn.costs[i]);
    wins += nn.costs[i] < base.costs[i];
  }
  return {static_cast<double>(wins) / static_cast<double>(nn.costs.size()),
          (base.mean - nn.mean) / base.mean, eval::wilcoxon_signed_rank(diffs).p_value};
}

Verdict c10() {
  const auto high = empirical_run(495);
  const auto low = empirical_run(95);
  return {high.wins > 0.55 && low.reduction >= 0.10 && high.p_value < 1e-3 && low.p_value < 1e-3,
          fmt("b=495: wins %.3f (> 0.55), p %.1e; b=95: reduction %.3f (>= 0.10), p %.1e", high.wins,
              high.p_value, low.reduction, low.p_value)};
}

// ------------------------------------------------------------ determinism

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DUALSOURCE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every output file must match byte for byte; summaries may differ only in
// the output directory they record.
bool same_outputs(const fs::path& a, const fs::path& b) {
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename().string());
  if (names_a != names_b || names_a.empty()) return false;
  for (const auto& n : names_a) {
    if (n == "summary.json") {
      json x = json::parse(slurp(a / n)), y = json::parse(slurp(b / n));
      x["config"].erase("out");
      y["config"].erase("out");
      if (x != y) return false;
    } else if (slurp(a / n) != slurp(b / n)) {
      return false;
    }
  }
  return true;
}

Verdict c11() {
  const fs::path dir = fs::temp_directory_path() / ("dualsource_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const json row = {{"l_r", 2}, {"c_e", 20}, {"h", 5}, {"b", 495}};
  auto write = [&](const std::string& name, const json& j) {
    std::ofstream(dir / name) << j.dump(2);
    return (dir / name).string();
  };
  const std::string dp_cfg = write("dp.json", {{"schema_version", 1}, {"instance", row}});
  const std::string train_cfg = write(
      "train.json", {{"schema_version", 1},
                     {"instance", row},
                     {"train", {{"M", 32}, {"T", 50}, {"max_epochs", 40}, {"eval", {{"n_reps", 20}, {"horizon", 200}}}}}});
  const std::string emp_cfg = write(
      "emp.json", {{"schema_version", 1},
                   {"instance", row},
                   {"demand", {{"type", "synthetic_lifecycle"}, {"series", 20}, {"seed", 1}}},
                   {"train", {{"architecture", "empirical"}, {"one_shot_epochs", 30}, {"fine_tune_epochs", 10}}}});
  const std::string eval_cfg = write(
      "eval.json", {{"schema_version", 1}, {"instance", row}, {"eval", {{"n_reps", 50}, {"horizon", 500}}}});
  const std::string cdi = write("cdi.json", {{"type", "cdi_optimized"}, {"n_reps", 20}, {"horizon", 200}});
  const std::string sweep_cfg = write(
      "sweep.json", {{"schema_version", 1},
                     {"sweep", {{"table", "low_service"}, {"solvers", {"dp", "cdi"}}, {"n_reps", 20}, {"horizon", 200}}}});

  const std::vector<std::pair<std::string, std::string>> runs = {
      {"dp", "--config " + dp_cfg + " dp"},
      {"train", "--config " + train_cfg + " --seed 3 train"},
      {"train_empirical", "--config " + emp_cfg + " --seed 3 train"},
      {"eval", "--config " + eval_cfg + " --seed 3 eval --policy " + cdi + " --project"},
      {"sweep", "--config " + sweep_cfg + " --seed 3 sweep"},
  };
  std::string failed;
  for (const auto& [name, args] : runs) {
    const fs::path a = dir / (name + "_a"), b = dir / (name + "_b");
    const bool ok = run_cli("--out " + a.string() + " " + args) == 0 &&
                    run_cli("--out " + b.string() + " " + args) == 0 && same_outputs(a, b);
    if (!ok) failed += " " + name;
  }
  fs::remove_all(dir);
  return {failed.empty(), failed.empty() ? std::string("dp, train, train_empirical, eval, sweep outputs bit-identical")
                                         : "differs or failed:" + failed};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-11"};
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}
                                              : std::set<int>(only.begin(), only.end());

  Shared shared;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"DP Table 1 (l_r 2, 3)", c1},
      {"DP fixed order costs", c2},
      {"DP low service level", c3},
      {"CDI optimize + evaluate", [&] { return c4(shared); }},
      {"NNC single sourcing", c5},
      {"NNC dual sourcing", [&] { return c6(shared); }},
      {"policy RMSE", [&] { return c7(shared); }},
      {"straight-through gradients", c8},
      {"oracle equivalences", c9},
      {"empirical demand vs CDI", c10},
      {"determinism", c11},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
