#include "dualsource/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dualsource/normal.hpp"

namespace dualsource::eval {

using nlohmann::json;
namespace h = heuristics;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> state_key(const InventoryState& s) {
  std::vector<double> k;
  k.reserve(1 + s.Q_r.size() + s.Q_e.size());
  k.push_back(s.I);
  for (auto q : s.Q_r) k.push_back(static_cast<double>(q));
  for (auto q : s.Q_e) k.push_back(static_cast<double>(q));
  return k;
}

}  // namespace

std::string kind(const PolicyHandle& policy) {
  return std::visit(overloaded{
                        [](const h::BaseStockPolicy&) { return "base_stock"; },
                        [](const h::SingleIndexPolicy&) { return "si"; },
                        [](const h::DualIndexPolicy&) { return "di"; },
                        [](const h::CdiPolicy&) { return "cdi"; },
                        [](const h::TbsPolicy&) { return "tbs"; },
                        [](const dp::PolicyTable&) { return "table"; },
                        [](const NeuralPolicy&) { return "network"; },
                    },
                    policy);
}

void check_compatible(const PolicyHandle& policy, const CostParams& p, const DemandModel& model) {
  p.validate();
  const bool needs_two = !std::holds_alternative<h::BaseStockPolicy>(policy) &&
                         !std::holds_alternative<NeuralPolicy>(policy);
  if (needs_two && p.single_source)
    throw EvalError(kind(policy) + " policy needs an expedited supplier");
  if (std::holds_alternative<h::BaseStockPolicy>(policy) && !p.single_source)
    throw EvalError("base-stock policy needs a single-supplier instance");
  if (const auto* t = std::get_if<dp::PolicyTable>(&policy)) {
    if (p.l_e != 0 || t->space.l != p.l_r)
      throw EvalError("policy table lead time does not match the instance");
    if (t->actions.size() != t->space.size()) throw EvalError("policy table is incomplete");
  }
  if (const auto* c = std::get_if<h::CdiPolicy>(&policy)) c->validate();
  if (const auto* n = std::get_if<NeuralPolicy>(&policy)) {
    n->net.validate();
    if (n->net.n_inputs() != nnc::input_width(p, n->net.inputs))
      throw EvalError("network input width does not match the instance lead times");
    if (n->net.n_outputs() != (p.single_source ? 1u : 2u))
      throw EvalError("network output width does not match the number of suppliers");
    if (n->net.inputs == nnc::InputMode::reduced_with_moments && !model.is_time_varying())
      throw EvalError("network expects demand moments but the demand model is stationary");
  }
}

double initial_inventory(const PolicyHandle& policy) {
  if (const auto* si = std::get_if<h::SingleIndexPolicy>(&policy))
    return static_cast<double>(si->z_r);
  if (const auto* di = std::get_if<h::DualIndexPolicy>(&policy))
    return static_cast<double>(di->z_r());
  if (const auto* n = std::get_if<NeuralPolicy>(&policy)) return nnc::starting_inventory(n->net);
  return 0.0;
}

Controller::Controller(const PolicyHandle& policy, const CostParams& p, const DemandModel& model)
    : policy_(&policy),
      params_(p),
      moments_(nnc::moments_of(model)),
      stationary_(!model.is_time_varying()) {
  check_compatible(policy, p, model);
}

Action Controller::operator()(const InventoryState& s, std::size_t t, double last_demand) {
  return std::visit(
      overloaded{
          [&](const h::BaseStockPolicy& x) { return Action{h::base_stock_order(s, x), 0}; },
          [&](const h::SingleIndexPolicy& x) { return h::si_order(s, x, last_demand); },
          [&](const h::DualIndexPolicy& x) { return h::di_order(s, x); },
          [&](const h::CdiPolicy& x) { return h::cdi_order(s, x, t); },
          [&](const h::TbsPolicy& x) { return h::tbs_order(s, x); },
          [&](const dp::PolicyTable& x) {
            const CompressedState c = compress(s, params_);
            if (!x.space.contains(c))
              throw EvalError("state " + to_string(c) + " lies outside the policy table");
            return x.at(c);
          },
          [&](const NeuralPolicy& x) {
            const nnc::Moments* m = stationary_ ? nullptr : &moments_;
            if (!stationary_) return nnc::act(x.net, s, t, m);
            auto key = state_key(s);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
            const Action a = nnc::act(x.net, s, t, m);
            cache_.emplace(std::move(key), a);
            return a;
          },
      },
      *policy_);
}

// ------------------------------------------------------------- evaluation

std::vector<std::pair<double, double>> EvalReport::cdf() const {
  std::vector<double> sorted = costs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
  return out;
}

EvalReport evaluate(const PolicyHandle& policy, const CostParams& p, const DemandModel& model,
                    std::size_t n_reps, std::size_t horizon, std::uint64_t seed,
                    std::size_t burn_in) {
  if (n_reps == 0 || horizon == 0) throw EvalError("evaluation needs n_reps, horizon >= 1");
  if (model.is_time_varying() &&
      horizon > std::get<TruncatedNormalProcess>(model.variant()).horizon())
    throw EvalError("evaluation horizon exceeds the demand process length");
  return evaluate_on(policy, p, model, DemandPaths::generate(model, n_reps, horizon, seed), seed,
                     burn_in);
}

EvalReport evaluate_on(const PolicyHandle& policy, const CostParams& p, const DemandModel& model,
                       const DemandPaths& paths, std::uint64_t seed, std::size_t burn_in) {
  check_compatible(policy, p, model);
  EvalReport r;
  r.policy = kind(policy);
  r.n_reps = paths.n_reps();
  r.horizon = paths.horizon();
  r.burn_in = burn_in;
  r.seed = seed;
  r.fingerprint = paths.fingerprint();
  r.instance = json{{"params", to_json(p)}, {"demand", to_json(model)}};

  if (const auto* n = std::get_if<NeuralPolicy>(&policy)) {
    const nnc::Moments m = nnc::moments_of(model);
    r.costs = nnc::evaluate_paths(n->net, p, paths, model.is_time_varying() ? &m : nullptr, burn_in);
  } else {
    Controller c(policy, p, model);
    r.costs = simulate_mean_costs(c, paths, p,
                                  InventoryState::zero(p, initial_inventory(policy)), burn_in);
  }
  for (double c : r.costs)
    if (!std::isfinite(c)) throw EvalError("non-finite realization cost");

  const double n = static_cast<double>(r.costs.size());
  r.mean = mean(r.costs);
  std::vector<double> sorted = r.costs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  r.median = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  if (k > 1) {
    double ss = 0.0;
    for (double c : r.costs) ss += (c - r.mean) * (c - r.mean);
    r.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return r;
}

void write_costs_csv(std::ostream& out, const EvalReport& report) {
  out << "realization,mean_cost\n";
  out.precision(17);
  for (std::size_t i = 0; i < report.costs.size(); ++i) out << i << ',' << report.costs[i] << '\n';
}

void write_cdf_csv(std::ostream& out, const EvalReport& report) {
  out << "cost,cdf\n";
  out.precision(17);
  for (const auto& [c, f] : report.cdf()) out << c << ',' << f << '\n';
}

json summary(const EvalReport& r) {
  return json{{"policy", r.policy},
              {"n_reps", r.n_reps},
              {"horizon", r.horizon},
              {"burn_in", r.burn_in},
              {"seed", r.seed},
              {"demand_fingerprint", r.fingerprint},
              {"mean", r.mean},
              {"median", r.median},
              {"std_error", r.std_error},
              {"instance", r.instance}};
}

// --------------------------------------------------------- policy structure

namespace {

// One long trajectory; `visit` sees the pre-order state, action and period.
template <class Visit>
void long_run(const PolicyHandle& policy, const CostParams& p, const DemandModel& model,
              const SimulationSpan& span, Visit&& visit) {
  if (model.is_time_varying()) throw EvalError("long-run analysis needs stationary demand");
  Controller c(policy, p, model);
  Rng rng(span.seed);
  InventoryState s = InventoryState::zero(p, initial_inventory(policy));
  double last = 0.0;
  for (std::size_t t = 0; t < span.burn_in + span.periods; ++t) {
    const Action a = c(s, t, last);
    if (t >= span.burn_in) visit(s, a);
    last = model.sample(t, rng);
    advance(s, a, last, p);
  }
}

}  // namespace

std::map<CompressedState, VisitStats> visited_compressed_states(const PolicyHandle& policy,
                                                                const CostParams& p,
                                                                const DemandModel& model,
                                                                const SimulationSpan& span) {
  std::map<CompressedState, VisitStats> out;
  long_run(policy, p, model, span, [&](const InventoryState& s, Action a) {
    VisitStats& v = out[compress(s, p)];
    ++v.visits;
    v.q_r_sum += static_cast<double>(a.q_r);
    v.q_e_sum += static_cast<double>(a.q_e);
  });
  return out;
}

double policy_rmse(const PolicyHandle& candidate, const dp::PolicyTable& optimal,
                   const CostParams& p, const DemandModel& model, const SimulationSpan& span) {
  const auto recurrent = dp::recurrent_states(optimal, p, model);
  if (recurrent.empty()) throw EvalError("optimal policy has no recurrent states");
  const bool projected = std::holds_alternative<h::SingleIndexPolicy>(candidate) ||
                         std::holds_alternative<NeuralPolicy>(candidate);
  std::map<CompressedState, VisitStats> visits;
  if (projected) visits = visited_compressed_states(candidate, p, model, span);
  Controller direct(candidate, p, model);

  double ss = 0.0;
  for (std::size_t idx : recurrent) {
    const CompressedState s = optimal.space.state(idx);
    const Action best = optimal.actions[idx];
    double q_r, q_e;
    auto it = visits.find(s);
    if (projected && it != visits.end()) {
      q_r = it->second.q_r();
      q_e = it->second.q_e();
    } else {
      const Action a = direct(expand(s, p), 0, 0.0);
      q_r = static_cast<double>(a.q_r);
      q_e = static_cast<double>(a.q_e);
    }
    ss += std::pow(static_cast<double>(best.q_r) - q_r, 2) +
          std::pow(static_cast<double>(best.q_e) - q_e, 2);
  }
  return std::sqrt(ss / static_cast<double>(recurrent.size()));
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs) {
    if (!std::isfinite(x)) throw EvalError("non-finite difference");
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) throw EvalError("all differences are zero");
  if (d.size() < 5) throw EvalError("signed-rank test needs at least 5 non-zero differences");

  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  // Doubled midranks keep the exact distribution on integers.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long r2 = static_cast<long>(i + 1 + j + 1);  // 2 * midrank
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  WilcoxonResult r;
  r.n = n;
  long w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w2 += rank2[i];
  r.w_plus = 0.5 * static_cast<double>(w2);

  if (n <= 20) {
    // Count sign patterns by the doubled rank sum they produce.
    const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    for (long r2 : rank2)
      for (long s = total; s >= r2; --s) ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r2)];
    double tail = 0.0;
    for (long s = w2; s <= total; ++s) tail += ways[static_cast<std::size_t>(s)];
    r.p_value = tail / std::ldexp(1.0, static_cast<int>(n));
    r.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (r.w_plus - mu - 0.5) / std::sqrt(var);
    r.p_value = normal::ccdf(z);
  }
  return r;
}

std::vector<ProjectionRow> project_policy(const PolicyHandle& policy, const CostParams& p,
                                          const DemandModel& model, const SimulationSpan& span) {
  std::map<std::pair<double, double>, VisitStats> cells;
  long_run(policy, p, model, span, [&](const InventoryState& s, Action a) {
    VisitStats& v = cells[{s.position_through(0), s.position_through(p.l_r - 1)}];
    ++v.visits;
    v.q_r_sum += static_cast<double>(a.q_r);
    v.q_e_sum += static_cast<double>(a.q_e);
  });
  std::vector<ProjectionRow> rows;
  for (const auto& [key, v] : cells)
    rows.push_back(ProjectionRow{key.first, key.second, v.q_r(), v.q_e(),
                                 static_cast<double>(v.visits) / static_cast<double>(span.periods)});
  return rows;
}

void write_projection_csv(std::ostream& out, const std::vector<ProjectionRow>& rows) {
  out << "position_now,inventory_position,q_r,q_e,frequency\n";
  out.precision(12);
  for (const auto& r : rows)
    out << r.position_now << ',' << r.inventory_position << ',' << r.q_r << ',' << r.q_e << ','
        << r.frequency << '\n';
}

// ------------------------------------------------------------------- JSON

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw EvalError(std::string(what) + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw EvalError(std::string("unknown key '") + key + "' in " + what);
}

}  // namespace

json to_json(const CostParams& p) {
  return json{{"h", p.h},     {"b", p.b},     {"c_r", p.c_r}, {"c_e", p.c_e},
              {"f_r", p.f_r}, {"f_e", p.f_e}, {"l_r", p.l_r}, {"l_e", p.l_e},
              {"single_source", p.single_source}};
}

CostParams cost_params_from_json(const json& j) {
  reject_unknown(j, {"h", "b", "c_r", "c_e", "f_r", "f_e", "l_r", "l_e", "single_source"},
                 "instance");
  CostParams p;
  p.h = j.value("h", p.h);
  p.b = j.value("b", p.b);
  p.c_r = j.value("c_r", p.c_r);
  p.c_e = j.value("c_e", p.c_e);
  p.f_r = j.value("f_r", p.f_r);
  p.f_e = j.value("f_e", p.f_e);
  p.l_r = j.value("l_r", p.l_r);
  p.l_e = j.value("l_e", p.l_e);
  p.single_source = j.value("single_source", p.single_source);
  p.validate();
  return p;
}

json to_json(const DemandModel& model) {
  return std::visit(
      overloaded{
          [](const DiscreteUniform& u) { return json{{"type", "uniform"}, {"lo", u.lo}, {"hi", u.hi}}; },
          [](const Empirical& e) {
            json pmf = json::array();
            for (const auto& [v, q] : e.pmf) pmf.push_back({v, q});
            return json{{"type", "discrete"}, {"pmf", pmf}};
          },
          [](const TruncatedNormalProcess& t) {
            return json{{"type", "truncated_normal"}, {"mu", t.mu}, {"sigma", t.sigma},
                        {"lo", t.trunc_lo}, {"hi", t.trunc_hi}};
          },
      },
      model.variant());
}

DemandModel demand_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "uniform") {
    reject_unknown(j, {"type", "lo", "hi"}, "demand");
    return DemandModel(DiscreteUniform{j.at("lo").get<std::int64_t>(), j.at("hi").get<std::int64_t>()});
  }
  if (type == "discrete") {
    reject_unknown(j, {"type", "pmf"}, "demand");
    Empirical e;
    for (const auto& row : j.at("pmf"))
      e.pmf.emplace_back(row.at(0).get<std::int64_t>(), row.at(1).get<double>());
    return DemandModel(std::move(e));
  }
  if (type == "truncated_normal") {
    reject_unknown(j, {"type", "mu", "sigma", "lo", "hi"}, "demand");
    TruncatedNormalProcess t;
    t.mu = j.at("mu").get<std::vector<double>>();
    t.sigma = j.at("sigma").get<std::vector<double>>();
    t.trunc_lo = j.value("lo", t.trunc_lo);
    t.trunc_hi = j.value("hi", t.trunc_hi);
    return DemandModel(std::move(t));
  }
  throw EvalError("unknown demand type '" + type + "'");
}

json to_json(const PolicyHandle& policy) {
  json j = std::visit(
      overloaded{
          [](const h::BaseStockPolicy& x) { return json(x); },
          [](const h::SingleIndexPolicy& x) { return json(x); },
          [](const h::DualIndexPolicy& x) { return json(x); },
          [](const h::CdiPolicy& x) { return json(x); },
          [](const h::TbsPolicy& x) { return json(x); },
          [](const dp::PolicyTable& x) {
            json actions = json::array();
            for (const auto& a : x.actions) actions.push_back({a.q_r, a.q_e});
            return json{{"l", x.space.l},         {"lo", x.space.lo},
                        {"hi", x.space.hi},       {"q_max", x.space.q_max},
                        {"actions", actions}};
          },
          [](const NeuralPolicy& x) { return json{{"network", json::parse(nnc::save(x.net))}}; },
      },
      policy);
  j["type"] = kind(policy);
  return j;
}

PolicyHandle policy_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  json body = j;
  body.erase("type");
  if (type == "base_stock") {
    reject_unknown(body, {"z"}, "base_stock policy");
    return body.get<h::BaseStockPolicy>();
  }
  if (type == "si") {
    reject_unknown(body, {"z_r", "delta"}, "si policy");
    return body.get<h::SingleIndexPolicy>();
  }
  if (type == "di") {
    reject_unknown(body, {"z_e", "delta"}, "di policy");
    return body.get<h::DualIndexPolicy>();
  }
  if (type == "cdi") {
    reject_unknown(body, {"S_r", "S_e", "cap"}, "cdi policy");
    return body.get<h::CdiPolicy>();
  }
  if (type == "tbs") {
    reject_unknown(body, {"r", "z_e"}, "tbs policy");
    return body.get<h::TbsPolicy>();
  }
  if (type == "table") {
    reject_unknown(body, {"l", "lo", "hi", "q_max", "actions"}, "table policy");
    dp::PolicyTable t;
    t.space.l = body.at("l").get<int>();
    t.space.lo = body.at("lo").get<std::int64_t>();
    t.space.hi = body.at("hi").get<std::int64_t>();
    t.space.q_max = body.at("q_max").get<std::int64_t>();
    t.space.validate();
    for (const auto& a : body.at("actions"))
      t.actions.push_back(Action{a.at(0).get<std::int64_t>(), a.at(1).get<std::int64_t>()});
    if (t.actions.size() != t.space.size()) throw EvalError("table policy is incomplete");
    return t;
  }
  if (type == "network") {
    reject_unknown(body, {"network"}, "network policy");
    return NeuralPolicy{nnc::load(body.at("network").dump())};
  }
  throw EvalError("unknown policy type '" + type + "'");
}

}  // namespace dualsource::eval
