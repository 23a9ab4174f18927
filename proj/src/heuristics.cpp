#include "dualsource/heuristics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "dualsource/rng.hpp"

namespace dualsource::heuristics {

namespace {

double level_at(const std::vector<double>& v, std::size_t t) {
  return v[std::min(t, v.size() - 1)];
}

void require_discrete(const DemandModel& model, const char* who) {
  if (!model.is_discrete())
    throw HeuristicError(std::string(who) + ": requires discrete stationary demand");
}

void require_reduced(const CostParams& p, const char* who) {
  p.validate();
  if (p.single_source) throw HeuristicError(std::string(who) + ": requires two suppliers");
  if (p.l_e != 0) throw HeuristicError(std::string(who) + ": requires l_e = 0");
}

// Newsvendor-style level between low and high demand bounds.
double fractile_level(const CostParams& p, double lo, double hi) {
  return (p.h * lo + p.b * hi) / (p.h + p.b);
}

}  // namespace

CdiPolicy CdiPolicy::constant(double S_r, double S_e, double cap) {
  return CdiPolicy{{S_r}, {S_e}, {cap}};
}

void CdiPolicy::validate() const {
  if (S_r.empty() || S_e.empty() || cap.empty())
    throw HeuristicError("CDI policy levels must be non-empty");
  std::size_t n = 1;
  for (const auto* v : {&S_r, &S_e, &cap}) {
    if (v->size() > 1) {
      if (n > 1 && v->size() != n)
        throw HeuristicError("CDI time-varying sequences must share one length");
      n = v->size();
    }
  }
  for (double c : cap)
    if (!(c >= 0.0)) throw HeuristicError("CDI cap must be >= 0");
}

double CdiPolicy::S_r_at(std::size_t t) const { return level_at(S_r, t); }
double CdiPolicy::S_e_at(std::size_t t) const { return level_at(S_e, t); }
double CdiPolicy::cap_at(std::size_t t) const { return level_at(cap, t); }

std::int64_t to_units(double x) {
  if (!(x > 0.0)) return 0;
  if (std::isinf(x)) throw HeuristicError("order quantity is unbounded");
  return std::llround(x);
}

std::int64_t base_stock_order(const InventoryState& s, const BaseStockPolicy& policy) {
  return to_units(static_cast<double>(policy.z) - s.inventory_position());
}

Action si_order(const InventoryState&, const SingleIndexPolicy& policy, double last_demand) {
  const std::int64_t d = to_units(last_demand);
  const std::int64_t q_e = std::max<std::int64_t>(d - policy.delta, 0);
  return Action{std::min(policy.delta, d), q_e};
}

Action di_order(const InventoryState& s, const DualIndexPolicy& policy) {
  // The expedited position counts everything arriving within the expedited
  // lead time; the regular position counts all outstanding orders plus the
  // expedited order just placed.
  const int l_e = static_cast<int>(s.Q_e.size());
  const std::int64_t q_e = to_units(static_cast<double>(policy.z_e) - s.position_through(l_e));
  const std::int64_t q_r =
      to_units(static_cast<double>(policy.z_r()) - s.inventory_position() - static_cast<double>(q_e));
  return Action{q_r, q_e};
}

Action cdi_order(const InventoryState& s, const CdiPolicy& policy, std::size_t t) {
  const std::int64_t q_e = to_units(policy.S_e_at(t) - s.position_through(0));
  const double cap = policy.cap_at(t);
  const double want = policy.S_r_at(t) - s.inventory_position() - static_cast<double>(q_e);
  const std::int64_t q_r = std::isinf(cap) ? to_units(want) : to_units(std::min(want, cap));
  return Action{q_r, q_e};
}

Action tbs_order(const InventoryState& s, const TbsPolicy& policy) {
  return Action{policy.r, to_units(static_cast<double>(policy.z_e) - s.position_through(0))};
}

BaseStockPolicy optimal_base_stock(const CostParams& p, const DemandModel& model) {
  require_discrete(model, "optimal_base_stock");
  return BaseStockPolicy{quantile(model, p.l_r + 1, p.service_level())};
}

std::vector<double> si_target_samples(const CostParams& p, const DemandModel& model,
                                      std::int64_t delta, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double cap = static_cast<double>(delta);
  std::vector<double> out(n);
  for (auto& x : out) {
    double acc = 0.0;
    for (int i = 0; i < p.gap(); ++i) acc += std::min(cap, model.sample(0, rng));
    for (int i = 0; i <= p.l_e; ++i) acc += model.sample(0, rng);
    x = acc;
  }
  return out;
}

Optimized<SingleIndexPolicy> optimize_si(const CostParams& p, const DemandModel& model,
                                         const SearchOptions& opts) {
  p.validate();
  require_discrete(model, "optimize_si");
  if (opts.n_samples < 10'000) throw HeuristicError("optimize_si: n_samples must be >= 10^4");
  const DemandPaths paths = DemandPaths::generate(model, opts.n_reps, opts.horizon, opts.seed);
  Optimized<SingleIndexPolicy> best{{}, std::numeric_limits<double>::infinity()};
  for (std::int64_t delta = 0; delta <= model.max_demand(); ++delta) {
    const auto samples = si_target_samples(p, model, delta, opts.n_samples,
                                           Rng::mix(opts.seed ^ static_cast<std::uint64_t>(delta)));
    const SingleIndexPolicy pol{
        static_cast<std::int64_t>(std::ceil(empirical_quantile(samples, p.service_level()))),
        delta};
    const double cost = mean(simulate_mean_costs(
        [&](const InventoryState& s, std::size_t, double last) { return si_order(s, pol, last); },
        paths, p, InventoryState::zero(p, static_cast<double>(pol.z_r))));
    if (cost < best.cost) best = {pol, cost};
  }
  return best;
}

std::vector<double> di_target_samples(const CostParams& p, const DemandModel& model,
                                      std::int64_t delta, std::size_t n, std::size_t warmup,
                                      std::uint64_t seed) {
  Rng rng(seed);
  const DualIndexPolicy pol{0, delta};
  InventoryState s = InventoryState::zero(p);
  // Demands D_{t-l_e..t}, most recent last.
  std::vector<double> recent(static_cast<std::size_t>(p.l_e) + 1, 0.0);
  std::vector<double> overshoot(static_cast<std::size_t>(p.l_e) + 1, 0.0);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t t = 0; out.size() < n; ++t) {
    const Action a = di_order(s, pol);
    const double O = s.position_through(p.l_e) + static_cast<double>(a.q_e);
    const double d = model.sample(0, rng);
    std::rotate(recent.begin(), recent.begin() + 1, recent.end());
    recent.back() = d;
    std::rotate(overshoot.begin(), overshoot.begin() + 1, overshoot.end());
    overshoot.back() = O;
    advance(s, a, d, p);
    if (t >= warmup + static_cast<std::size_t>(p.l_e)) {
      double sum = 0.0;
      for (double x : recent) sum += x;
      out.push_back(sum - overshoot.front());
    }
  }
  return out;
}

Optimized<DualIndexPolicy> optimize_di(const CostParams& p, const DemandModel& model,
                                       const SearchOptions& opts) {
  p.validate();
  require_discrete(model, "optimize_di");
  if (p.single_source) throw HeuristicError("optimize_di: requires two suppliers");
  if (opts.n_samples < 10'000) throw HeuristicError("optimize_di: n_samples must be >= 10^4");
  const DemandPaths paths = DemandPaths::generate(model, opts.n_reps, opts.horizon, opts.seed);
  Optimized<DualIndexPolicy> best{{}, std::numeric_limits<double>::infinity()};
  const std::int64_t max_delta = (p.gap() + 1) * model.max_demand();
  for (std::int64_t delta = 0; delta <= max_delta; ++delta) {
    const auto samples =
        di_target_samples(p, model, delta, opts.n_samples, opts.di_warmup,
                          Rng::mix(opts.seed ^ static_cast<std::uint64_t>(delta)));
    const DualIndexPolicy pol{
        static_cast<std::int64_t>(std::ceil(empirical_quantile(samples, p.service_level()))),
        delta};
    const double cost = mean(simulate_mean_costs(
        [&](const InventoryState& s, std::size_t, double) { return di_order(s, pol); }, paths, p,
        InventoryState::zero(p, static_cast<double>(pol.z_r()))));
    if (cost < best.cost) best = {pol, cost};
  }
  return best;
}

CdiPolicy cdi_seed(const CostParams& p, const DemandModel& model) {
  require_reduced(p, "cdi_seed");
  require_discrete(model, "cdi_seed");
  const double lo = static_cast<double>(model.min_demand());
  const double hi = static_cast<double>(model.max_demand());
  const double l = p.gap();
  const double single = fractile_level(p, lo, hi);
  return CdiPolicy::constant(fractile_level(p, (l + 1) * lo, (l + 1) * hi), single, single);
}

Optimized<CdiPolicy> optimize_cdi(const CostParams& p, const DemandModel& model,
                                  const SearchOptions& opts) {
  const CdiPolicy seed = cdi_seed(p, model);
  if (opts.n_reps == 0 || opts.horizon == 0) throw HeuristicError("optimize_cdi: empty grid");
  const DemandPaths paths = DemandPaths::generate(model, opts.n_reps, opts.horizon, opts.seed);
  const std::int64_t half = std::max<std::int64_t>(5, model.max_demand());

  using Triple = std::array<std::int64_t, 3>;  // S_r, S_e, cap
  std::map<Triple, double> cost;
  auto evaluate = [&](const Triple& x) {
    auto it = cost.find(x);
    if (it != cost.end()) return it->second;
    const CdiPolicy pol = CdiPolicy::constant(static_cast<double>(x[0]), static_cast<double>(x[1]),
                                              static_cast<double>(x[2]));
    const double c = mean(simulate_mean_costs(
        [&](const InventoryState& s, std::size_t t, double) { return cdi_order(s, pol, t); },
        paths, p, InventoryState::zero(p)));
    cost.emplace(x, c);
    return c;
  };

  Triple centre{std::llround(seed.S_r[0]), std::llround(seed.S_e[0]), std::llround(seed.cap[0])};
  Triple best{};
  for (int round = 0; round < 20; ++round) {
    Triple lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::max<std::int64_t>(0, centre[k] - half);
      hi[k] = centre[k] + half;
    }
    Triple x;
    for (x[0] = lo[0]; x[0] <= hi[0]; ++x[0])
      for (x[1] = lo[1]; x[1] <= hi[1]; ++x[1])
        for (x[2] = lo[2]; x[2] <= hi[2]; ++x[2]) evaluate(x);
    // Global argmin over everything evaluated so far; std::map iterates in
    // lexicographic order so strict < keeps the smallest triple on ties.
    double best_cost = std::numeric_limits<double>::infinity();
    for (const auto& [key, c] : cost)
      if (c < best_cost) best_cost = c, best = key;
    bool on_edge = false;
    for (int k = 0; k < 3; ++k)
      if ((best[k] == lo[k] && lo[k] > 0) || best[k] == hi[k]) on_edge = true;
    if (!on_edge) break;
    centre = best;
  }
  return {CdiPolicy::constant(static_cast<double>(best[0]), static_cast<double>(best[1]),
                              static_cast<double>(best[2])),
          cost.at(best)};
}

CdiPolicy cdi_time_varying_params(const TruncatedNormalProcess& process, const CostParams& p,
                                  CdiVariant variant) {
  require_reduced(p, "cdi_time_varying_params");
  const std::size_t T = process.horizon();
  if (T == 0) throw HeuristicError("cdi_time_varying_params: empty demand process");
  const std::size_t l = static_cast<std::size_t>(p.gap());
  std::vector<double> lo(T + l, 0.0), hi(T + l, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    lo[t] = std::max(0.0, process.mu[t] - 2.58 * process.sigma[t]);
    hi[t] = process.mu[t] + 2.58 * process.sigma[t];
  }
  CdiPolicy out;
  out.S_r.resize(T);
  out.S_e.resize(T);
  out.cap.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double single = fractile_level(p, lo[t], hi[t]);
    out.S_e[t] = single;
    if (variant == CdiVariant::current) {
      out.cap[t] = single;
      out.S_r[t] = static_cast<double>(l) * single;
    } else {
      double sum_lo = 0.0, sum_hi = 0.0;
      for (std::size_t j = 0; j <= l; ++j) sum_lo += lo[t + j], sum_hi += hi[t + j];
      out.S_r[t] = fractile_level(p, sum_lo, sum_hi);
      out.cap[t] = fractile_level(p, lo[t + l], hi[t + l]);
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const BaseStockPolicy& x) { j = {{"z", x.z}}; }
void from_json(const nlohmann::json& j, BaseStockPolicy& x) {
  j.at("z").get_to(x.z);
  if (x.z < 0) throw HeuristicError("base stock level must be >= 0");
}

void to_json(nlohmann::json& j, const SingleIndexPolicy& x) {
  j = {{"z_r", x.z_r}, {"delta", x.delta}};
}
void from_json(const nlohmann::json& j, SingleIndexPolicy& x) {
  j.at("z_r").get_to(x.z_r);
  j.at("delta").get_to(x.delta);
  if (x.z_r < 0 || x.delta < 0) throw HeuristicError("SI levels must be >= 0");
}

void to_json(nlohmann::json& j, const DualIndexPolicy& x) {
  j = {{"z_e", x.z_e}, {"delta", x.delta}};
}
void from_json(const nlohmann::json& j, DualIndexPolicy& x) {
  j.at("z_e").get_to(x.z_e);
  j.at("delta").get_to(x.delta);
  if (x.delta < 0) throw HeuristicError("DI gap must be >= 0");
}

namespace {

// Infinite caps are written as null since JSON has no infinity.
nlohmann::json levels_to_json(const std::vector<double>& v) {
  auto one = [](double x) { return std::isinf(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
  if (v.size() == 1) return one(v[0]);
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) arr.push_back(one(x));
  return arr;
}

std::vector<double> levels_from_json(const nlohmann::json& j) {
  auto one = [](const nlohmann::json& x) {
    return x.is_null() ? std::numeric_limits<double>::infinity() : x.get<double>();
  };
  if (!j.is_array()) return {one(j)};
  std::vector<double> out;
  for (const auto& x : j) out.push_back(one(x));
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const CdiPolicy& x) {
  j = {{"S_r", levels_to_json(x.S_r)},
       {"S_e", levels_to_json(x.S_e)},
       {"cap", levels_to_json(x.cap)}};
}
void from_json(const nlohmann::json& j, CdiPolicy& x) {
  x.S_r = levels_from_json(j.at("S_r"));
  x.S_e = levels_from_json(j.at("S_e"));
  x.cap = j.contains("cap") ? levels_from_json(j.at("cap"))
                            : std::vector<double>{std::numeric_limits<double>::infinity()};
  x.validate();
}

void to_json(nlohmann::json& j, const TbsPolicy& x) { j = {{"r", x.r}, {"z_e", x.z_e}}; }
void from_json(const nlohmann::json& j, TbsPolicy& x) {
  j.at("r").get_to(x.r);
  j.at("z_e").get_to(x.z_e);
  if (x.r < 0) throw HeuristicError("TBS regular order must be >= 0");
}

}  // namespace dualsource::heuristics
