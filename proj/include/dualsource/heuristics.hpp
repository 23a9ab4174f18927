#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dualsource/demand.hpp"
#include "dualsource/dynamics.hpp"
#include "dualsource/simulate.hpp"
#include "json.hpp"

namespace dualsource::heuristics {

class HeuristicError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Order-up-to on the inventory position (single supplier).
struct BaseStockPolicy {
  std::int64_t z = 0;
};

/// Regular target z_r; the expedited target sits delta below it.
struct SingleIndexPolicy {
  std::int64_t z_r = 0;
  std::int64_t delta = 0;
};

/// Expedited target z_e; the regular target is z_e + delta.
struct DualIndexPolicy {
  std::int64_t z_e = 0;
  std::int64_t delta = 0;

  std::int64_t z_r() const { return z_e + delta; }
};

/// Capped dual index. Each field is either a single constant or one value per
/// period; periods past the end reuse the last entry. cap may be +inf.
struct CdiPolicy {
  std::vector<double> S_r;
  std::vector<double> S_e;
  std::vector<double> cap;

  static CdiPolicy constant(double S_r, double S_e,
                            double cap = std::numeric_limits<double>::infinity());
  void validate() const;
  bool time_varying() const { return S_r.size() > 1 || S_e.size() > 1 || cap.size() > 1; }
  double S_r_at(std::size_t t) const;
  double S_e_at(std::size_t t) const;
  double cap_at(std::size_t t) const;
};

/// Tailored base-surge: a constant regular order r plus an expedited
/// order-up-to z_e on the net inventory including this period's arrivals.
struct TbsPolicy {
  std::int64_t r = 0;
  std::int64_t z_e = 0;
};

/// Rounds a non-negative real order to whole units; negative values give 0.
std::int64_t to_units(double x);

std::int64_t base_stock_order(const InventoryState& s, const BaseStockPolicy& policy);
Action si_order(const InventoryState& s, const SingleIndexPolicy& policy, double last_demand);
Action di_order(const InventoryState& s, const DualIndexPolicy& policy);
Action cdi_order(const InventoryState& s, const CdiPolicy& policy, std::size_t t);
Action tbs_order(const InventoryState& s, const TbsPolicy& policy);

/// Settings shared by the simulation-based optimizers.
struct SearchOptions {
  std::size_t n_reps = 100;
  std::size_t horizon = 500;
  std::uint64_t seed = 1;
  std::size_t n_samples = 100'000;  ///< draws for the SI/DI quantile estimates
  std::size_t di_warmup = 200;      ///< DI overshoot periods discarded before sampling
};

/// Result of a parameter search with the winning simulated cost per period.
template <class Policy>
struct Optimized {
  Policy policy;
  double cost = 0.0;
};

/// z* = F^{-1}_{(l+1)-fold demand}(b / (b + h)) for a single supplier with
/// lead time l.
BaseStockPolicy optimal_base_stock(const CostParams& p, const DemandModel& model);

Optimized<SingleIndexPolicy> optimize_si(const CostParams& p, const DemandModel& model,
                                         const SearchOptions& opts = {});

/// Samples of the SI regular-target demand d1(delta); used by optimize_si.
std::vector<double> si_target_samples(const CostParams& p, const DemandModel& model,
                                      std::int64_t delta, std::size_t n, std::uint64_t seed);

Optimized<DualIndexPolicy> optimize_di(const CostParams& p, const DemandModel& model,
                                       const SearchOptions& opts = {});

/// Samples of D_t - O_t for the given gap, with overshoot O_t taken from a
/// DI run at z_e = 0 after the warm-up; used by optimize_di.
std::vector<double> di_target_samples(const CostParams& p, const DemandModel& model,
                                      std::int64_t delta, std::size_t n, std::size_t warmup,
                                      std::uint64_t seed);

/// Closed-form starting point (S_r, S_e, cap) from the minimum and maximum
/// cumulative demand, before rounding.
CdiPolicy cdi_seed(const CostParams& p, const DemandModel& model);

/// Exhaustive integer grid search around cdi_seed(). When the winner lies on
/// an interior-facing edge of the window, the window is re-centred on it and
/// the search repeats.
Optimized<CdiPolicy> optimize_cdi(const CostParams& p, const DemandModel& model,
                                  const SearchOptions& opts = {});

enum class CdiVariant { current, future };

/// Per-period CDI levels from the demand process moments using +-2.58 sigma
/// bounds. `current` uses period-t moments only; `future` sums the bounds over
/// periods t..t+l, treating periods past the horizon as zero demand.
CdiPolicy cdi_time_varying_params(const TruncatedNormalProcess& process, const CostParams& p,
                                  CdiVariant variant);

/// Mean cost per period of a heuristic simulated on fresh common random
/// numbers; `initial_inventory` is the starting net inventory.
template <class Rule>
double simulated_cost(Rule&& rule, const CostParams& p, const DemandModel& model,
                      const SearchOptions& opts, double initial_inventory = 0.0) {
  const DemandPaths paths = DemandPaths::generate(model, opts.n_reps, opts.horizon, opts.seed);
  return mean(simulate_mean_costs(rule, paths, p, InventoryState::zero(p, initial_inventory)));
}

void to_json(nlohmann::json& j, const BaseStockPolicy& x);
void from_json(const nlohmann::json& j, BaseStockPolicy& x);
void to_json(nlohmann::json& j, const SingleIndexPolicy& x);
void from_json(const nlohmann::json& j, SingleIndexPolicy& x);
void to_json(nlohmann::json& j, const DualIndexPolicy& x);
void from_json(const nlohmann::json& j, DualIndexPolicy& x);
void to_json(nlohmann::json& j, const CdiPolicy& x);
void from_json(const nlohmann::json& j, CdiPolicy& x);
void to_json(nlohmann::json& j, const TbsPolicy& x);
void from_json(const nlohmann::json& j, TbsPolicy& x);

}  // namespace dualsource::heuristics
