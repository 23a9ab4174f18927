#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dualsource/demand.hpp"
#include "dualsource/dp.hpp"
#include "dualsource/dynamics.hpp"
#include "dualsource/heuristics.hpp"
#include "dualsource/nnc.hpp"
#include "dualsource/simulate.hpp"
#include "json.hpp"

namespace dualsource::eval {

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct NeuralPolicy {
  nnc::Network net;
};

using PolicyHandle =
    std::variant<heuristics::BaseStockPolicy, heuristics::SingleIndexPolicy,
                 heuristics::DualIndexPolicy, heuristics::CdiPolicy, heuristics::TbsPolicy,
                 dp::PolicyTable, NeuralPolicy>;

/// "base_stock", "si", "di", "cdi", "tbs", "table" or "network".
std::string kind(const PolicyHandle& policy);

/// Throws EvalError when the policy cannot act on this instance.
void check_compatible(const PolicyHandle& policy, const CostParams& p, const DemandModel& model);

/// Starting net inventory: z_r for SI/DI (their defining convention), the
/// learned level for networks, otherwise 0.
double initial_inventory(const PolicyHandle& policy);

/// Stateful decision maker for one trajectory. Network decisions on
/// stationary demand are memoized per state.
class Controller {
public:
  Controller(const PolicyHandle& policy, const CostParams& p, const DemandModel& model);
  Action operator()(const InventoryState& s, std::size_t t, double last_demand);

private:
  const PolicyHandle* policy_;
  CostParams params_;
  nnc::Moments moments_;
  bool stationary_;
  std::map<std::vector<double>, Action> cache_;
};

struct EvalReport {
  std::string policy;
  std::size_t n_reps = 0;
  std::size_t horizon = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
  std::uint64_t fingerprint = 0;  ///< demand stream hash (common random numbers)
  std::vector<double> costs;      ///< mean cost per period of each realization
  double mean = 0.0;
  double median = 0.0;
  double std_error = 0.0;
  nlohmann::json instance;

  /// Sorted costs with empirical CDF levels (i + 1) / n.
  std::vector<std::pair<double, double>> cdf() const;
};

EvalReport evaluate(const PolicyHandle& policy, const CostParams& p, const DemandModel& model,
                    std::size_t n_reps, std::size_t horizon, std::uint64_t seed,
                    std::size_t burn_in = 0);

/// Evaluation on pre-drawn paths; `seed` is recorded only.
EvalReport evaluate_on(const PolicyHandle& policy, const CostParams& p, const DemandModel& model,
                       const DemandPaths& paths, std::uint64_t seed, std::size_t burn_in = 0);

void write_costs_csv(std::ostream& out, const EvalReport& report);
void write_cdf_csv(std::ostream& out, const EvalReport& report);
nlohmann::json summary(const EvalReport& report);

/// Visit counts and summed orders per state key from one long trajectory.
struct VisitStats {
  std::size_t visits = 0;
  double q_r_sum = 0.0;
  double q_e_sum = 0.0;

  double q_r() const { return visits ? q_r_sum / static_cast<double>(visits) : 0.0; }
  double q_e() const { return visits ? q_e_sum / static_cast<double>(visits) : 0.0; }
};

struct SimulationSpan {
  std::size_t periods = 1'000'000;
  std::size_t burn_in = 1'000;
  std::uint64_t seed = 1;
};

/// Compressed states visited after the burn-in, with the orders taken there.
std::map<CompressedState, VisitStats> visited_compressed_states(const PolicyHandle& policy,
                                                                const CostParams& p,
                                                                const DemandModel& model,
                                                                const SimulationSpan& span);

/// RMSE against the optimal table over its recurrent states. Tables and
/// CDI/DI/TBS/base-stock rules are read directly on the compressed state;
/// SI and networks are projected by averaging their simulated orders per
/// compressed state, falling back to the canonical expanded state for
/// recurrent states the simulation never visits.
double policy_rmse(const PolicyHandle& candidate, const dp::PolicyTable& optimal,
                   const CostParams& p, const DemandModel& model,
                   const SimulationSpan& span = {200'000, 1'000, 1});

struct WilcoxonResult {
  std::size_t n = 0;  ///< non-zero differences used
  double w_plus = 0.0;
  double p_value = 1.0;
  bool exact = false;
};

/// One-sided signed-rank test of "median difference > 0". Zero differences
/// are dropped and tied magnitudes get midranks. Exact for n <= 20, otherwise
/// normal approximation with tie and continuity corrections.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs);

struct ProjectionRow {
  double position_now = 0.0;        ///< I_t^t: net inventory plus this period's arrivals
  double inventory_position = 0.0;  ///< I_t^{t+l_r-1}
  double q_r = 0.0;
  double q_e = 0.0;
  double frequency = 0.0;
};

/// Steady-state orders on the (I_t^t, I_t^{t+l_r-1}) plane used by the
/// policy figures.
std::vector<ProjectionRow> project_policy(const PolicyHandle& policy, const CostParams& p,
                                          const DemandModel& model,
                                          const SimulationSpan& span = {});

void write_projection_csv(std::ostream& out, const std::vector<ProjectionRow>& rows);

// JSON forms. Unknown keys are rejected by the from_json functions.
nlohmann::json to_json(const CostParams& p);
CostParams cost_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DemandModel& model);
DemandModel demand_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolicyHandle& policy);
PolicyHandle policy_from_json(const nlohmann::json& j);

}  // namespace dualsource::eval
