#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dualsource/demand.hpp"
#include "dualsource/dynamics.hpp"

namespace dualsource::dp {

class DpError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bounded integer grid over compressed states (I_e, tail) with l - 1 tail
/// entries in [0, q_max].
struct StateSpace {
  int l = 2;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::int64_t q_max = 0;

  /// lo = -(l+1)*D_max - 5, hi = (l+2)*D_max + 5, q_max = D_max; the
  /// single point 0 when D_max = 0.
  static StateSpace defaults(const CostParams& p, const DemandModel& model);

  void validate() const;
  std::size_t size() const;
  std::size_t tail_size() const;
  bool contains(const CompressedState& s) const;
  std::size_t index(const CompressedState& s) const;
  CompressedState state(std::size_t index) const;
  /// Index of (0, 0, ..., 0).
  std::size_t zero_index() const { return index(CompressedState{0.0, std::vector<std::int64_t>(l - 1, 0)}); }
};

/// Action per state of a StateSpace.
struct PolicyTable {
  StateSpace space;
  std::vector<Action> actions;

  const Action& at(const CompressedState& s) const { return actions.at(space.index(s)); }
  Action& at(const CompressedState& s) { return actions.at(space.index(s)); }
};

/// Tabulates an arbitrary state-feedback rule over the whole space.
PolicyTable tabulate(const StateSpace& space,
                     const std::function<Action(const CompressedState&)>& rule);

struct ValueTable {
  std::vector<double> J;
  std::vector<double> lambda;     ///< J_k(s) / k
  std::vector<double> increment;  ///< J_k(s) - J_{k-1}(s)
  std::size_t iterations = 0;
};

struct ValueIterationOptions {
  double eps = 1e-6;
  double gamma = 1.0;
  std::size_t max_iterations = 1'000'000;
  double escape_penalty = 1e9;
};

struct ValueIterationResult {
  double lambda_star = 0.0;
  double lambda_lo = 0.0;  ///< min_s increment at termination
  double lambda_hi = 0.0;  ///< max_s increment at termination
  ValueTable values;
  PolicyTable policy;
};

/// Average-cost value iteration from v_0 = 0. Requires c_r = 0, l_e = 0 and
/// discrete demand; throws DpError on non-convergence.
ValueIterationResult value_iteration(const CostParams& p, const DemandModel& model,
                                     const StateSpace& space,
                                     const ValueIterationOptions& opts = {});

/// Union of the closed communicating classes reachable from the zero state.
/// Throws DpError when the policy drives the state outside the space.
std::vector<std::size_t> recurrent_states(const PolicyTable& policy, const CostParams& p,
                                          const DemandModel& model);

/// Closed communicating classes reachable from the zero state.
std::vector<std::vector<std::size_t>> recurrent_classes(const PolicyTable& policy,
                                                        const CostParams& p,
                                                        const DemandModel& model);

struct StationaryResult {
  double cost = 0.0;
  std::vector<std::size_t> states;
  std::vector<double> probability;
};

/// Exact long-run cost from the stationary distribution on the recurrent
/// class. Throws DpError for divergent or reducible policies.
StationaryResult policy_long_run_cost(const PolicyTable& policy, const CostParams& p,
                                      const DemandModel& model);

/// CSV: I_e, tail_1..tail_{l-1}, q_r, q_e, J, lambda.
void write_policy_csv(std::ostream& out, const PolicyTable& policy,
                      const ValueTable* values = nullptr);

}  // namespace dualsource::dp
