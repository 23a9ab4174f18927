#pragma once

#include <cstdint>
#include <vector>

#include "dualsource/demand.hpp"
#include "dualsource/dynamics.hpp"

namespace dualsource {

/// Pre-drawn demand for n_reps realizations of `horizon` periods. Realization
/// r draws from sub-stream r of the seed, so every policy evaluated against
/// the same paths sees common random numbers.
class DemandPaths {
public:
  DemandPaths() = default;
  DemandPaths(std::size_t n_reps, std::size_t horizon, std::vector<double> values);

  static DemandPaths generate(const DemandModel& model, std::size_t n_reps, std::size_t horizon,
                              std::uint64_t seed);

  std::size_t n_reps() const { return n_reps_; }
  std::size_t horizon() const { return horizon_; }
  double at(std::size_t rep, std::size_t t) const { return values_[rep * horizon_ + t]; }
  const double* row(std::size_t rep) const { return values_.data() + rep * horizon_; }

  /// FNV-1a hash of the raw sample bits.
  std::uint64_t fingerprint() const;

private:
  std::size_t n_reps_ = 0;
  std::size_t horizon_ = 0;
  std::vector<double> values_;
};

/// In-place variant of step(); returns the period cost. Inputs are assumed
/// valid (no checks) since this sits in simulation inner loops.
double advance(InventoryState& state, Action action, double demand, const CostParams& p);

/// Mean cost per period of each realization under a state-feedback rule
/// `Action rule(const InventoryState&, std::size_t t, double last_demand)`.
/// Periods before `burn_in` are simulated but not averaged.
template <class Rule>
std::vector<double> simulate_mean_costs(Rule&& rule, const DemandPaths& paths, const CostParams& p,
                                        const InventoryState& initial, std::size_t burn_in = 0) {
  std::vector<double> out(paths.n_reps());
  const std::size_t counted = paths.horizon() > burn_in ? paths.horizon() - burn_in : 0;
  for (std::size_t r = 0; r < paths.n_reps(); ++r) {
    InventoryState s = initial;
    double last = 0.0;
    double total = 0.0;
    const double* d = paths.row(r);
    for (std::size_t t = 0; t < paths.horizon(); ++t) {
      const Action a = rule(s, t, last);
      const double c = advance(s, a, d[t], p);
      if (t >= burn_in) total += c;
      last = d[t];
    }
    out[r] = counted ? total / static_cast<double>(counted) : 0.0;
  }
  return out;
}

double mean(const std::vector<double>& v);

}  // namespace dualsource
