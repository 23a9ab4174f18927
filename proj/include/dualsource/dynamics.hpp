#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualsource {

class DynamicsError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Instance parameters of the dual-sourcing system.
///
/// With `single_source` set, only the regular channel is used, `l_r` is the
/// single lead time (0 allowed), and expedited orders are rejected.
struct CostParams {
  double h = 5.0;    ///< holding cost per unit per period
  double b = 495.0;  ///< backlog cost per unit per period
  double c_r = 0.0;  ///< regular unit cost
  double c_e = 20.0; ///< expedited unit cost
  double f_r = 0.0;  ///< fixed cost per positive regular order
  double f_e = 0.0;  ///< fixed cost per positive expedited order
  int l_r = 2;
  int l_e = 0;
  bool single_source = false;

  void validate() const;

  /// Lead-time gap l = l_r - l_e.
  int gap() const { return l_r - l_e; }

  /// Critical fractile b / (b + h).
  double service_level() const { return b / (b + h); }

  /// Holding/backlog charge on end-of-period net inventory x.
  double inventory_cost(double x) const { return x > 0.0 ? h * x : -b * x; }

  bool has_fixed_costs() const { return f_r > 0.0 || f_e > 0.0; }

  static CostParams single(double h, double b, int lead, double unit_cost = 0.0);
};

struct Action {
  std::int64_t q_r = 0;
  std::int64_t q_e = 0;

  friend bool operator==(const Action&, const Action&) = default;
};

/// Full system state: net inventory plus both order pipelines, oldest first.
struct InventoryState {
  double I = 0.0;
  std::vector<std::int64_t> Q_r;
  std::vector<std::int64_t> Q_e;

  static InventoryState zero(const CostParams& p, double initial_inventory = 0.0);

  /// Net inventory plus everything arriving through period t + k,
  /// i.e. I plus the k + 1 oldest pipeline entries (clamped to length).
  double position_through(int k) const;

  /// Net inventory plus all outstanding orders.
  double inventory_position() const;

  friend bool operator==(const InventoryState&, const InventoryState&) = default;
};

struct StepResult {
  InventoryState next;
  double cost = 0.0;
};

/// One period: place orders, receive arrivals, observe demand, charge costs.
StepResult step(const InventoryState& state, Action action, double demand, const CostParams& p);

/// Ordering part of the period cost (unit plus fixed charges).
double order_cost(Action action, const CostParams& p);

/// Expedited inventory position plus the l - 1 most recent regular orders.
struct CompressedState {
  double I_e = 0.0;
  std::vector<std::int64_t> tail;

  friend bool operator==(const CompressedState&, const CompressedState&) = default;
  friend auto operator<=>(const CompressedState&, const CompressedState&) = default;
};

struct CompressedStepResult {
  CompressedState next;
  double cost = 0.0;
};

/// Requires l_e = 0.
CompressedState compress(const InventoryState& state, const CostParams& p);

/// Canonical full state mapping back onto `s` (oldest regular order zero).
InventoryState expand(const CompressedState& s, const CostParams& p);

CompressedStepResult compressed_step(const CompressedState& state, Action action, double demand,
                                     const CostParams& p);

std::string to_string(const CompressedState& s);

}  // namespace dualsource
