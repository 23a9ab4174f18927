#include "dualsource/dynamics.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace dualsource {

void CostParams::validate() const {
  if (!(h > 0.0)) throw DynamicsError("holding cost h must be > 0");
  if (!(b > 0.0)) throw DynamicsError("backlog cost b must be > 0");
  if (!(c_r >= 0.0)) throw DynamicsError("regular unit cost c_r must be >= 0");
  if (!(f_r >= 0.0) || !(f_e >= 0.0)) throw DynamicsError("fixed order costs must be >= 0");
  if (single_source) {
    if (l_r < 0) throw DynamicsError("lead time must be >= 0");
    return;
  }
  if (!(c_e >= c_r)) throw DynamicsError("expedited unit cost must satisfy c_e >= c_r");
  if (l_e < 0 || l_e >= l_r) throw DynamicsError("lead times must satisfy 0 <= l_e < l_r");
}

CostParams CostParams::single(double h, double b, int lead, double unit_cost) {
  CostParams p;
  p.h = h;
  p.b = b;
  p.c_r = unit_cost;
  p.c_e = unit_cost;
  p.l_r = lead;
  p.l_e = 0;
  p.single_source = true;
  return p;
}

InventoryState InventoryState::zero(const CostParams& p, double initial_inventory) {
  InventoryState s;
  s.I = initial_inventory;
  s.Q_r.assign(static_cast<std::size_t>(p.l_r), 0);
  s.Q_e.assign(p.single_source ? 0 : static_cast<std::size_t>(p.l_e), 0);
  return s;
}

double InventoryState::position_through(int k) const {
  double acc = I;
  const auto n = std::min<std::size_t>(Q_r.size(), static_cast<std::size_t>(std::max(k + 1, 0)));
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(Q_r[i]);
  const auto m = std::min<std::size_t>(Q_e.size(), static_cast<std::size_t>(std::max(k + 1, 0)));
  for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(Q_e[i]);
  return acc;
}

double InventoryState::inventory_position() const {
  return I + static_cast<double>(std::accumulate(Q_r.begin(), Q_r.end(), std::int64_t{0})) +
         static_cast<double>(std::accumulate(Q_e.begin(), Q_e.end(), std::int64_t{0}));
}

double order_cost(Action a, const CostParams& p) {
  double c = p.c_r * static_cast<double>(a.q_r) + p.c_e * static_cast<double>(a.q_e);
  if (a.q_r > 0) c += p.f_r;
  if (a.q_e > 0) c += p.f_e;
  return c;
}

namespace {

// Appends the new order and returns the one arriving this period.
std::int64_t advance(std::vector<std::int64_t>& pipeline, std::int64_t order) {
  if (pipeline.empty()) return order;
  const std::int64_t arriving = pipeline.front();
  std::copy(pipeline.begin() + 1, pipeline.end(), pipeline.begin());
  pipeline.back() = order;
  return arriving;
}

void check_inputs(Action a, double demand, const CostParams& p) {
  if (a.q_r < 0 || a.q_e < 0) throw DynamicsError("orders must be non-negative");
  if (!(demand >= 0.0)) throw DynamicsError("demand must be non-negative");
  if (p.single_source && a.q_e != 0)
    throw DynamicsError("single-source configuration cannot place expedited orders");
}

}  // namespace

StepResult step(const InventoryState& state, Action a, double demand, const CostParams& p) {
  check_inputs(a, demand, p);
  StepResult r{state, 0.0};
  if (r.next.Q_r.size() != static_cast<std::size_t>(p.l_r) ||
      r.next.Q_e.size() != (p.single_source ? 0u : static_cast<std::size_t>(p.l_e)))
    throw DynamicsError("state pipeline lengths do not match lead times");
  const std::int64_t arr_r = advance(r.next.Q_r, a.q_r);
  const std::int64_t arr_e = advance(r.next.Q_e, a.q_e);
  r.next.I = state.I + static_cast<double>(arr_r + arr_e) - demand;
  r.cost = order_cost(a, p) + p.inventory_cost(r.next.I);
  return r;
}

CompressedState compress(const InventoryState& state, const CostParams& p) {
  if (p.l_e != 0 || !state.Q_e.empty())
    throw DynamicsError("compressed state requires l_e = 0");
  if (state.Q_r.empty()) throw DynamicsError("compressed state requires l_r >= 1");
  CompressedState c;
  c.I_e = state.I + static_cast<double>(state.Q_r.front());
  c.tail.assign(state.Q_r.begin() + 1, state.Q_r.end());
  return c;
}

InventoryState expand(const CompressedState& s, const CostParams& p) {
  if (p.l_e != 0) throw DynamicsError("compressed state requires l_e = 0");
  if (s.tail.size() + 1 != static_cast<std::size_t>(p.l_r))
    throw DynamicsError("compressed tail length must be l_r - 1");
  InventoryState full;
  full.I = s.I_e;
  full.Q_r.reserve(s.tail.size() + 1);
  full.Q_r.push_back(0);
  full.Q_r.insert(full.Q_r.end(), s.tail.begin(), s.tail.end());
  return full;
}

CompressedStepResult compressed_step(const CompressedState& state, Action a, double demand,
                                     const CostParams& p) {
  check_inputs(a, demand, p);
  if (p.l_e != 0) throw DynamicsError("compressed dynamics require l_e = 0");
  if (state.tail.size() + 1 != static_cast<std::size_t>(p.l_r))
    throw DynamicsError("compressed tail length must be l_r - 1");
  CompressedStepResult r{state, 0.0};
  const double after_demand = state.I_e + static_cast<double>(a.q_e) - demand;
  r.cost = order_cost(a, p) + p.inventory_cost(after_demand);
  const std::int64_t incoming = advance(r.next.tail, a.q_r);
  r.next.I_e = after_demand + static_cast<double>(incoming);
  return r;
}

std::string to_string(const CompressedState& s) {
  std::ostringstream os;
  os << '(' << s.I_e;
  for (auto q : s.tail) os << ',' << q;
  os << ')';
  return os.str();
}

}  // namespace dualsource
