#include "dualsource/simulate.hpp"

#include <cstring>
#include <numeric>
#include <stdexcept>

namespace dualsource {

DemandPaths::DemandPaths(std::size_t n_reps, std::size_t horizon, std::vector<double> values)
    : n_reps_(n_reps), horizon_(horizon), values_(std::move(values)) {
  if (values_.size() != n_reps_ * horizon_)
    throw std::invalid_argument("DemandPaths: value count does not match n_reps * horizon");
}

DemandPaths DemandPaths::generate(const DemandModel& model, std::size_t n_reps, std::size_t horizon,
                                  std::uint64_t seed) {
  std::vector<double> v(n_reps * horizon);
  const Rng root(seed);
  for (std::size_t r = 0; r < n_reps; ++r) {
    Rng rng = root.substream(r);
    for (std::size_t t = 0; t < horizon; ++t) v[r * horizon + t] = model.sample(t, rng);
  }
  return DemandPaths(n_reps, horizon, std::move(v));
}

std::uint64_t DemandPaths::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : values_) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

double advance(InventoryState& s, Action a, double demand, const CostParams& p) {
  auto push = [](std::vector<std::int64_t>& q, std::int64_t order) -> std::int64_t {
    if (q.empty()) return order;
    const std::int64_t arriving = q.front();
    for (std::size_t i = 1; i < q.size(); ++i) q[i - 1] = q[i];
    q.back() = order;
    return arriving;
  };
  const std::int64_t arrived = push(s.Q_r, a.q_r) + push(s.Q_e, a.q_e);
  s.I += static_cast<double>(arrived) - demand;
  return order_cost(a, p) + p.inventory_cost(s.I);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace dualsource
