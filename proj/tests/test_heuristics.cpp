#include <cmath>
#include <limits>

#include "doctest.h"
#include "dualsource/heuristics.hpp"

using namespace dualsource;
using namespace dualsource::heuristics;

TEST_CASE("rounding to whole units") {
  CHECK(to_units(-3.2) == 0);
  CHECK(to_units(0.0) == 0);
  CHECK(to_units(2.4) == 2);
  CHECK(to_units(2.5) == 3);
  CHECK(to_units(std::nan("")) == 0);
  CHECK_THROWS_AS(to_units(std::numeric_limits<double>::infinity()), HeuristicError);
}

TEST_CASE("base stock") {
  InventoryState s{1.0, {1, 0}, {}};
  CHECK(base_stock_order(s, BaseStockPolicy{6}) == 4);
  CHECK(base_stock_order(s, BaseStockPolicy{1}) == 0);
  // Zero lead time, b / (b + h) = 0.99 on U{0,4}: F(x) = (x + 1) / 5.
  const auto z = optimal_base_stock(CostParams::single(5, 495, 0), DemandModel(DiscreteUniform{0, 4}));
  CHECK(z.z == 4);
  // h = b: the median of the 3-fold sum of U{0,4} is 6.
  const auto z3 = optimal_base_stock(CostParams::single(5, 5, 2), DemandModel(DiscreteUniform{0, 4}));
  CHECK(z3.z == 6);
}

TEST_CASE("capped dual index") {
  // I = -1, regular pipeline (2, 3): the next arrival brings I to 1.
  const InventoryState s{-1.0, {2, 3}, {}};
  const CdiPolicy pol = CdiPolicy::constant(9, 3, 2);
  // q_e = 3 - 1 = 2; uncapped regular 9 - 4 - 2 = 3, capped to 2.
  CHECK(cdi_order(s, pol, 0) == Action{2, 2});
  CHECK(cdi_order(s, CdiPolicy::constant(9, 3), 0) == Action{3, 2});
  // Without a cap CDI is DI.
  CHECK(cdi_order(s, CdiPolicy::constant(9, 3), 0) == di_order(s, DualIndexPolicy{3, 6}));
  // Nothing to do above both targets.
  CHECK(cdi_order(InventoryState{10.0, {0, 0}, {}}, pol, 0) == Action{0, 0});
}

TEST_CASE("time-varying CDI levels reuse the last entry") {
  CdiPolicy pol;
  pol.S_r = {5, 6, 7};
  pol.S_e = {1};
  pol.cap = {2, 3};
  CHECK(pol.time_varying());
  CHECK(pol.S_r_at(1) == 6);
  CHECK(pol.S_r_at(10) == 7);
  CHECK(pol.S_e_at(4) == 1);
  CHECK(pol.cap_at(5) == 3);
  CdiPolicy empty;
  CHECK_THROWS_AS(empty.validate(), HeuristicError);
}

TEST_CASE("single index and tailored base surge") {
  const InventoryState s{0.0, {0, 0}, {}};
  // Last demand 3 with delta 2: two units regular, one expedited.
  CHECK(si_order(s, SingleIndexPolicy{8, 2}, 3.0) == Action{2, 1});
  CHECK(si_order(s, SingleIndexPolicy{8, 4}, 3.0) == Action{3, 0});
  CHECK(tbs_order(InventoryState{-2.0, {1, 0}, {}}, TbsPolicy{2, 3}) == Action{2, 4});
}

TEST_CASE("cdi seed from demand bounds") {
  const CostParams p;  // h = 5, b = 495, l = 2
  const auto seed = cdi_seed(p, DemandModel(DiscreteUniform{0, 4}));
  // Weighted point between min and max demand: (h lo + b hi) / (h + b).
  CHECK(seed.S_e[0] == doctest::Approx(4 * 0.99));
  CHECK(seed.cap[0] == doctest::Approx(4 * 0.99));
  CHECK(seed.S_r[0] == doctest::Approx(12 * 0.99));
}

TEST_CASE("time-varying CDI parameters from moments") {
  CostParams p;
  p.l_r = 1;
  p.h = 1;
  p.b = 1;
  TruncatedNormalProcess proc{{100, 200}, {10, 0}};
  const auto cur = cdi_time_varying_params(proc, p, CdiVariant::current);
  // Midpoint of [mu - 2.58 sigma, mu + 2.58 sigma] when h = b.
  CHECK(cur.S_e[0] == doctest::Approx(100));
  CHECK(cur.S_r[0] == doctest::Approx(100));
  CHECK(cur.cap[1] == doctest::Approx(200));
  const auto fut = cdi_time_varying_params(proc, p, CdiVariant::future);
  CHECK(fut.S_r[0] == doctest::Approx(300));
  CHECK(fut.cap[0] == doctest::Approx(200));
  // Past the horizon demand counts as zero.
  CHECK(fut.S_r[1] == doctest::Approx(200));
  CHECK(fut.cap[1] == doctest::Approx(0));
}

TEST_CASE("simulation-based optimizers are deterministic and self-consistent") {
  const CostParams p;
  const DemandModel m(DiscreteUniform{0, 4});
  SearchOptions o;
  o.n_reps = 20;
  o.horizon = 200;
  o.n_samples = 20000;
  const auto a = optimize_cdi(p, m, o);
  const auto b = optimize_cdi(p, m, o);
  CHECK(a.policy.S_r == b.policy.S_r);
  CHECK(a.cost == b.cost);
  const auto pol = a.policy;
  const double again = simulated_cost(
      [&](const InventoryState& s, std::size_t t, double) { return cdi_order(s, pol, t); }, p, m, o);
  CHECK(again == a.cost);

  const auto di = optimize_di(p, m, o);
  const auto si = optimize_si(p, m, o);
  CHECK(di.policy.delta >= 0);
  CHECK(si.policy.delta >= 0);
  CHECK(si.policy.delta <= 4);
  // DI is CDI with an unbounded cap, so the CDI search can only do better
  // on the same paths.
  CHECK(a.cost <= simulated_cost(
                      [&](const InventoryState& s, std::size_t, double) { return di_order(s, di.policy); },
                      p, m, o, static_cast<double>(di.policy.z_r())) +
                      1.0);
  o.n_samples = 10;
  CHECK_THROWS_AS(optimize_si(p, m, o), HeuristicError);
}

TEST_CASE("policy json") {
  nlohmann::json j = CdiPolicy::constant(9, 4, std::numeric_limits<double>::infinity());
  CHECK(j.at("cap").is_null());
  CHECK(std::isinf(j.get<CdiPolicy>().cap_at(0)));
  nlohmann::json k = DualIndexPolicy{3, 5};
  CHECK(k.get<DualIndexPolicy>().z_r() == 8);
  nlohmann::json tv = {{"S_r", {1, 2}}, {"S_e", 1}, {"cap", {1}}};
  CHECK(tv.get<CdiPolicy>().S_r_at(1) == 2);
}

TEST_CASE("order rules on hand-evaluated states") {
  CHECK(base_stock_order(InventoryState{1.0, {}, {}}, BaseStockPolicy{4}) == 3);
  CHECK(base_stock_order(InventoryState{6.0, {}, {}}, BaseStockPolicy{4}) == 0);
  const InventoryState any{0.0, {0, 0}, {}};
  CHECK(si_order(any, SingleIndexPolicy{9, 3}, 5.0) == Action{3, 2});
  CHECK(si_order(any, SingleIndexPolicy{9, 3}, 0.0) == Action{0, 0});
  for (int d = 0; d <= 4; ++d) CHECK(si_order(any, SingleIndexPolicy{9, 4}, d).q_e == 0);
  // S_r = 6, cap = 3, I_t^{t+1} = 1 and no expedited order.
  CHECK(cdi_order(InventoryState{1.0, {0, 0}, {}}, CdiPolicy::constant(6, 0, 3), 0) == Action{3, 0});
  CHECK(cdi_order(InventoryState{4.0, {0, 0}, {}}, CdiPolicy::constant(6, 4, 9), 0).q_e == 0);
  CHECK(tbs_order(InventoryState{3.0, {0, 0}, {}}, TbsPolicy{2, 4}) == Action{2, 1});
  CHECK(tbs_order(InventoryState{5.0, {0, 0}, {}}, TbsPolicy{1, 4}) == Action{1, 0});
  // Constant regular order of one unit on the l_r = 3 instance with h = 40.
  CostParams tbs;
  tbs.l_r = 3;
  tbs.c_e = 10;
  tbs.b = 60;
  tbs.h = 40;
  const TbsPolicy one{1, 2};
  SearchOptions o;
  o.n_reps = 5;
  o.horizon = 100;
  const double cost = simulated_cost(
      [&](const InventoryState& s, std::size_t, double) {
        const Action a = tbs_order(s, one);
        REQUIRE(a.q_r == 1);
        return a;
      },
      tbs, DemandModel(DiscreteUniform{0, 4}), o);
  CHECK(std::isfinite(cost));
}

TEST_CASE("target-demand samples") {
  CostParams p;
  p.l_r = 1;
  const DemandModel m(DiscreteUniform{0, 4});
  // With delta >= D_max the capped term is the plain demand: the two-fold sum.
  const auto samples = si_target_samples(p, m, 4, 100000, 3);
  CHECK(empirical_quantile(samples, 0.99) == 8);
  // delta = 0 leaves only the expedited-lead-time demand.
  for (double x : si_target_samples(p, m, 0, 1000, 3)) REQUIRE(x <= 4);
  CHECK(p.service_level() == doctest::Approx(0.99));
  p.b = 95;
  CHECK(p.service_level() == doctest::Approx(0.95));
}

TEST_CASE("SI bookkeeping and DI at zero spread") {
  const CostParams p;
  const DemandModel m(DiscreteUniform{0, 4});
  const auto paths = DemandPaths::generate(m, 3, 200, 12);
  const SingleIndexPolicy si{6, 0};
  const DualIndexPolicy di{6, 0};
  for (std::size_t r = 0; r < paths.n_reps(); ++r) {
    InventoryState a = InventoryState::zero(p, 6), b = a;
    double last = 0.0;
    for (std::size_t t = 0; t < paths.horizon(); ++t) {
      const Action x = si_order(a, si, last);
      const Action y = di_order(b, di);
      REQUIRE(x.q_r + x.q_e == static_cast<std::int64_t>(last));
      REQUIRE(x == y);
      advance(a, x, paths.at(r, t), p);
      advance(b, y, paths.at(r, t), p);
      last = paths.at(r, t);
    }
  }
}

TEST_CASE("uncapped CDI reproduces DI on shared paths") {
  const CostParams p;
  const DemandModel m(DiscreteUniform{0, 4});
  const auto paths = DemandPaths::generate(m, 4, 300, 2);
  const DualIndexPolicy di{4, 5};
  const CdiPolicy cdi = CdiPolicy::constant(9, 4);
  auto di_rule = [&](const InventoryState& s, std::size_t, double) { return di_order(s, di); };
  auto cdi_rule = [&](const InventoryState& s, std::size_t t, double) { return cdi_order(s, cdi, t); };
  CHECK(simulate_mean_costs(di_rule, paths, p, InventoryState::zero(p)) ==
        simulate_mean_costs(cdi_rule, paths, p, InventoryState::zero(p)));
}

TEST_CASE("CDI search on deterministic demand avoids backlog") {
  const CostParams p;
  const DemandModel two(DiscreteUniform{2, 2});
  SearchOptions o;
  o.n_reps = 2;
  o.horizon = 100;
  const auto best = optimize_cdi(p, two, o);
  // Brute force over a small grid on the same paths.
  double brute = 1e300;
  for (int S_r = 0; S_r <= 10; ++S_r)
    for (int S_e = 0; S_e <= 6; ++S_e)
      for (int cap = 0; cap <= 4; ++cap) {
        const auto pol = CdiPolicy::constant(S_r, S_e, cap);
        brute = std::min(brute, simulated_cost([&](const InventoryState& s, std::size_t t, double) {
                                                 return cdi_order(s, pol, t);
                                               }, p, two, o));
      }
  CHECK(best.cost <= brute + 1e-12);
  // Any backlog would cost 495 per unit; the optimum pays only start-up.
  CHECK(best.cost < 5.0);
}

TEST_CASE("time-varying CDI hand values") {
  CostParams p;  // h = 5, b = 495, l = 2
  const TruncatedNormalProcess proc{{100, 100, 100, 100}, {10, 10, 10, 10}};
  const auto cur = cdi_time_varying_params(proc, p, CdiVariant::current);
  CHECK(cur.S_e[0] == doctest::Approx(125.284));
  const TruncatedNormalProcess flat{{50, 60}, {0, 0}};
  CHECK(cdi_time_varying_params(flat, p, CdiVariant::current).S_e[1] == doctest::Approx(60));
  const auto fut = cdi_time_varying_params(proc, p, CdiVariant::future);
  CHECK(fut.S_r[0] == doctest::Approx(3 * 125.284));
  CHECK(fut.S_r[1] == doctest::Approx(3 * 125.284));
}
