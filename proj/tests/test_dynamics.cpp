#include "doctest.h"
#include "dualsource/dynamics.hpp"
#include "dualsource/rng.hpp"
#include "dualsource/simulate.hpp"

using namespace dualsource;

TEST_CASE("one period: orders, then arrivals, then demand") {
  CostParams p;  // l_r = 2, l_e = 0, h = 5, b = 495, c_e = 20
  p.f_r = 1.0;
  p.f_e = 2.0;
  InventoryState s{2.0, {1, 3}, {}};
  const auto r = step(s, Action{2, 1}, 4.0, p);
  // Arrivals: oldest regular order (1) and the expedited order (1).
  CHECK(r.next.I == 0.0);
  CHECK(r.next.Q_r == std::vector<std::int64_t>{3, 2});
  CHECK(r.cost == doctest::Approx(20.0 * 1 + 1.0 + 2.0));

  const auto short_ = step(s, Action{0, 0}, 6.0, p);
  CHECK(short_.next.I == -3.0);
  CHECK(short_.cost == doctest::Approx(495.0 * 3));
  const auto over = step(s, Action{0, 0}, 0.0, p);
  CHECK(over.cost == doctest::Approx(5.0 * 3));
}

TEST_CASE("expedited pipeline with positive lead time") {
  CostParams p;
  p.l_r = 3;
  p.l_e = 1;
  InventoryState s = InventoryState::zero(p);
  REQUIRE(s.Q_r.size() == 3);
  REQUIRE(s.Q_e.size() == 1);
  s = step(s, Action{0, 4}, 0.0, p).next;
  CHECK(s.I == 0.0);
  s = step(s, Action{0, 0}, 0.0, p).next;
  CHECK(s.I == 4.0);
}

TEST_CASE("zero lead time single supplier receives immediately") {
  const CostParams p = CostParams::single(5, 495, 0);
  InventoryState s = InventoryState::zero(p);
  const auto r = step(s, Action{3, 0}, 1.0, p);
  CHECK(r.next.I == 2.0);
  CHECK_THROWS_AS(step(s, Action{0, 1}, 1.0, p), DynamicsError);
}

TEST_CASE("input validation") {
  CostParams p;
  p.l_e = 2;
  CHECK_THROWS_AS(p.validate(), DynamicsError);
  p = CostParams{};
  p.c_e = -1;
  CHECK_THROWS_AS(p.validate(), DynamicsError);
  p = CostParams{};
  p.h = 0;
  CHECK_THROWS_AS(p.validate(), DynamicsError);
  CostParams ok;
  const InventoryState s = InventoryState::zero(ok);
  CHECK_THROWS_AS(step(s, Action{-1, 0}, 1.0, ok), DynamicsError);
  CHECK_THROWS_AS(step(s, Action{0, 0}, -1.0, ok), DynamicsError);
}

TEST_CASE("inventory positions") {
  InventoryState s{-2.0, {1, 2, 3}, {}};
  CHECK(s.position_through(0) == -1.0);
  CHECK(s.position_through(1) == 1.0);
  CHECK(s.position_through(9) == 4.0);
  CHECK(s.inventory_position() == 4.0);
}

TEST_CASE("compressed and full simulation agree step by step") {
  for (int l_r : {1, 2, 3}) {
    CostParams p;
    p.l_r = l_r;
    p.f_r = 3.0;
    Rng rng(100 + static_cast<std::uint64_t>(l_r));
    InventoryState full = InventoryState::zero(p);
    CompressedState comp = compress(full, p);
    for (int i = 0; i < 2000; ++i) {
      const Action a{rng.uniform_int(0, 4), rng.uniform_int(0, 4)};
      const double d = static_cast<double>(rng.uniform_int(0, 6));
      const auto f = step(full, a, d, p);
      const auto c = compressed_step(comp, a, d, p);
      REQUIRE(c.cost == f.cost);
      REQUIRE(c.next == compress(f.next, p));
      full = f.next;
      comp = c.next;
    }
  }
}

TEST_CASE("expand inverts compress") {
  CostParams p;
  p.l_r = 3;
  const CompressedState s{5.0, {2, 1}};
  const InventoryState e = expand(s, p);
  CHECK(e.Q_r.front() == 0);
  CHECK(compress(e, p) == s);
}

TEST_CASE("advance matches step") {
  CostParams p;
  InventoryState a{1.0, {2, 0}, {}};
  InventoryState b = a;
  const double c = advance(a, Action{3, 1}, 2.0, p);
  const auto r = step(b, Action{3, 1}, 2.0, p);
  CHECK(a == r.next);
  CHECK(c == r.cost);
}

TEST_CASE("demand paths use one sub-stream per realization") {
  DemandModel m(DiscreteUniform{0, 4});
  const auto a = DemandPaths::generate(m, 4, 50, 9);
  const auto b = DemandPaths::generate(m, 6, 50, 9);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t t = 0; t < 50; ++t) REQUIRE(a.at(r, t) == b.at(r, t));
  CHECK(a.fingerprint() == DemandPaths::generate(m, 4, 50, 9).fingerprint());
  CHECK(a.fingerprint() != DemandPaths::generate(m, 4, 50, 10).fingerprint());
}

TEST_CASE("hand-evaluated periods") {
  CostParams p;  // h = 5, b = 495, c_r = 0, c_e = 20
  // I = 3 with 2 regular units arriving, expedite 1, demand 4.
  const InventoryState s{3.0, {2, 0}, {}};
  const auto r = step(s, Action{0, 1}, 4.0, p);
  CHECK(r.next.I == 2.0);
  CHECK(r.cost == 30.0);
  p.f_r = 5;
  p.f_e = 10;
  CHECK(step(s, Action{1, 1}, 4.0, p).cost == 45.0);

  const CostParams plain;
  const auto idle = step(InventoryState::zero(plain), Action{}, 0.0, plain);
  CHECK(idle.next.I == 0.0);
  CHECK(idle.cost == 0.0);
  CHECK(plain.inventory_cost(2) == 10.0);
  CHECK(plain.inventory_cost(-1) == 495.0);
}

TEST_CASE("hand-evaluated compressed states") {
  const CostParams p;
  CHECK(compress(InventoryState{2.0, {3, 1}, {}}, p) == CompressedState{5.0, {1}});
  const auto r = compressed_step(CompressedState{3.0, {2}}, Action{1, 0}, 2.0, p);
  CHECK(r.next == CompressedState{3.0, {1}});
  CHECK(r.cost == 5.0);

  // Without demand and orders the pipeline drains into stock.
  CompressedState s{1.0, {2}};
  s = compressed_step(s, Action{}, 0.0, p).next;
  CHECK(s == CompressedState{3.0, {0}});
  CHECK(compressed_step(s, Action{}, 0.0, p).cost == 15.0);
}

TEST_CASE("pipeline conservation") {
  CostParams p;
  p.l_r = 4;
  p.l_e = 1;
  Rng rng(8);
  InventoryState s = InventoryState::zero(p);
  double ordered = 0.0, demanded = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Action a{rng.uniform_int(0, 3), rng.uniform_int(0, 3)};
    ordered += static_cast<double>(a.q_r + a.q_e);
    const double d = static_cast<double>(rng.uniform_int(0, 5));
    demanded += d;
    const auto r = step(s, a, d, p);
    CHECK(r.cost >= 0.0);
    s = r.next;
    double pipeline = 0.0;
    for (auto q : s.Q_r) pipeline += static_cast<double>(q);
    for (auto q : s.Q_e) pipeline += static_cast<double>(q);
    REQUIRE(ordered == s.I + demanded + pipeline);
  }
}
