#include <doctest.h>

#include "avgcost/oracles.hpp"
#include "avgcost/split_chain.hpp"
#include "support.hpp"

using namespace avgcost;
using testing_support::m2;
using testing_support::m2_smallset;

namespace {

FiniteMdp half_chain() { return FiniteMdp({{"a"}, {"a"}}, {{{0.5, 0.5}}, {{0.3, 0.7}}}, {{1.0}, {2.0}}); }

}  // namespace

TEST_CASE("row from (0,0) when P(0|0) equals delta") {
  const auto sc = build_split_chain(half_chain(), SmallSetSpec{{0}, {1.0, 0.0}, 0.5});
  const auto row = sc.lifted().row(0, 0);
  CHECK(row[0] == doctest::Approx(0.0));
  CHECK(row[1] == doctest::Approx(1.0));
  CHECK(row[2] == doctest::Approx(0.0));
}

TEST_CASE("atom row exits with nu split by (1-delta, delta)") {
  const auto sc = build_split_chain(half_chain(), SmallSetSpec{{0}, {1.0, 0.0}, 0.5});
  const auto row = sc.lifted().row(2, 0);
  CHECK(row[0] == doctest::Approx(0.5));
  CHECK(row[1] == doctest::Approx(0.0));
  CHECK(row[2] == doctest::Approx(0.5));
  CHECK(sc.label(2) == "0:1");
  CHECK(sc.label(1) == "1:0");
}

TEST_CASE("two-state example: row from (0,0) under action a") {
  const auto sc = build_split_chain(m2(), m2_smallset());
  const auto row = sc.lifted().row(0, 0);
  CHECK(row[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(row[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(row[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("split kernel rows sum to one and atom rows ignore the action") {
  const auto sc = build_split_chain(m2(), m2_smallset());
  const FiniteMdp& q = sc.lifted();
  for (std::size_t z = 0; z < q.n_states(); ++z)
    for (std::size_t k = 0; k < q.n_actions(z); ++k) {
      double s = 0.0;
      for (double p : q.row(z, k)) s += p;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  for (std::size_t k = 0; k < q.n_actions(2); ++k) {
    CHECK(q.prob(2, k, 0) == doctest::Approx(0.6));
    CHECK(q.prob(2, k, 2) == doctest::Approx(0.4));
  }
}

TEST_CASE("split cost mixes back to the base cost") {
  const auto s = m2_smallset();
  const auto sc = build_split_chain(m2(), s);
  for (std::size_t k = 0; k < 2; ++k) {
    const double mixed = s.delta * sc.lifted().cost(2, k) + (1 - s.delta) * sc.lifted().cost(0, k);
    CHECK(mixed == doctest::Approx(m2().cost(0, k)).epsilon(1e-14));
    CHECK(sc.lifted().cost(1, k) == m2().cost(1, k));
    CHECK(sc.lifted().cost(2, k) == 0.0);
  }
}

TEST_CASE("delta_circ values and the zero-gap error") {
  CHECK(delta_circ(m2(), m2_smallset()) == doctest::Approx(15.0));
  FiniteMdp absorbing({{"a"}, {"a"}}, {{{1.0, 0.0}}, {{0.5, 0.5}}}, {{1.0}, {1.0}});
  CHECK(delta_circ(absorbing, SmallSetSpec{{0}, {1.0, 0.0}, 0.5}) == doctest::Approx(2.0));
  try {
    delta_circ(m2(), SmallSetSpec{{0}, {1.0, 0.0}, 0.5});
    FAIL("expected an error");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("delta too large for finite delta_circ") != std::string::npos);
  }
  // Construction still works; only delta_circ is unavailable.
  const auto sc = build_split_chain(m2(), SmallSetSpec{{0}, {1.0, 0.0}, 0.5});
  CHECK_FALSE(sc.delta_circ().has_value());
}

TEST_CASE("minorization failure names the witness") {
  try {
    build_split_chain(m2(), SmallSetSpec{{0}, {1.0, 0.0}, 0.6});
    FAIL("expected an error");
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x=0") != std::string::npos);
    CHECK(msg.find("u=b") != std::string::npos);
    CHECK(msg.find("y=0") != std::string::npos);
  }
  CHECK_FALSE(validate_small_set(m2(), SmallSetSpec{{0}, {0.5, 0.5}, 0.4}).empty());
}

TEST_CASE("rounding-level negatives in P - delta nu are clamped") {
  // P(0|0) = 0.3 and delta = 0.1 + 0.2 differ only by rounding.
  FiniteMdp m({{"a"}, {"a"}}, {{{0.3, 0.7}}, {{0.5, 0.5}}}, {{1.0}, {1.0}});
  const auto sc = build_split_chain(m, SmallSetSpec{{0}, {1.0, 0.0}, 0.1 + 0.2});
  for (double p : sc.lifted().row(0, 0)) CHECK(p >= 0.0);
}

TEST_CASE("split_measure and marginalize") {
  const auto s = m2_smallset();
  Vector mu(2);
  mu << 1.0, 0.0;
  Vector sm = split_measure(mu, s);
  CHECK(sm[0] == doctest::Approx(0.6));
  CHECK(sm[1] == doctest::Approx(0.0));
  CHECK(sm[2] == doctest::Approx(0.4));
  mu << 0.0, 1.0;
  sm = split_measure(mu, s);
  CHECK(sm[1] == 1.0);
  CHECK(sm[0] + sm[2] == 0.0);
  mu << 0.5, 0.5;
  sm = split_measure(mu, s);
  CHECK(sm[0] == doctest::Approx(0.3));
  CHECK(sm[1] == doctest::Approx(0.5));
  CHECK(sm[2] == doctest::Approx(0.2));
  CHECK((marginalize(sm, s, 2) - mu).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("one-step pushforward matches the base chain") {
  const auto s = m2_smallset();
  const auto sc = build_split_chain(m2(), s);
  const auto v = StationaryPolicy::deterministic({0, 0});
  Vector mu(2);
  mu << 1.0, 0.0;
  const Vector next = split_measure(mu, s).transpose() * policy_kernel(sc.lifted(), sc.lift(v));
  const Vector base = marginalize(next, s, 2);
  CHECK(base[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(base[1] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("n-step laws agree and split class is invariant") {
  const auto s = m2_smallset();
  const auto sc = build_split_chain(m2(), s);
  for (std::size_t pol = 0; pol < 4; ++pol) {
    const auto v = StationaryPolicy::deterministic({pol / 2, pol % 2});
    const Matrix p = policy_kernel(m2(), v);
    const Matrix q = policy_kernel(sc.lifted(), sc.lift(v));
    Vector mu(2);
    mu << 0.25, 0.75;
    Vector sm = split_measure(mu, s);
    for (int n = 1; n <= 20; ++n) {
      mu = (mu.transpose() * p).transpose();
      sm = (sm.transpose() * q).transpose();
      CHECK((marginalize(sm, s, 2) - mu).cwiseAbs().maxCoeff() < 1e-12);
      // (1-delta) mass at (0,1) = delta mass at (0,0)
      CHECK(std::abs((1 - s.delta) * sm[2] - s.delta * sm[0]) < 1e-12);
    }
  }
}

TEST_CASE("visits to B x {0} before the atom stay below delta_circ") {
  const auto sc = build_split_chain(m2(), m2_smallset());
  for (std::size_t pol = 0; pol < 4; ++pol) {
    const auto h = expected_visits_before_atom(sc, StationaryPolicy::deterministic({pol / 2, pol % 2}));
    for (std::size_t z = 0; z < 2; ++z) CHECK(h[z] <= 15.0 + 1e-9);
  }
}

TEST_CASE("immediate absorption gives the indicator") {
  // From (0,0) all mass goes to the atom when P(0|x) = 1 and delta is close to 1.
  FiniteMdp m({{"a"}, {"a"}}, {{{1.0, 0.0}}, {{1.0, 0.0}}}, {{1.0}, {1.0}});
  const auto sc = build_split_chain(m, SmallSetSpec{{0}, {1.0, 0.0}, 0.5});
  const auto h = expected_visits_before_atom(sc, StationaryPolicy::deterministic({0, 0}));
  // (0,0) returns to itself w.p. 1/2 and to the atom w.p. 1/2: 2 visits.
  CHECK(h[0] == doctest::Approx(2.0));
  // (1,0) is not in B and jumps into B.
  CHECK(h[1] == doctest::Approx(0.5 * 2.0 / 1.0));
  // Atom: exits to (0,0) w.p. 1/2, back to the atom otherwise.
  CHECK(h[2] == doctest::Approx(0.5 * h[0]));
}

TEST_CASE("unreachable atom is reported") {
  FiniteMdp m({{"a"}, {"a"}, {"a"}}, {{{0.5, 0.5, 0.0}}, {{0.5, 0.5, 0.0}}, {{0.0, 0.0, 1.0}}},
              {{1.0}, {1.0}, {1.0}});
  const auto sc = build_split_chain(m, SmallSetSpec{{0}, {1.0, 0.0, 0.0}, 0.25});
  CHECK_THROWS_AS(expected_visits_before_atom(sc, StationaryPolicy::deterministic({0, 0, 0})), SolverError);
}

TEST_CASE("first-return cost vanishes at the atom and folds to the Poisson solution") {
  const auto s = m2_smallset();
  const auto sc = build_split_chain(m2(), s);
  const auto v = StationaryPolicy::deterministic({0, 0});
  const auto g = first_return_cost(sc, v, 4.0 / 3.0);
  CHECK(std::abs(g[2]) < 1e-12);
  const ValueField folded = sc.fold(g);
  // Fold reproduces the potential with nu(G) = beta.
  CHECK(folded[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
  CHECK(folded[1] == doctest::Approx(14.0 / 3.0).epsilon(1e-10));
  const auto [G, beta] = solve_poisson(m2(), v, s);
  CHECK((folded.values - G.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("zero costs and zero beta give a zero first-return cost") {
  FiniteMdp zero({{"a", "b"}, {"a", "b"}}, {{{0.9, 0.1}, {0.5, 0.5}}, {{0.8, 0.2}, {0.2, 0.8}}},
                 {{0.0, 0.0}, {0.0, 0.0}}, 0.0);
  const auto sc = build_split_chain(zero, m2_smallset());
  const auto g = first_return_cost(sc, StationaryPolicy::deterministic({1, 1}), 0.0);
  CHECK(g.values.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("auto small set and delta") {
  const auto s = auto_small_set(m2());
  CHECK(s.B == std::vector<std::size_t>{0});
  CHECK(s.delta == doctest::Approx(0.45));
  CHECK(validate_small_set(m2(), s).empty());
  CHECK(delta_circ(m2(), s) > 0.0);
  FiniteMdp cyc({{"a"}, {"a"}}, {{{0.0, 1.0}}, {{1.0, 0.0}}}, {{1.0}, {1.0}});
  CHECK_THROWS_AS(auto_small_set(cyc), ModelError);
}
