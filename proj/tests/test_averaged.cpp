#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "piston/averaged.hpp"
#include "piston/common.hpp"
#include "piston/hardcore1d.hpp"

using namespace piston;
using namespace piston::averaged;
using Catch::Approx;

namespace {

SlowState state(double Q, double W, std::vector<double> e1,
                std::vector<double> e2, int dim = 1) {
  return SlowState{Q, W, std::move(e1), std::move(e2), dim};
}

}  // namespace

TEST_CASE("hard-core averaged field", "[averaged]") {
  Hard1D sys;
  SECTION("equal pressures balance") {
    auto d = sys.rhs(state(0.5, 0.0, {0.5}, {0.5}));
    CHECK(d.W == Approx(0.0).margin(1e-15));
    CHECK(d.Q == 0.0);
  }
  SECTION("m=1, s1=s2=1, Q=1/4 gives dW = 8/3") {
    auto d = sys.rhs(state(0.25, 0.0, {0.5}, {0.5}));
    CHECK(d.W == Approx(8.0 / 3.0));
  }
  SECTION("energies respond to W through ds = -sW/Q") {
    auto d = sys.rhs(state(0.5, 0.3, {0.5}, {0.5}));
    // dE1 = m s (-sW/Q) = -2 E W / Q
    CHECK(d.left[0] == Approx(-2 * 0.5 * 0.3 / 0.5));
    CHECK(d.right[0] == Approx(2 * 0.5 * 0.3 / 0.5));
  }
}

TEST_CASE("d-dimensional averaged field", "[averaged]") {
  DDim sys{2, 1.0, 0.0, 0.0};
  SECTION("symmetric two-dimensional state balances") {
    auto d = sys.rhs(state(0.5, 0.0, {1.0}, {1.0}, 2));
    CHECK(d.W == Approx(0.0).margin(1e-15));
  }
  SECTION("energy exchange rate") {
    auto d = sys.rhs(state(0.5, 0.4, {1.0}, {1.0}, 2));
    CHECK(d.left[0] == Approx(-2 * 0.4 * 1.0 * 1.0 / (2 * 0.5)));
  }
  SECTION("vanishing area is an error") {
    CHECK_THROWS_AS(sys.rhs(state(0.0, 0.0, {1.0}, {1.0}, 2)), NumericalError);
  }
}

TEST_CASE("d=1 field on rod geometry matches the hard-core field",
          "[averaged]") {
  Hard1D hard;
  DDim rod = DDim::hard_rod();
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    SlowState h = state(rng.uniform(0.2, 0.8), rng.uniform(-1, 1),
                        {rng.uniform(0.1, 1.0)}, {rng.uniform(0.1, 1.0)});
    SlowState a = hard.rhs(h);
    SlowState b = rod.rhs(h);
    CHECK(std::abs(a.W - b.W) <= 1e-13 * (1 + std::abs(a.W)));
    CHECK(std::abs(a.left[0] - b.left[0]) <= 1e-13 * (1 + std::abs(a.left[0])));
    CHECK(std::abs(a.right[0] - b.right[0]) <=
          1e-13 * (1 + std::abs(a.right[0])));
    CHECK(hard.invariant(h, h) == Approx(rod.invariant(h, h)).epsilon(1e-13));
  }
}

TEST_CASE("effective Hamiltonian at the initial state", "[averaged]") {
  Hard1D sys;
  SlowState h0 = state(0.4, 0.7, {0.6}, {0.3});
  CHECK(effective_hamiltonian(sys, h0, h0) ==
        Approx(0.5 * 0.49 + 0.6 + 0.3));
}

TEST_CASE("integrated averaged orbit conserves everything it should",
          "[averaged]") {
  Hard1D sys;
  SlowState h0 = state(0.5, 0.0, {0.605}, {0.405});
  auto res = integrate(sys, h0, 10.0, {.step = 1e-4, .sample_dtau = 1e-2});

  CHECK(res.max_invariant_drift <= 1e-8);

  // adiabatic law: s1 Q and s2 (1-Q) constant along the orbit
  double c1 = SlowState::speed(h0.left[0], 1.0) * h0.Q;
  double c2 = SlowState::speed(h0.right[0], 1.0) * (1 - h0.Q);
  for (const auto& h : res.trajectory.states) {
    CHECK(SlowState::speed(h.left[0], 1.0) * h.Q == Approx(c1).epsilon(1e-6));
    CHECK(SlowState::speed(h.right[0], 1.0) * (1 - h.Q) ==
          Approx(c2).epsilon(1e-6));
  }
}

TEST_CASE("adiabatic law in two dimensions", "[averaged]") {
  DDim sys{2, 0.5, 0.15, 0.15};
  SlowState h0 = state(0.5, 0.0, {0.6}, {0.4}, 2);
  auto res = integrate(sys, h0, 5.0, {.step = 1e-4, .sample_dtau = 1e-2});
  CHECK(res.max_invariant_drift <= 1e-8);
  double c1 = h0.left[0] * sys.area1(h0.Q);  // exponent 2/d = 1
  for (const auto& h : res.trajectory.states)
    CHECK(h.left[0] * sys.area1(h.Q) == Approx(c1).epsilon(1e-6));
}

TEST_CASE("mechanical equilibrium stays put", "[averaged]") {
  Hard1D sys;
  // P1 = 2E1/Q equals P2 = 2E2/(1-Q) at Q=0.4: E1/0.4 = E2/0.6
  SlowState h0 = state(0.4, 0.0, {0.4}, {0.6});
  auto res = integrate(sys, h0, 2.0, {});
  for (const auto& h : res.trajectory.states) {
    CHECK(h.Q == Approx(0.4).margin(1e-10));
    CHECK(h.W == Approx(0.0).margin(1e-10));
  }
  CHECK_FALSE(detect_period(res.dense).has_value());
}

TEST_CASE("generic orbits are periodic", "[averaged]") {
  Hard1D sys;
  SlowState h0 = state(0.5, 0.0, {0.605}, {0.405});
  auto res = integrate(sys, h0, 10.0, {});
  auto period = detect_period(res.dense);
  REQUIRE(period.has_value());

  // stable across two cycles
  DenseOutput tail;
  std::size_t half = res.dense.tau.size() / 3;
  tail.tau.assign(res.dense.tau.begin() + half, res.dense.tau.end());
  tail.h.assign(res.dense.h.begin() + half, res.dense.h.end());
  tail.dh.assign(res.dense.dh.begin() + half, res.dense.dh.end());
  auto period2 = detect_period(tail);
  REQUIRE(period2.has_value());
  CHECK(*period2 == Approx(*period).epsilon(1e-4));

  // the orbit returns to h0 after one period
  CHECK(distance(res.dense.at(*period), h0) < 1e-4);
}

TEST_CASE("closed-form energies", "[averaged]") {
  DDim sys{2, 1.0, 0.25, 0.25};
  SlowState h0 = state(0.25, 0.0, {0.8}, {0.4}, 2);
  SECTION("unchanged at Q0") {
    auto h = sys.adiabatic_energies(h0, h0.Q);
    CHECK(h.left[0] == h0.left[0]);
  }
  SECTION("doubling the area halves the energy when d=2") {
    // |D1|(0.25) = 0.5; |D1|(0.75) = 1.0
    auto h = sys.adiabatic_energies(h0, 0.75);
    CHECK(h.left[0] == Approx(0.4));
  }
  SECTION("d=1: halving Q quadruples the energy") {
    DDim rod = DDim::hard_rod();
    SlowState g0 = state(0.5, 0.0, {0.5}, {0.5});
    auto h = rod.adiabatic_energies(g0, 0.25);
    CHECK(h.left[0] == Approx(2.0));
  }
}

TEST_CASE("hopeless step is halved six times, then rejected", "[averaged]") {
  Hard1D sys;
  SlowState h0 = state(0.5, 0.0, {0.605}, {0.405});
  CHECK_THROWS_AS(integrate(sys, h0, 10.0, {.step = 50.0}), NumericalError);
}

TEST_CASE("window exit stops the integration", "[averaged]") {
  Hard1D sys;
  SlowState h0 = state(0.5, 0.0, {0.845}, {0.245});
  Window tiny{0.45, 0.55, 10.0, 1e-3, 5.0};
  auto res = integrate(sys, h0, 10.0, {.window = &tiny});
  CHECK(res.stopping_tau < 10.0);
  CHECK(res.trajectory.tau_end() == Approx(res.stopping_tau));
}

TEST_CASE("n-piston system", "[averaged]") {
  SECTION("two chambers reduce to the single-piston field") {
    NPiston sys{{1.0}, {0.6, 0.3}, {0.4, 0.6}};
    Hard1D hard;
    Rng rng(11);
    for (int k = 0; k < 40; ++k) {
      double Q = rng.uniform(0.25, 0.7);
      double W = rng.uniform(-1, 1);
      // chamber energies follow the adiabatic law from the shared h0
      double e1 = 0.6 * sq(0.4 / Q);
      double e2 = 0.3 * sq(0.6 / (1 - Q));
      auto d = sys.rhs({Q, W});
      SlowState h = state(Q, W, {e1}, {e2});
      SlowState dh = hard.rhs(h);
      CHECK(d[0] == Approx(W));
      CHECK(d[1] == Approx(dh.W).epsilon(1e-12));
    }
  }
  SECTION("equilibrium has vanishing piston accelerations") {
    // equal pressures 2E_i/gap_i in all three chambers
    NPiston sys{{1.0, 2.0}, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}};
    auto d = sys.rhs({0.2, 0.5, 0.0, 0.0});
    CHECK(d[2] == Approx(0.0).margin(1e-14));
    CHECK(d[3] == Approx(0.0).margin(1e-14));
  }
  SECTION("effective Hamiltonian conserved along the flow") {
    NPiston sys{{1.0, 1.5}, {0.5, 0.2, 0.4}, {0.3, 0.3, 0.4}};
    auto res = integrate_npiston(sys, {0.3, 0.6, 0.0, 0.0}, 10.0, 1e-4);
    CHECK(res.max_invariant_drift <= 1e-8);
  }
  SECTION("chamber collapse is an error") {
    NPiston sys{{1.0, 1.0}, {0.3, 0.3, 0.3}, {0.3, 0.4, 0.3}};
    CHECK_THROWS_AS(sys.rhs({0.5, 0.4, 0.0, 0.0}), NumericalError);
  }
}

TEST_CASE("two-piston event run follows the n-piston averaged flow",
          "[averaged][hard1d]") {
  auto run_dev = [](double mass) {
    double eps = 1.0 / std::sqrt(mass);
    hard1d::FullState1D st;
    st.pistons = {{0.3, 0.0, mass, 0}, {0.65, 0.0, mass, 0}};
    st.chambers = {{{0.12, 1.0, 1.0, 0}},
                   {{0.5, -std::sqrt(0.9), 1.0, 0}},
                   {{0.8, std::sqrt(0.8), 1.0, 0}}};
    hard1d::Engine eng(st);
    NPiston sys{{1.0, 1.0}, {0.5, 0.45, 0.4}, {0.3, 0.35, 0.35}};
    auto avg = integrate_npiston(sys, {0.3, 0.65, 0.0, 0.0}, 0.5, 1e-4, 1e-3);
    double dev = 0;
    for (std::size_t k = 0; k < avg.tau.size(); ++k) {
      double t = avg.tau[k] / eps;
      while (eng.next_event().time <= t) eng.step();
      auto s = eng.npiston_sample(t);
      const auto& a = avg.states[k];
      auto en = sys.energies(a);
      for (int i = 0; i < 4; ++i) dev = std::max(dev, std::abs(s[i] - a[i]));
      for (int c = 0; c < 3; ++c)
        dev = std::max(dev, std::abs(s[4 + c] - en[c]));
    }
    return dev;
  };
  double d4 = run_dev(1e4);
  double d6 = run_dev(1e6);
  CHECK(d4 < 0.05);
  CHECK(d6 < 0.005);
  // first-order rate: 100x the mass shrinks the deviation about 10x
  CHECK(d4 / d6 == Approx(10.0).margin(6.0));
}
