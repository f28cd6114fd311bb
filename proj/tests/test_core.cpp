#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "piston/quadrature.hpp"
#include "piston/slow_state.hpp"

using namespace piston;
using Catch::Approx;

namespace {

Trajectory make_traj(std::vector<double> taus,
                     std::vector<std::array<double, 4>> rows) {
  Trajectory t;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    SlowState h;
    h.Q = rows[i][0];
    h.W = rows[i][1];
    h.left = {rows[i][2]};
    h.right = {rows[i][3]};
    t.push(taus[i], h);
  }
  return t;
}

}  // namespace

TEST_CASE("slow state distance is a max norm", "[core]") {
  SlowState a{0.5, 0.0, {0.5}, {0.5}, 1};
  SlowState b = a;
  CHECK(distance(a, b) == 0.0);
  b.W = 0.01;
  CHECK(distance(a, b) == Approx(0.01));
  b.right[0] = 0.52;
  CHECK(distance(a, b) == Approx(0.02));

  SlowState c{0.5, 0.0, {0.5, 0.5}, {0.5}, 1};
  CHECK_THROWS_AS(distance(a, c), ConfigError);
}

TEST_CASE("window membership and stopping time", "[core]") {
  Window win{0.2, 0.8, 2.0, 0.1, 1.0};
  win.validate();

  auto traj = make_traj({0.0, 0.1, 0.2, 0.3},
                        {{0.5, 0.0, 0.5, 0.5},
                         {0.55, 0.5, 0.45, 0.55},
                         {0.6, 1.0, 0.4, 0.6},
                         {0.19, 0.0, 0.4, 0.6}});
  CHECK(window_exit_time(traj, win) == Approx(0.3));

  auto inside = make_traj({0.0, 1.0}, {{0.5, 0, 0.5, 0.5}, {0.6, 0, 0.5, 0.5}});
  CHECK(window_exit_time(inside, win) == inf);

  Trajectory empty;
  CHECK_THROWS_AS(window_exit_time(empty, win), ConfigError);

  // monotone under window inclusion: a smaller window never stops later
  Window tight{0.3, 0.7, 1.5, 0.2, 0.9};
  REQUIRE(win.includes(tight));
  for (const auto& t : {traj, inside})
    CHECK(window_exit_time(t, tight) <= window_exit_time(t, win));
}

TEST_CASE("sup deviation basics", "[core]") {
  auto a = make_traj({0.0, 1.0}, {{0.5, 0, 0.5, 0.5}, {0.6, 0.2, 0.45, 0.55}});
  CHECK(sup_deviation(a, a, 1.0) == 0.0);

  auto b = a;
  for (auto& h : b.states) h.W += 0.01;
  CHECK(sup_deviation(a, b, 1.0) == Approx(0.01));
  CHECK(sup_deviation(b, a, 1.0) == Approx(0.01));  // symmetric
}

TEST_CASE("slow projection examples", "[core]") {
  // piston at rest, one unit-speed particle per side
  SlowState h{0.5, 0.0, {0.5}, {0.5}, 1};
  CHECK(h.slow_energy() == Approx(1.0));
  CHECK(SlowState::speed(0.5, 1.0) == Approx(1.0));

  // W = V/eps: V = 0.01 at M = 1e4 gives W = 1
  MassProfile mp{1e4, {1.0}, {1.0}};
  CHECK(0.01 / mp.epsilon() == Approx(1.0));

  // 2D velocity (0.6, 0.8) carries energy 0.5
  CHECK(0.5 * (0.6 * 0.6 + 0.8 * 0.8) == Approx(0.5));
}

TEST_CASE("trajectory CSV round trip", "[core]") {
  auto traj = make_traj({0.0, 0.125, 0.25},
                        {{0.5, 0.0, 0.5, 0.5},
                         {0.51, -0.125, 0.47, 0.53},
                         {0.52, 1.0 / 3.0, 0.44, 0.56}});
  std::stringstream ss;
  write_csv(ss, traj);
  std::string text = ss.str();
  CHECK(text.substr(0, text.find('\n')) == "tau,Q,W,E1_1,E2_1");

  auto back = read_csv(ss);
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(back.tau[i] == traj.tau[i]);  // bit-exact round trip
    CHECK(distance(back.states[i], traj.states[i]) == 0.0);
  }
}

TEST_CASE("adaptive quadrature", "[core]") {
  CHECK(integrate([](double x) { return x * x; }, 0, 1) ==
        Approx(1.0 / 3).epsilon(1e-12));
  CHECK(integrate([](double x) { return 4 / (1 + x * x); }, 0, 1) ==
        Approx(M_PI).epsilon(1e-12));
  CHECK(integrate([](double x) { return std::cos(50 * x); }, 0, 1) ==
        Approx(std::sin(50.0) / 50.0).epsilon(1e-10));
  // inverse-sqrt endpoint singularity after the turning-point substitution
  // x = 1 - w^2: integral of 1/sqrt(1-x) over [0,1] becomes smooth
  CHECK(integrate([](double) { return 2.0; }, 0, 1) == Approx(2.0));
  CHECK(integrate([](double w) { return 2 * std::sqrt(1 - w * w); }, 0, 1) ==
        Approx(M_PI / 2).epsilon(1e-9));
}
