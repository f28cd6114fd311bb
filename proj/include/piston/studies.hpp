#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "piston/averaged.hpp"
#include "piston/billiard_flow.hpp"
#include "piston/common.hpp"
#include "piston/hardcore1d.hpp"
#include "piston/simulate2d.hpp"
#include "piston/softcore1d.hpp"

namespace piston::studies {

// ---------------------------------------------------------------------------
// Log-log rate fits.

struct RateFit {
  std::vector<double> x, y;  // log10 abscissa / ordinate
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

inline RateFit fit_loglog(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  if (xs.size() < 3 || xs.size() != ys.size())
    throw ConfigError("rate fit needs at least 3 points");
  RateFit fit;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.x.push_back(std::log10(xs[i]));
    fit.y.push_back(std::log10(ys[i]));
  }
  double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += fit.x[i];
    sy += fit.y[i];
    sxx += fit.x[i] * fit.x[i];
    sxy += fit.x[i] * fit.y[i];
    syy += fit.y[i] * fit.y[i];
  }
  double vxx = sxx - sx * sx / n;
  double vxy = sxy - sx * sy / n;
  double vyy = syy - sy * sy / n;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.r_squared = vyy > 0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Shared single-piston scenario: slow initial state fixed, fast phases
// seeded. Gas masses are 1.

struct Scenario1D {
  double q0 = 0.5;
  double w0 = 0.0;
  double s1 = 1.1;  // E1 = 0.605
  double s2 = 0.9;  // E2 = 0.405
  Window window{0.15, 0.9, 2.5, 0.05, 0.88};

  SlowState slow_state() const {
    return SlowState{q0, w0, {0.5 * sq(s1)}, {0.5 * sq(s2)}, 1};
  }
};

/// Phase draw at fixed slow state: position uniform in the chamber,
/// velocity sign random.
inline hard1d::FullState1D hard_initial(const Scenario1D& sc, double mass,
                                        Rng& rng) {
  double v1 = rng.coin() ? sc.s1 : -sc.s1;
  double v2 = rng.coin() ? sc.s2 : -sc.s2;
  double q1 = rng.uniform(0.02, sc.q0 - 0.02);
  double q2 = rng.uniform(sc.q0 + 0.02, 0.98);
  return hard1d::FullState1D::single(sc.q0, mass == inf ? 0.0 : sc.w0 / std::sqrt(mass),
                                     mass, {{q1, v1, 1.0, 0}},
                                     {{q2, v2, 1.0, 0}});
}

template <InteractionKernel K>
soft1d::System<K> soft_initial(const Scenario1D& sc, double mass, double delta,
                               const K& kernel, Rng& rng) {
  soft1d::System<K> sys;
  sys.pot = Smoothing<K>{kernel, delta};
  sys.eps = 1.0 / std::sqrt(mass);
  sys.Q = sc.q0;
  sys.W = sc.w0;
  // interior positions: the particle energy is then purely kinetic, so the
  // slow state matches the hard-core one exactly
  double v1 = rng.coin() ? sc.s1 : -sc.s1;
  double v2 = rng.coin() ? sc.s2 : -sc.s2;
  sys.left = {{rng.uniform(delta * 1.5, sc.q0 - 1.5 * delta), v1, 1.0}};
  sys.right = {{rng.uniform(sc.q0 + 1.5 * delta, 1 - 1.5 * delta), v2, 1.0}};
  return sys;
}

// ---------------------------------------------------------------------------
// Mass-rate study: 1D hard core, worst-case deviation over a seed
// ensemble at each piston mass, fitted against M in log-log.

struct Convergence1DConfig {
  std::vector<double> masses{1e2, 1e3, 1e4, 1e5, 1e6};
  int seeds = 32;
  double tau_end = 1.0;
  double dtau = 1e-3;
  std::uint64_t base_seed = 20240901;
  Scenario1D scenario;
  unsigned threads = 1;
};

struct EnsembleRow {
  double mass = 0;
  double epsilon = 0;
  double delta = 0;
  double worst = 0;
  double least = inf;
  int used = 0;
  int excluded = 0;
};

struct Convergence1DResult {
  std::vector<EnsembleRow> rows;
  RateFit fit;  // log10(worst) vs log10(M)
};

inline double deviation_for_run(const Trajectory& actual,
                                const Trajectory& averaged,
                                const Window& window, double tau_end,
                                double dtau, double* tau_lim_out = nullptr) {
  double t_stop = std::min({tau_end, window_exit_time(actual, window),
                            window_exit_time(averaged, window)});
  if (tau_lim_out) *tau_lim_out = t_stop;
  return sup_deviation(actual, averaged, std::min(tau_end, t_stop), dtau);
}

inline Convergence1DResult convergence_1d(const Convergence1DConfig& cfg) {
  Convergence1DResult out;
  averaged::Hard1D model;
  SlowState h0 = cfg.scenario.slow_state();

  for (double mass : cfg.masses) {
    double eps = 1.0 / std::sqrt(mass);
    averaged::IntegrateOptions iopt;
    iopt.sample_dtau = cfg.dtau;
    iopt.window = &cfg.scenario.window;
    auto avg = averaged::integrate(model, h0, cfg.tau_end, iopt);

    EnsembleRow row;
    row.mass = mass;
    row.epsilon = eps;
    std::vector<double> devs(cfg.seeds, -1.0);
    parallel_for(cfg.seeds, cfg.threads, [&](std::size_t s) {
      Rng rng(derive_seed(cfg.base_seed, std::uint64_t(s)));
      auto init = hard_initial(cfg.scenario, mass, rng);
      auto sim = hard1d::simulate(init, cfg.tau_end / eps,
                                  {.sample_dt = cfg.dtau / eps});
      double tau_lim = 0;
      double dev = deviation_for_run(sim.trajectory, avg.trajectory,
                                     cfg.scenario.window, cfg.tau_end,
                                     cfg.dtau, &tau_lim);
      devs[s] = tau_lim < cfg.tau_end / 4 ? -1.0 : dev;
    });
    for (double d : devs) {
      if (d < 0) {
        ++row.excluded;
        continue;
      }
      row.worst = std::max(row.worst, d);
      row.least = std::min(row.least, d);
      ++row.used;
    }
    out.rows.push_back(row);
  }

  std::vector<double> ms, ws;
  for (const auto& r : out.rows)
    if (r.used > 0) {
      ms.push_back(r.mass);
      ws.push_back(r.worst);
    }
  if (ms.size() >= 3) out.fit = fit_loglog(ms, ws);
  return out;
}

// ---------------------------------------------------------------------------
// Soft-core uniformity in delta: deviation between the soft dynamics and
// the soft averaged flow, per (delta, mass); slopes fitted per delta.

template <InteractionKernel K = CubicKernel>
struct SoftUniformityConfig {
  std::vector<double> deltas{0.02, 0.05, 0.1};
  std::vector<double> masses{1e3, 1e4, 1e5};
  int seeds = 8;
  double tau_end = 1.0;
  double dtau = 1e-3;
  std::uint64_t base_seed = 7151;
  Scenario1D scenario{0.5, 0.0, 1.1, 0.9, Window{0.2, 0.85, 2.0, 0.2, 0.8}};
  K kernel{};
  unsigned threads = 1;
};

struct SoftUniformityResult {
  std::vector<EnsembleRow> rows;          // one per (delta, mass)
  std::vector<double> deltas;
  std::vector<RateFit> fits;              // per delta, vs M
};

template <InteractionKernel K>
SoftUniformityResult soft_uniformity(const SoftUniformityConfig<K>& cfg) {
  SoftUniformityResult out;
  out.deltas = cfg.deltas;
  SlowState h0 = cfg.scenario.slow_state();

  for (double delta : cfg.deltas) {
    soft1d::SoftAveraged<K> model{Smoothing<K>{cfg.kernel, delta}, {1.0}, {1.0}};
    averaged::IntegrateOptions iopt;
    iopt.step = 1e-3;
    iopt.sample_dtau = cfg.dtau;
    iopt.window = &cfg.scenario.window;
    auto avg = averaged::integrate(model, h0, cfg.tau_end, iopt);

    std::vector<double> ms, ws;
    for (double mass : cfg.masses) {
      double eps = 1.0 / std::sqrt(mass);
      EnsembleRow row;
      row.mass = mass;
      row.epsilon = eps;
      row.delta = delta;
      std::vector<double> devs(cfg.seeds, -1.0);
      parallel_for(cfg.seeds, cfg.threads, [&](std::size_t s) {
        Rng rng(derive_seed(cfg.base_seed, std::uint64_t(s)));
        auto sys = soft_initial(cfg.scenario, mass, delta, cfg.kernel, rng);
        soft1d::StepControl ctl;
        ctl.sample_dt = cfg.dtau / eps;
        auto sim = soft1d::integrate_soft(sys, cfg.tau_end / eps, ctl);
        double tau_lim = 0;
        double dev = deviation_for_run(sim.trajectory, avg.trajectory,
                                       cfg.scenario.window, cfg.tau_end,
                                       cfg.dtau, &tau_lim);
        devs[s] = tau_lim < cfg.tau_end / 4 ? -1.0 : dev;
      });
      for (double d : devs) {
        if (d < 0) {
          ++row.excluded;
          continue;
        }
        row.worst = std::max(row.worst, d);
        row.least = std::min(row.least, d);
        ++row.used;
      }
      out.rows.push_back(row);
      if (row.used > 0) {
        ms.push_back(mass);
        ws.push_back(row.worst);
      }
    }
    out.fits.push_back(fit_loglog(ms, ws));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hard/soft comparison at matched slow initial data: sup over fast time of
// the slow-state distance between the two engines.

template <InteractionKernel K = CubicKernel>
struct CompareConfig {
  std::vector<double> deltas{0.1, 0.05, 0.025};
  double mass = 1e6;
  int seeds = 4;
  double tau_end = 1.0;
  double dtau = 1e-3;
  std::uint64_t base_seed = 40961;
  Scenario1D scenario{0.5, 0.0, 1.1, 0.9, Window{0.2, 0.85, 2.0, 0.2, 0.8}};
  K kernel{};
  unsigned threads = 1;
};

struct CompareRow {
  double delta = 0;
  double mass = 0;
  double worst = 0;  // sup_t |h^delta(t) - h^0(t)| over the seed ensemble
};

struct CompareResult {
  std::vector<CompareRow> rows;
};

template <InteractionKernel K>
CompareResult hard_soft_comparison(const CompareConfig<K>& cfg) {
  CompareResult out;
  double eps = 1.0 / std::sqrt(cfg.mass);
  for (double delta : cfg.deltas) {
    CompareRow row;
    row.delta = delta;
    row.mass = cfg.mass;
    std::vector<double> devs(cfg.seeds, 0.0);
    parallel_for(cfg.seeds, cfg.threads, [&](std::size_t s) {
      Rng rng(derive_seed(cfg.base_seed, std::uint64_t(s)));
      auto soft_sys = soft_initial(cfg.scenario, cfg.mass, delta, cfg.kernel, rng);
      // matched initial data: the hard run starts at the same phase point
      auto hard_init = hard1d::FullState1D::single(
          soft_sys.Q, eps * soft_sys.W, cfg.mass,
          {{soft_sys.left[0].q, soft_sys.left[0].v, 1.0, 0}},
          {{soft_sys.right[0].q, soft_sys.right[0].v, 1.0, 0}});
      soft1d::StepControl ctl;
      ctl.sample_dt = cfg.dtau / eps;
      auto soft_run = soft1d::integrate_soft(soft_sys, cfg.tau_end / eps, ctl);
      auto hard_run = hard1d::simulate(hard_init, cfg.tau_end / eps,
                                       {.sample_dt = cfg.dtau / eps});
      devs[s] = sup_deviation(soft_run.trajectory, hard_run.trajectory,
                              cfg.tau_end, cfg.dtau);
    });
    for (double d : devs) row.worst = std::max(row.worst, d);
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2D convergence in probability on a container preset: ensemble fractions
// of runs with sup deviation above a threshold, plus the non-clean-collision
// diagnostic. Initial conditions sample the slow target: positions uniform
// in each chamber, directions uniform, speeds fixed, W(0) = 0.

struct Probability2DConfig {
  std::string preset = "sinai";
  std::vector<double> masses{1e4, 1e5, 1e6};
  int ensemble = 64;
  double threshold = 0.1;
  double e1 = 0.6, e2 = 0.4;
  double q0 = 0.5;
  double tau_end = 1.0;
  double dtau = 1e-3;
  Window window{0.2, 0.9, 2.0, 0.05, 1.8};
  std::uint64_t base_seed = 90210;
  unsigned threads = 1;
};

struct Probability2DRow {
  double mass = 0;
  double epsilon = 0;
  double fraction_above = 0;   // P{sup dev >= threshold}
  double fraction_nonclean = 0;
  int resampled = 0;
  int runs = 0;
};

struct Probability2DResult {
  std::vector<Probability2DRow> rows;
};

inline Probability2DResult probability_2d(const Probability2DConfig& cfg) {
  Probability2DResult out;
  auto dom = billiard::BilliardDomain::preset(cfg.preset);
  averaged::DDim model{2, dom.ell, dom.area(Side::Left, 0.0),
                       dom.area(Side::Right, 1.0)};
  SlowState h0{cfg.q0, 0.0, {cfg.e1}, {cfg.e2}, 2};

  billiard::Chamber left(dom, Side::Left, cfg.q0);
  billiard::Chamber right(dom, Side::Right, cfg.q0);

  for (double mass : cfg.masses) {
    double eps = 1.0 / std::sqrt(mass);
    averaged::IntegrateOptions iopt;
    iopt.sample_dtau = cfg.dtau;
    iopt.window = &cfg.window;
    auto avg = averaged::integrate(model, h0, cfg.tau_end, iopt);

    Probability2DRow row;
    row.mass = mass;
    row.epsilon = eps;
    row.runs = cfg.ensemble;
    std::vector<int> above(cfg.ensemble, 0), nonclean(cfg.ensemble, 0),
        redraws(cfg.ensemble, 0);
    parallel_for(cfg.ensemble, cfg.threads, [&](std::size_t r) {
      for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(derive_seed(cfg.base_seed + 1000003 * attempt,
                            std::uint64_t(r)));
        billiard::FullState2D st;
        st.Q = cfg.q0;
        st.V = 0;
        st.M = mass;
        double a1 = rng.uniform(0, 2 * M_PI), a2 = rng.uniform(0, 2 * M_PI);
        st.left = {{billiard::sample_chamber_point(left, rng),
                    billiard::Vec2{std::cos(a1), std::sin(a1)} *
                        std::sqrt(2 * cfg.e1),
                    0}};
        st.right = {{billiard::sample_chamber_point(right, rng),
                     billiard::Vec2{std::cos(a2), std::sin(a2)} *
                         std::sqrt(2 * cfg.e2),
                     0}};
        try {
          // E_max in the clean-collision test bounds the total slow energy
          // W^2/2 + E1 + E2 over the window
          double e_max_total = 0.5 * sq(cfg.window.w_bound) + 2 * cfg.window.e_max;
          auto sim = billiard::simulate_2d(
              dom, st, cfg.tau_end / eps,
              {.sample_dt = cfg.dtau / eps, .e_max = e_max_total});
          double t_stop =
              std::min({cfg.tau_end, window_exit_time(sim.trajectory, cfg.window),
                        window_exit_time(avg.trajectory, cfg.window)});
          double dev =
              sup_deviation(sim.trajectory, avg.trajectory, t_stop, cfg.dtau);
          above[r] = dev >= cfg.threshold ? 1 : 0;
          nonclean[r] = sim.counts.non_clean > 0 ? 1 : 0;
          break;
        } catch (const billiard::SingularTrajectory&) {
          ++redraws[r];
          if (attempt > 50)
            throw NumericalError("2D ensemble keeps hitting singularities");
        }
      }
    });
    for (int x : above) row.fraction_above += x;
    for (int x : nonclean) row.fraction_nonclean += x;
    for (int x : redraws) row.resampled += x;
    row.fraction_above /= cfg.ensemble;
    row.fraction_nonclean /= cfg.ensemble;
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classical averaging demos: three systems with known averaged flows, swept
// over eps with the sup deviation fitted against log10(1/eps).

struct DemoConfig {
  std::vector<double> epsilons{1e-1, 1e-2, 1e-3, 1e-4};
  double tau_end = 1.0;
  double step = 5e-3;  // fast-time RK4 step
};

struct DemoResult {
  std::string name;
  std::vector<double> deviations;  // one per epsilon
  RateFit fit;                     // log10(dev) vs log10(1/eps)
};

namespace detail {

template <class F>
std::vector<double> rk4_step(const F& f, const std::vector<double>& y,
                             double t, double h) {
  auto axpy = [](const std::vector<double>& a, double c,
                 const std::vector<double>& b) {
    std::vector<double> r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += c * b[i];
    return r;
  };
  auto k1 = f(t, y);
  auto k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
  auto k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
  auto k4 = f(t + h, axpy(y, h, k3));
  std::vector<double> out = y;
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return out;
}

/// Integrates dh/dt = eps H(...) over [0, tau_end/eps] and returns the sup
/// over the run of |h(t) - hbar(eps t)|.
template <class F, class Avg>
double demo_deviation(const F& f, std::vector<double> y, int slow_index,
                      const Avg& hbar, double eps, double tau_end,
                      double step) {
  double t = 0, t_end = tau_end / eps;
  double dev = std::abs(y[std::size_t(slow_index)] - hbar(0.0));
  while (t < t_end) {
    double h = std::min(step, t_end - t);
    y = rk4_step(f, y, t, h);
    t += h;
    dev = std::max(dev,
                   std::abs(y[std::size_t(slow_index)] - hbar(eps * t)));
  }
  return dev;
}

}  // namespace detail

/// (a) time-periodic: dh/dt = eps (cos t + eps); averaged field 0.
/// (b) one regular fast phase: dh/dt = eps (sin^2(2 pi phi) - h),
///     dphi/dt = 1 + cos(2 pi phi)/2; averaged dh/dtau = m1 - h with
///     m1 = 2 sqrt(3) - 3 from the 1/Phi-weighted phase average.
/// (c) two separable phases at commensurate frequencies 1 and 2:
///     dh/dt = eps (cos^2(2 pi phi1) - h/2 + 0.3 sin(2 pi phi2) - h/2);
///     averaged dh/dtau = 1/2 - h.
inline std::vector<DemoResult> averaging_demos(const DemoConfig& cfg = {}) {
  std::vector<DemoResult> results;

  {
    DemoResult res;
    res.name = "time-periodic";
    for (double eps : cfg.epsilons) {
      auto f = [eps](double t, const std::vector<double>&) {
        return std::vector<double>{eps * (std::cos(t) + eps)};
      };
      res.deviations.push_back(detail::demo_deviation(
          f, {0.3}, 0, [](double) { return 0.3; }, eps, cfg.tau_end,
          cfg.step));
    }
    results.push_back(std::move(res));
  }

  {
    DemoResult res;
    res.name = "one-fast-phase";
    const double m1 = 2 * std::sqrt(3.0) - 3;  // = 0.4641016151377546
    for (double eps : cfg.epsilons) {
      auto f = [eps](double, const std::vector<double>& y) {
        double s = std::sin(2 * M_PI * y[1]);
        return std::vector<double>{eps * (s * s - y[0]),
                                   1 + 0.5 * std::cos(2 * M_PI * y[1])};
      };
      double h0 = 0.1;
      auto hbar = [&](double tau) { return m1 + (h0 - m1) * std::exp(-tau); };
      res.deviations.push_back(detail::demo_deviation(
          f, {h0, 0.2}, 0, hbar, eps, cfg.tau_end, cfg.step));
    }
    results.push_back(std::move(res));
  }

  {
    DemoResult res;
    res.name = "two-separable-phases";
    for (double eps : cfg.epsilons) {
      auto f = [eps](double, const std::vector<double>& y) {
        double c = std::cos(2 * M_PI * y[1]);
        double s = std::sin(2 * M_PI * y[2]);
        return std::vector<double>{eps * (c * c - y[0] + 0.3 * s), 1.0, 2.0};
      };
      double h0 = 0.2;
      auto hbar = [&](double tau) {
        return 0.5 + (h0 - 0.5) * std::exp(-tau);
      };
      res.deviations.push_back(detail::demo_deviation(
          f, {h0, 0.05, 0.6}, 0, hbar, eps, cfg.tau_end, cfg.step));
    }
    results.push_back(std::move(res));
  }

  for (auto& res : results) {
    std::vector<double> inv;
    for (double e : cfg.epsilons) inv.push_back(1.0 / e);
    res.fit = fit_loglog(inv, res.deviations);
  }
  return results;
}

// ---------------------------------------------------------------------------
// Billiard-measure studies (Santalo, induced map, flux), packaged for the
// CLI and acceptance suite.

struct SantaloStudyRow {
  std::string label;
  double estimate = 0;
  double predicted = 0;
  std::uint64_t samples = 0;
};

inline SantaloStudyRow santalo_study(const billiard::BilliardDomain& dom,
                                     Side side, double Q, double speed,
                                     std::uint64_t samples, Rng& rng) {
  billiard::Chamber ch(dom, side, Q);
  auto res = billiard::mean_free_flight(ch, speed, samples, rng);
  return {dom.name, res.estimate, res.predicted, samples};
}

struct FluxStudyRow {
  double time_average = 0;
  double predicted = 0;
  double relative_error = 0;
  std::uint64_t face_hits = 0;
};

inline FluxStudyRow flux_study(const billiard::BilliardDomain& dom, Side side,
                               double Q, double speed,
                               std::uint64_t face_hits, Rng& rng) {
  billiard::Chamber ch(dom, side, Q);
  for (int attempt = 0; attempt < 64; ++attempt) {
    try {
      auto q = billiard::sample_chamber_point(ch, rng);
      double ang = rng.uniform(0, 2 * M_PI);
      auto res = billiard::momentum_flux_average(
          ch, q, billiard::Vec2{std::cos(ang), std::sin(ang)} * speed,
          face_hits);
      return {res.time_average, res.predicted,
              std::abs(res.time_average - res.predicted) / res.predicted,
              res.face_hits};
    } catch (const billiard::SingularTrajectory&) {
      continue;  // resample the initial condition
    }
  }
  throw NumericalError("flux study keeps hitting singular trajectories");
}

}  // namespace piston::studies
