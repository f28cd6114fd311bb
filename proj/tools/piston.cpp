// Command-line front end: config parsing, seed management, subcommand
// dispatch, output persistence. Every run leaves its outputs plus a
// manifest (config hash, seed, version, timestamps, file list) in --out.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "piston/studies.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace piston;

namespace {

// ---------------------------------------------------------------------------
// Run context: output directory, manifest bookkeeping.

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct RunContext {
  fs::path out_dir;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string config_text;
  json config;
  std::vector<std::string> outputs;
  std::string started = timestamp();

  fs::path path(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream os(path(name));
    os << j.dump(2) << '\n';
  }

  void write_manifest() {
    json m;
    m["tool"] = "piston";
    m["version"] = version;
    m["config_hash"] = fnv1a(config_text);
    m["base_seed"] = seed;
    m["threads"] = threads;
    m["started"] = started;
    m["finished"] = timestamp();
    m["outputs"] = outputs;
    fs::path tmp = out_dir / ".manifest.json.tmp";
    {
      std::ofstream os(tmp);
      os << m.dump(2) << '\n';
    }
    fs::rename(tmp, out_dir / "manifest.json");
  }
};

json load_config(const std::string& file, RunContext& ctx) {
  if (file.empty()) {
    ctx.config_text = "{}";
    ctx.config = json::object();
    return ctx.config;
  }
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file: " + file);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  try {
    ctx.config = json::parse(text);
  } catch (const json::parse_error& e) {
    // translate the byte offset into a line/column diagnostic
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("malformed JSON in " + file + " at line " +
                      std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  ctx.config_text = text;
  return ctx.config;
}

template <class T>
T get_or(const json& j, const std::string& key, T def) {
  return j.contains(key) ? j.at(key).get<T>() : def;
}

Window parse_window(const json& j, Window def = {}) {
  Window w = def;
  if (j.is_object()) {
    w.q_min = get_or(j, "Qmin", w.q_min);
    w.q_max = get_or(j, "Qmax", w.q_max);
    w.w_bound = get_or(j, "Wbound", w.w_bound);
    w.e_min = get_or(j, "Emin", w.e_min);
    w.e_max = get_or(j, "Emax", w.e_max);
  }
  w.validate();
  return w;
}

studies::Scenario1D parse_scenario(const json& cfg,
                                   studies::Scenario1D def = {}) {
  studies::Scenario1D sc = def;
  if (cfg.contains("scenario")) {
    const json& j = cfg.at("scenario");
    sc.q0 = get_or(j, "Q0", sc.q0);
    sc.w0 = get_or(j, "W0", sc.w0);
    sc.s1 = get_or(j, "s1", sc.s1);
    sc.s2 = get_or(j, "s2", sc.s2);
  }
  if (cfg.contains("window")) sc.window = parse_window(cfg.at("window"), sc.window);
  return sc;
}

billiard::BilliardDomain parse_domain(const json& cfg,
                                      const std::string& preset_flag) {
  if (!preset_flag.empty()) return billiard::BilliardDomain::preset(preset_flag);
  if (cfg.contains("domain")) {
    const json& d = cfg.at("domain");
    if (d.is_string()) return billiard::BilliardDomain::preset(d.get<std::string>());
    billiard::BilliardDomain dom;
    dom.ell = d.at("ell").get<double>();
    dom.name = get_or<std::string>(d, "name", "custom");
    for (const auto& s : d.value("segments", json::array()))
      dom.pieces.push_back(billiard::Piece::segment(
          {s.at("ax").get<double>(), s.at("ay").get<double>()},
          {s.at("bx").get<double>(), s.at("by").get<double>()}));
    for (const auto& a : d.value("arcs", json::array()))
      dom.pieces.push_back(billiard::Piece::arc(
          {a.at("cx").get<double>(), a.at("cy").get<double>()},
          a.at("r").get<double>(), a.at("theta0").get<double>(),
          a.at("theta1").get<double>(), get_or(a, "ccw", true)));
    dom.validate();
    return dom;
  }
  if (cfg.contains("preset"))
    return billiard::BilliardDomain::preset(cfg.at("preset").get<std::string>());
  return billiard::BilliardDomain::preset("sinai");
}

void write_trajectory_csv(RunContext& ctx, const std::string& name,
                          const Trajectory& traj,
                          const std::vector<std::string>& extra_cols = {},
                          const std::vector<std::vector<double>>& extra = {}) {
  std::ofstream os(ctx.path(name));
  write_csv(os, traj, extra_cols, extra);
}

Side parse_side(const json& cfg) {
  std::string s = get_or<std::string>(cfg, "side", "left");
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw ConfigError("side must be 'left' or 'right'");
}

// ---------------------------------------------------------------------------
// simulate-1d

int run_simulate_1d(RunContext& ctx, double mass_flag, double tau_end_flag) {
  const json& cfg = ctx.config;
  double mass = mass_flag > 0 ? mass_flag : get_or(cfg, "mass", 1e4);
  if (get_or(cfg, "frozen", false)) mass = inf;
  double t_end = get_or(cfg, "tEnd", 1000.0);
  if (tau_end_flag > 0 && !std::isinf(mass))
    t_end = tau_end_flag * std::sqrt(mass);
  double sample = get_or(cfg, "sampleEvery", 1.0);

  hard1d::FullState1D init;
  if (cfg.contains("initial")) {
    const json& j = cfg.at("initial");
    std::vector<hard1d::Particle> left, right;
    for (const auto& p : j.at("left"))
      left.push_back({p.at("q").get<double>(), p.at("v").get<double>(),
                      get_or(p, "m", 1.0), 0});
    for (const auto& p : j.at("right"))
      right.push_back({p.at("q").get<double>(), p.at("v").get<double>(),
                       get_or(p, "m", 1.0), 0});
    init = hard1d::FullState1D::single(j.at("Q").get<double>(),
                                       get_or(j, "V", 0.0), mass,
                                       std::move(left), std::move(right));
  } else {
    Rng rng(ctx.seed);
    init = studies::hard_initial(parse_scenario(cfg), mass, rng);
  }

  auto res = hard1d::simulate(init, t_end, {.sample_dt = sample});
  write_trajectory_csv(ctx, "trajectory.csv", res.trajectory);
  json summary;
  summary["events"] = {{"particle_piston", res.counts.particle_piston},
                       {"particle_wall", res.counts.particle_wall},
                       {"piston_wall", res.counts.piston_wall},
                       {"grazing", res.counts.grazing}};
  summary["energy_initial"] = res.energy_initial;
  summary["energy_final"] = res.energy_final;
  summary["energy_drift"] = res.energy_drift();
  summary["end_time"] = res.end_time;
  ctx.write_json("events.json", summary);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate-soft

template <InteractionKernel K>
int run_simulate_soft_kernel(RunContext& ctx, const K& kernel, double delta,
                             double mass, double t_end) {
  const json& cfg = ctx.config;
  soft1d::StepControl ctl;
  ctl.resolution = get_or(cfg, "resolution", 50.0);
  ctl.sample_dt = get_or(cfg, "sampleEvery", 1.0);
  ctl.drift_tol = get_or(cfg, "driftTol", 1e-8);

  Rng rng(ctx.seed);
  auto sys = studies::soft_initial(parse_scenario(cfg), mass, delta, kernel, rng);
  if (cfg.contains("initial")) {
    const json& j = cfg.at("initial");
    sys.Q = j.at("Q").get<double>();
    sys.W = get_or(j, "W", 0.0);
    sys.left.clear();
    sys.right.clear();
    for (const auto& p : j.at("left"))
      sys.left.push_back({p.at("q").get<double>(), p.at("v").get<double>(),
                          get_or(p, "m", 1.0)});
    for (const auto& p : j.at("right"))
      sys.right.push_back({p.at("q").get<double>(), p.at("v").get<double>(),
                           get_or(p, "m", 1.0)});
  }

  auto res = soft1d::integrate_soft(sys, t_end, ctl);
  write_trajectory_csv(ctx, "trajectory.csv", res.trajectory);

  // energies against fast time, one row per sample
  {
    std::ofstream os(ctx.path("energies.csv"));
    std::size_t n1 = res.trajectory.states.front().left.size();
    std::size_t n2 = res.trajectory.states.front().right.size();
    os << "t";
    for (std::size_t j = 0; j < n1; ++j) os << ",E1_" << (j + 1);
    for (std::size_t j = 0; j < n2; ++j) os << ",E2_" << (j + 1);
    os << ",piston,total\n";
    double eps = res.trajectory.epsilon;
    for (std::size_t i = 0; i < res.trajectory.size(); ++i) {
      const SlowState& h = res.trajectory.states[i];
      double t = eps > 0 ? res.trajectory.tau[i] / eps : res.trajectory.tau[i];
      os << format_double(t);
      for (double e : h.left) os << ',' << format_double(e);
      for (double e : h.right) os << ',' << format_double(e);
      os << ',' << format_double(0.5 * sq(h.W)) << ','
         << format_double(h.slow_energy()) << '\n';
    }
  }

  json summary;
  summary["delta"] = delta;
  summary["kernel"] = kernel.name();
  summary["step"] = res.step;
  summary["steps"] = res.steps;
  summary["energy_drift"] = res.energy_drift();
  summary["max_drift"] = res.max_drift;
  ctx.write_json("summary.json", summary);
  return 0;
}

int run_simulate_soft(RunContext& ctx, double mass_flag, double delta_flag,
                      double tau_end_flag) {
  const json& cfg = ctx.config;
  double mass = mass_flag > 0 ? mass_flag : get_or(cfg, "mass", 1e4);
  double delta = delta_flag > 0 ? delta_flag : get_or(cfg, "delta", 0.1);
  double t_end = get_or(cfg, "tEnd", 100.0);
  if (tau_end_flag > 0) t_end = tau_end_flag * std::sqrt(mass);
  std::string kernel = get_or<std::string>(cfg, "kernel", "cubic");
  if (kernel == "cubic")
    return run_simulate_soft_kernel(ctx, CubicKernel{}, delta, mass, t_end);
  if (kernel == "quartic")
    return run_simulate_soft_kernel(ctx, QuarticKernel{}, delta, mass, t_end);
  throw ConfigError("unknown kernel: " + kernel);
}

// ---------------------------------------------------------------------------
// simulate-2d

int run_simulate_2d(RunContext& ctx, const std::string& preset_flag,
                    double mass_flag, double tau_end_flag) {
  const json& cfg = ctx.config;
  auto dom = parse_domain(cfg, preset_flag);
  double mass = mass_flag > 0 ? mass_flag : get_or(cfg, "mass", 1e4);
  if (get_or(cfg, "frozen", false)) mass = inf;
  double t_end = get_or(cfg, "tEnd", 100.0);
  if (tau_end_flag > 0 && !std::isinf(mass))
    t_end = tau_end_flag * std::sqrt(mass);

  billiard::FullState2D st;
  st.M = mass;
  if (cfg.contains("initial")) {
    const json& j = cfg.at("initial");
    st.Q = j.at("Q").get<double>();
    st.V = get_or(j, "V", 0.0);
    auto read = [](const json& arr) {
      std::vector<billiard::Particle2D> out;
      for (const auto& p : arr)
        out.push_back({{p.at("x").get<double>(), p.at("y").get<double>()},
                       {p.at("vx").get<double>(), p.at("vy").get<double>()},
                       0});
      return out;
    };
    st.left = read(j.at("left"));
    st.right = read(j.at("right"));
  } else {
    st.Q = get_or(cfg, "Q0", 0.5);
    st.V = 0;
    double e1 = get_or(cfg, "E1", 0.6), e2 = get_or(cfg, "E2", 0.4);
    Rng rng(ctx.seed);
    billiard::Chamber cl(dom, Side::Left, st.Q), cr(dom, Side::Right, st.Q);
    double a1 = rng.uniform(0, 2 * M_PI), a2 = rng.uniform(0, 2 * M_PI);
    st.left = {{billiard::sample_chamber_point(cl, rng),
                billiard::Vec2{std::cos(a1), std::sin(a1)} * std::sqrt(2 * e1),
                0}};
    st.right = {{billiard::sample_chamber_point(cr, rng),
                 billiard::Vec2{std::cos(a2), std::sin(a2)} * std::sqrt(2 * e2),
                 0}};
  }

  billiard::Simulate2DOptions opt;
  opt.sample_dt = get_or(cfg, "sampleEvery", 1.0);
  opt.e_max = get_or(cfg, "Emax", 2.0);
  auto res = billiard::simulate_2d(dom, st, t_end, opt);
  write_trajectory_csv(ctx, "trajectory.csv", res.trajectory);
  json summary;
  summary["domain"] = dom.name;
  summary["events"] = {{"boundary", res.counts.boundary},
                       {"piston", res.counts.piston},
                       {"piston_wall", res.counts.piston_wall},
                       {"non_clean", res.counts.non_clean}};
  summary["energy_drift"] = res.energy_drift();
  ctx.write_json("events.json", summary);
  return 0;
}

// ---------------------------------------------------------------------------
// average

int run_average(RunContext& ctx, double tau_end_flag, double delta_flag) {
  const json& cfg = ctx.config;
  std::string kind = get_or<std::string>(cfg, "system", "hard1d");
  double tau_end = tau_end_flag > 0 ? tau_end_flag : get_or(cfg, "tauEnd", 10.0);
  averaged::IntegrateOptions opt;
  opt.step = get_or(cfg, "step", 1e-4);
  opt.sample_dtau = get_or(cfg, "sampleEvery", 1e-3);
  Window window;
  bool has_window = cfg.contains("window");
  if (has_window) {
    window = parse_window(cfg.at("window"));
    opt.window = &window;
  }

  if (kind == "npiston") {
    averaged::NPiston sys;
    sys.mhat = cfg.at("Mhat").get<std::vector<double>>();
    sys.e0 = cfg.at("E0").get<std::vector<double>>();
    std::vector<double> q0 = cfg.at("Q0").get<std::vector<double>>();
    std::vector<double> w0 = get_or(cfg, "W0v",
                                    std::vector<double>(sys.mhat.size(), 0.0));
    std::vector<double> state = q0;
    state.insert(state.end(), w0.begin(), w0.end());
    double prev = 0;
    for (double q : q0) {
      sys.gap0.push_back(q - prev);
      prev = q;
    }
    sys.gap0.push_back(1 - prev);
    auto res = averaged::integrate_npiston(sys, state, tau_end, opt.step,
                                           opt.sample_dtau);
    std::ofstream os(ctx.path("trajectory.csv"));
    os << "tau";
    for (std::size_t i = 0; i < sys.mhat.size(); ++i) os << ",Q" << (i + 1);
    for (std::size_t i = 0; i < sys.mhat.size(); ++i) os << ",W" << (i + 1);
    os << ",Heff\n";
    for (std::size_t k = 0; k < res.tau.size(); ++k) {
      os << format_double(res.tau[k]);
      for (double x : res.states[k]) os << ',' << format_double(x);
      os << ',' << format_double(sys.invariant(res.states[k], res.states[k]))
         << '\n';
    }
    json summary;
    summary["max_invariant_drift"] = res.max_invariant_drift;
    ctx.write_json("summary.json", summary);
    return 0;
  }

  SlowState h0;
  h0.Q = get_or(cfg, "Q0", 0.5);
  h0.W = get_or(cfg, "W0", 0.0);
  h0.left = get_or(cfg, "E1", std::vector<double>{0.605});
  h0.right = get_or(cfg, "E2", std::vector<double>{0.405});

  auto finish = [&](auto&& model, const SlowState& start) {
    auto res = averaged::integrate(model, start, tau_end, opt);
    std::vector<double> heff(res.trajectory.size());
    for (std::size_t k = 0; k < res.trajectory.size(); ++k)
      heff[k] = model.invariant(res.trajectory.states[k], start);
    write_trajectory_csv(ctx, "trajectory.csv", res.trajectory, {"Heff"},
                         {heff});
    json summary;
    summary["max_invariant_drift"] = res.max_invariant_drift;
    summary["stopping_tau"] = std::isfinite(res.stopping_tau)
                                  ? json(res.stopping_tau)
                                  : json("inf");
    auto period = averaged::detect_period(res.dense);
    if (period) summary["period"] = *period;
    ctx.write_json("summary.json", summary);
    return 0;
  };

  if (kind == "hard1d") {
    averaged::Hard1D model;
    model.m_left.assign(h0.left.size(), 1.0);
    model.m_right.assign(h0.right.size(), 1.0);
    h0.dim = 1;
    return finish(model, h0);
  }
  if (kind == "ddim") {
    averaged::DDim model;
    model.d = get_or(cfg, "d", 2);
    model.ell = get_or(cfg, "ell", 0.5);
    model.a1 = get_or(cfg, "area1At0", 0.0);
    model.a2 = get_or(cfg, "area2At1", 0.0);
    h0.dim = model.d;
    return finish(model, h0);
  }
  if (kind == "soft1d") {
    double delta = delta_flag > 0 ? delta_flag : get_or(cfg, "delta", 0.1);
    soft1d::SoftAveraged<CubicKernel> model{Smoothing<CubicKernel>{{}, delta}};
    model.m_left.assign(h0.left.size(), 1.0);
    model.m_right.assign(h0.right.size(), 1.0);
    if (opt.step == 1e-4 && !cfg.contains("step")) opt.step = 1e-3;
    h0.dim = 1;
    return finish(model, h0);
  }
  throw ConfigError("unknown averaged system: " + kind);
}

// ---------------------------------------------------------------------------
// studies

int run_study_convergence(RunContext& ctx, double tau_end_flag) {
  const json& cfg = ctx.config;
  studies::Convergence1DConfig c;
  c.masses = get_or(cfg, "masses", c.masses);
  c.seeds = get_or(cfg, "seeds", c.seeds);
  c.tau_end = tau_end_flag > 0 ? tau_end_flag : get_or(cfg, "tauEnd", c.tau_end);
  c.base_seed = ctx.seed;
  c.scenario = parse_scenario(cfg, c.scenario);
  c.threads = ctx.threads;
  auto res = studies::convergence_1d(c);

  std::ofstream os(ctx.path("convergence_1d.csv"));
  os << "mass,epsilon,worst_dev,least_dev,used,excluded\n";
  for (const auto& r : res.rows)
    os << format_double(r.mass) << ',' << format_double(r.epsilon) << ','
       << format_double(r.worst) << ',' << format_double(r.least) << ','
       << r.used << ',' << r.excluded << '\n';

  json summary;
  summary["slope"] = res.fit.slope;
  summary["intercept"] = res.fit.intercept;
  summary["r_squared"] = res.fit.r_squared;
  summary["seeds"] = c.seeds;
  ctx.write_json("summary.json", summary);
  std::printf("convergence-1d: slope=%.3f (R^2=%.3f)\n", res.fit.slope,
              res.fit.r_squared);
  return 0;
}

int run_study_soft_uniform(RunContext& ctx, double delta_flag) {
  const json& cfg = ctx.config;
  studies::SoftUniformityConfig<> c;
  if (delta_flag > 0) c.deltas = {delta_flag};
  c.deltas = get_or(cfg, "deltas", c.deltas);
  c.masses = get_or(cfg, "masses", c.masses);
  c.seeds = get_or(cfg, "seeds", c.seeds);
  c.tau_end = get_or(cfg, "tauEnd", c.tau_end);
  c.base_seed = ctx.seed;
  c.scenario = parse_scenario(cfg, c.scenario);
  c.threads = ctx.threads;
  auto res = studies::soft_uniformity(c);

  std::ofstream os(ctx.path("soft_uniform.csv"));
  os << "delta,mass,epsilon,worst_dev,least_dev,used,excluded\n";
  for (const auto& r : res.rows)
    os << format_double(r.delta) << ',' << format_double(r.mass) << ','
       << format_double(r.epsilon) << ',' << format_double(r.worst) << ','
       << format_double(r.least) << ',' << r.used << ',' << r.excluded << '\n';

  json summary;
  json slopes = json::array();
  for (std::size_t i = 0; i < res.fits.size(); ++i) {
    slopes.push_back({{"delta", res.deltas[i]},
                      {"slope", res.fits[i].slope},
                      {"r_squared", res.fits[i].r_squared}});
    std::printf("soft-uniform: delta=%g slope=%.3f\n", res.deltas[i],
                res.fits[i].slope);
  }
  summary["per_delta"] = slopes;
  ctx.write_json("summary.json", summary);
  return 0;
}

int run_study_compare(RunContext& ctx, double mass_flag) {
  const json& cfg = ctx.config;
  studies::CompareConfig<> c;
  c.deltas = get_or(cfg, "deltas", c.deltas);
  c.mass = mass_flag > 0 ? mass_flag : get_or(cfg, "mass", c.mass);
  c.seeds = get_or(cfg, "seeds", c.seeds);
  c.tau_end = get_or(cfg, "tauEnd", c.tau_end);
  c.base_seed = ctx.seed;
  c.scenario = parse_scenario(cfg, c.scenario);
  c.threads = ctx.threads;
  auto res = studies::hard_soft_comparison(c);

  std::ofstream os(ctx.path("compare.csv"));
  os << "delta,mass,worst_diff\n";
  for (const auto& r : res.rows)
    os << format_double(r.delta) << ',' << format_double(r.mass) << ','
       << format_double(r.worst) << '\n';

  json summary;
  json ratios = json::array();
  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i)
    ratios.push_back(res.rows[i].worst / res.rows[i + 1].worst);
  summary["halving_ratios"] = ratios;
  ctx.write_json("summary.json", summary);
  return 0;
}

int run_study_prob2d(RunContext& ctx, const std::string& preset_flag) {
  const json& cfg = ctx.config;
  studies::Probability2DConfig c;
  if (!preset_flag.empty()) c.preset = preset_flag;
  c.preset = get_or(cfg, "preset", c.preset);
  c.masses = get_or(cfg, "masses", c.masses);
  c.ensemble = get_or(cfg, "ensemble", c.ensemble);
  c.threshold = get_or(cfg, "threshold", c.threshold);
  c.tau_end = get_or(cfg, "tauEnd", c.tau_end);
  c.base_seed = ctx.seed;
  if (cfg.contains("window")) c.window = parse_window(cfg.at("window"), c.window);
  c.threads = ctx.threads;
  auto res = studies::probability_2d(c);

  std::ofstream os(ctx.path("prob2d.csv"));
  os << "mass,epsilon,fraction_above,fraction_nonclean,resampled,runs\n";
  for (const auto& r : res.rows) {
    os << format_double(r.mass) << ',' << format_double(r.epsilon) << ','
       << format_double(r.fraction_above) << ','
       << format_double(r.fraction_nonclean) << ',' << r.resampled << ','
       << r.runs << '\n';
    std::printf("prob-2d: M=%g fraction above %.3g = %.4f nonclean = %.4f\n",
                r.mass, c.threshold, r.fraction_above, r.fraction_nonclean);
  }
  json summary;
  summary["threshold"] = c.threshold;
  summary["preset"] = c.preset;
  json rows = json::array();
  for (const auto& r : res.rows)
    rows.push_back({{"mass", r.mass},
                    {"fraction_above", r.fraction_above},
                    {"fraction_nonclean", r.fraction_nonclean},
                    {"resampled", r.resampled}});
  summary["rows"] = rows;
  ctx.write_json("summary.json", summary);
  return 0;
}

int run_study_santalo(RunContext& ctx, const std::string& preset_flag,
                      std::uint64_t samples_flag) {
  const json& cfg = ctx.config;
  auto dom = parse_domain(cfg, preset_flag);
  double Q = get_or(cfg, "Q", 1.0);
  double speed = get_or(cfg, "speed", 1.0);
  std::uint64_t samples =
      samples_flag > 0 ? samples_flag : get_or(cfg, "samples", 100000);
  Rng rng(ctx.seed);
  auto row = studies::santalo_study(dom, parse_side(cfg), Q, speed, samples, rng);

  std::ofstream os(ctx.path("santalo.csv"));
  os << "domain,Q,speed,samples,estimate,predicted\n";
  os << dom.name << ',' << format_double(Q) << ',' << format_double(speed)
     << ',' << samples << ',' << format_double(row.estimate) << ','
     << format_double(row.predicted) << '\n';

  json summary;
  summary["santalo_predicted"] = row.predicted;
  summary["estimate"] = row.estimate;
  summary["relative_error"] =
      std::abs(row.estimate - row.predicted) / row.predicted;
  ctx.write_json("summary.json", summary);
  std::printf("santalo: estimate=%.6f predicted=%.6f\n", row.estimate,
              row.predicted);
  return 0;
}

int run_study_flux(RunContext& ctx, const std::string& preset_flag,
                   std::uint64_t samples_flag) {
  const json& cfg = ctx.config;
  auto dom = parse_domain(cfg, preset_flag);
  double Q = get_or(cfg, "Q", 0.5);
  double speed = get_or(cfg, "speed", 1.0);
  std::uint64_t hits =
      samples_flag > 0 ? samples_flag : get_or(cfg, "faceHits", 100000);
  int runs = get_or(cfg, "runs", 3);

  std::ofstream os(ctx.path("flux.csv"));
  os << "run,time_average,predicted,relative_error,face_hits\n";
  json rows = json::array();
  for (int r = 0; r < runs; ++r) {
    Rng rng(derive_seed(ctx.seed, std::uint64_t(r)));
    auto res = studies::flux_study(dom, parse_side(cfg), Q, speed, hits, rng);
    os << r << ',' << format_double(res.time_average) << ','
       << format_double(res.predicted) << ','
       << format_double(res.relative_error) << ',' << res.face_hits << '\n';
    rows.push_back({{"time_average", res.time_average},
                    {"predicted", res.predicted},
                    {"relative_error", res.relative_error}});
    std::printf("flux run %d: avg=%.6f predicted=%.6f err=%.3f%%\n", r,
                res.time_average, res.predicted, 100 * res.relative_error);
  }
  json summary;
  summary["rows"] = rows;
  ctx.write_json("summary.json", summary);
  return 0;
}

int run_study_inducing(RunContext& ctx, const std::string& preset_flag,
                       std::uint64_t samples_flag) {
  const json& cfg = ctx.config;
  auto dom = parse_domain(cfg, preset_flag);
  double Q = get_or(cfg, "Q", 0.5);
  double speed = get_or(cfg, "speed", 1.0);
  std::uint64_t samples =
      samples_flag > 0 ? samples_flag : get_or(cfg, "samples", 100000);
  Rng rng(ctx.seed);
  billiard::Chamber ch(dom, parse_side(cfg), Q);
  auto rep = billiard::inducing_identity_check(ch, speed, samples, rng);
  auto stats = billiard::induced_piston_stats(ch, speed, samples, rng);

  json summary;
  summary["mean_flight_nu"] = rep.mean_flight_nu;
  summary["mean_flight_induced"] = rep.mean_flight_induced;
  summary["face_fraction"] = rep.face_fraction;
  summary["residual"] = rep.residual;
  summary["mean_vperp"] = stats.mean_vperp_return;
  summary["predicted_vperp"] = stats.predicted_vperp;
  summary["predicted_flight"] = stats.predicted_flight;
  summary["resampled"] = rep.resampled + stats.resampled;
  ctx.write_json("summary.json", summary);

  std::ofstream os(ctx.path("inducing.csv"));
  os << "quantity,estimate,predicted\n";
  os << "mean_flight_nu," << format_double(rep.mean_flight_nu) << ','
     << format_double(M_PI * ch.area / (speed * ch.perimeter)) << '\n';
  os << "mean_flight_induced," << format_double(rep.mean_flight_induced) << ','
     << format_double(stats.predicted_flight) << '\n';
  os << "mean_vperp," << format_double(stats.mean_vperp_return) << ','
     << format_double(stats.predicted_vperp) << '\n';
  os << "identity_residual," << format_double(rep.residual) << ",0\n";
  std::printf("inducing: residual=%.4f%%\n", 100 * rep.residual);
  return 0;
}

int run_study_demos(RunContext& ctx) {
  const json& cfg = ctx.config;
  studies::DemoConfig c;
  c.epsilons = get_or(cfg, "epsilons", c.epsilons);
  c.tau_end = get_or(cfg, "tauEnd", c.tau_end);
  auto demos = studies::averaging_demos(c);

  std::ofstream os(ctx.path("demos.csv"));
  os << "demo,epsilon,sup_deviation\n";
  json rows = json::array();
  for (const auto& d : demos) {
    for (std::size_t k = 0; k < c.epsilons.size(); ++k)
      os << d.name << ',' << format_double(c.epsilons[k]) << ','
         << format_double(d.deviations[k]) << '\n';
    rows.push_back({{"demo", d.name},
                    {"slope", d.fit.slope},
                    {"r_squared", d.fit.r_squared}});
    std::printf("demo %-22s slope=%.3f\n", d.name.c_str(), d.fit.slope);
  }
  json summary;
  summary["demos"] = rows;
  ctx.write_json("summary.json", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven piston simulations and averaged-equation studies"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, out_dir = "out", preset_flag;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double mass_flag = 0, delta_flag = 0, tau_end_flag = 0;
  std::uint64_t samples_flag = 0;

  if (const char* env = std::getenv("PISTON_OUT")) out_dir = env;
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--mass", mass_flag, "piston mass override");
  app.add_option("--delta", delta_flag, "smoothing parameter override");
  app.add_option("--preset", preset_flag, "domain preset override");
  app.add_option("--samples", samples_flag, "sample count override");
  app.add_option("--tau-end", tau_end_flag, "slow-time horizon override");

  auto* sim1d = app.add_subcommand("simulate-1d", "hard-core 1D event run");
  auto* simsoft = app.add_subcommand("simulate-soft", "soft-core 1D run");
  auto* sim2d = app.add_subcommand("simulate-2d", "2D billiard piston run");
  auto* avg = app.add_subcommand("average", "integrate an averaged system");
  auto* study = app.add_subcommand("study", "experiment harness");
  study->require_subcommand(1);
  auto* st_conv = study->add_subcommand("convergence-1d", "deviation-vs-mass rate sweep");
  auto* st_soft = study->add_subcommand("soft-uniform", "uniformity in delta");
  auto* st_cmp = study->add_subcommand("compare", "hard vs soft engines");
  auto* st_prob = study->add_subcommand("prob-2d", "2D ensemble fractions");
  auto* st_san = study->add_subcommand("santalo", "mean free flight check");
  auto* st_flux = study->add_subcommand("flux", "momentum-flux time average");
  auto* st_ind = study->add_subcommand("inducing", "induced-map identity");
  auto* st_demo = study->add_subcommand("demos", "classical averaging demos");

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx;
    if (const char* env = std::getenv("PISTON_THREADS"))
      ctx.threads = unsigned(std::stoul(env));
    ctx.out_dir = out_dir;
    ctx.seed = seed;
    if (threads > 0) ctx.threads = threads;
    if (ctx.threads == 0)
      ctx.threads = std::max(1u, std::thread::hardware_concurrency());
    fs::create_directories(ctx.out_dir);
    load_config(config_file, ctx);

    int rc = 1;
    if (sim1d->parsed()) rc = run_simulate_1d(ctx, mass_flag, tau_end_flag);
    if (simsoft->parsed())
      rc = run_simulate_soft(ctx, mass_flag, delta_flag, tau_end_flag);
    if (sim2d->parsed())
      rc = run_simulate_2d(ctx, preset_flag, mass_flag, tau_end_flag);
    if (avg->parsed()) rc = run_average(ctx, tau_end_flag, delta_flag);
    if (study->parsed()) {
      if (st_conv->parsed()) rc = run_study_convergence(ctx, tau_end_flag);
      if (st_soft->parsed()) rc = run_study_soft_uniform(ctx, delta_flag);
      if (st_cmp->parsed()) rc = run_study_compare(ctx, mass_flag);
      if (st_prob->parsed()) rc = run_study_prob2d(ctx, preset_flag);
      if (st_san->parsed()) rc = run_study_santalo(ctx, preset_flag, samples_flag);
      if (st_flux->parsed()) rc = run_study_flux(ctx, preset_flag, samples_flag);
      if (st_ind->parsed()) rc = run_study_inducing(ctx, preset_flag, samples_flag);
      if (st_demo->parsed()) rc = run_study_demos(ctx);
    }
    if (rc == 0) ctx.write_manifest();
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
