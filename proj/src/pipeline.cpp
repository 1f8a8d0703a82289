#include "reachsynth/pipeline.hpp"

#include "reachsynth/svg.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace reachsynth {

namespace {

using nlohmann::json;

double urand(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

Vec interior_sample(std::mt19937_64& rng, const Box& b) {
  Vec s(b.dim());
  for (Eigen::Index i = 0; i < b.dim(); ++i)
    s[i] = b.lo()[i] + (b.hi()[i] - b.lo()[i]) * urand(rng, 0.02, 0.98);
  return s;
}

}  // namespace

ScenarioSystem make_system(const ScenarioConfig& config) {
  if (config.model != "ship")
    throw std::runtime_error("unknown model '" + config.model + "' (built-in models: ship)");
  ScenarioSystem sys;
  sys.params = ShipParams::scale_model();
  sys.n_x = 6;
  ShipParams p = sys.params;
  sys.concrete = VectorField{6, 3, 6, [p](const Vec& x, const Vec& u, const Vec& w) {
                               return ship_dynamics(x, u, w, p);
                             }};
  sys.abstraction = ship_kinematics_field();
  sys.decomposition = build_decomposition(sys.abstraction, ship_kinematics_jacobian());
  sys.error_system = ship_error_system(p);
  return sys;
}

bool CertifyResult::any_falsified() const {
  return initial.verdict == Verdict::falsified || decrease.verdict == Verdict::falsified ||
         jump.verdict == Verdict::falsified;
}

bool CertifyResult::all_verified() const {
  return initial.verdict == Verdict::verified && decrease.verdict == Verdict::verified &&
         jump.verdict == Verdict::verified;
}

CertifyResult run_certify(const ScenarioConfig& config,
                          const std::optional<std::string>& import_path,
                          const CheckBudget& budget) {
  ScenarioSystem sys = make_system(config);
  const ErrorSystem& es = sys.error_system;

  CertificateDomains domains;
  auto [xhat_all, uhat_all] =
      preimage_pi(es.pi, config.state_constraints, es.dim_xhat, es.dim_uhat);
  if (xhat_all.is_empty()) throw std::runtime_error("certify: empty abstract state projection");
  domains.xhat = xhat_all;
  domains.uhat = config.input_domain;
  domains.delta_uhat = config.input_jump;
  domains.w = config.disturbance;
  domains.what = config.abstract_disturbance;

  CertifyResult res;
  if (import_path) {
    res.cert = FunnelCertificate::load(*import_path);
  } else {
    CandidateOptions opts;
    opts.time_slope = config.time_slope;
    res.cert = lyap_candidate(es, OperatingPoint{config.operating_xhat, config.operating_uhat},
                              config.q_weight, config.r_weight, domains,
                              config.sampling_period, opts);
  }
  res.initial = check_initial_containment(res.cert, budget);
  res.decrease = check_decrease(res.cert, es, 0.0, budget);
  res.jump = check_jump(res.cert, es, budget);
  res.cert_epsilon = compute_epsilon(res.cert, budget);
  if (auto eps = config.epsilon_full(sys.n_x)) {
    res.applied_epsilon = *eps;
    res.epsilon_from_config = true;
  } else {
    res.applied_epsilon = res.cert_epsilon;
  }
  return res;
}

void save_epsilon(const std::string& path, const Vec& eps, bool from_config,
                  std::uint64_t config_hash) {
  json j;
  json a = json::array();
  for (Eigen::Index i = 0; i < eps.size(); ++i) a.push_back(eps[i]);
  j["epsilon"] = a;
  j["source"] = from_config ? "config" : "certificate";
  j["config_hash"] = config_hash;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

Vec load_epsilon(const std::string& path, std::uint64_t expected_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  json j = json::parse(is);
  if (j.at("config_hash").get<std::uint64_t>() != expected_hash)
    throw std::runtime_error(path + ": written for a different configuration");
  const auto& a = j.at("epsilon");
  Vec eps(a.size());
  for (size_t i = 0; i < a.size(); ++i) eps[i] = a[i].get<double>();
  return eps;
}

DeformedSpec deform_spec(const ScenarioConfig& config, const Vec& eps_full) {
  ScenarioSystem sys = make_system(config);
  const AffineMap& pi = sys.error_system.pi;
  const int nx = sys.error_system.dim_xhat, nu = sys.error_system.dim_uhat;

  Box x_shrunk = box_shrink(config.state_constraints, eps_full);
  if (x_shrunk.is_empty())
    throw InfeasibleError("specification infeasible at this epsilon: X shrinks to nothing");
  Box r_shrunk = box_shrink(config.reach, eps_full);
  if (r_shrunk.is_empty())
    throw std::runtime_error(
        "specification infeasible at this epsilon: target shrinks to nothing");

  DeformedSpec d;
  auto [xhat, uhat_eps] = preimage_pi(pi, x_shrunk, nx, nu);
  if (xhat.is_empty())
    throw InfeasibleError("specification infeasible: empty abstract state projection");
  d.xhat_domain = xhat;
  d.input_box = box_intersection(config.input_domain, uhat_eps);
  if (d.input_box.is_empty())
    throw InfeasibleError("specification infeasible: no admissible abstract inputs");

  for (const Box& a : config.avoid) {
    auto [ahat, au] = preimage_pi(pi, box_expand(a, eps_full), nx, nu);
    if (ahat.is_empty()) continue;  /* expanded obstacle misses the projection */
    bool constrains_state = !box_contains(ahat, d.xhat_domain);
    bool constrains_input = !box_contains(au, d.input_box);
    if (!constrains_state && !constrains_input)
      throw InfeasibleError("specification infeasible: an avoid set covers the abstract domain");
    /* a factor covering its whole domain imposes nothing; the other
     * factor then carries the avoidance exactly. When both factors are
     * proper the conjunctive split is a conservative strengthening. */
    if (constrains_state) d.avoid_hat.push_back(ahat);
    if (constrains_input) d.input_avoid.push_back(au);
  }

  auto [rhat, ru] = preimage_pi(pi, r_shrunk, nx, nu);
  if (rhat.is_empty() || box_intersection(rhat, d.xhat_domain).is_empty())
    throw InfeasibleError("specification infeasible: target projection empty");
  d.reach_hat = rhat;
  d.reach_inputs = ru;
  return d;
}

AbstractionResult run_abstract(const ScenarioConfig& config, const Vec& eps_full, int threads) {
  ScenarioSystem sys = make_system(config);
  AbstractionResult res;
  res.spec = deform_spec(config, eps_full);
  if (!res.spec.xhat_domain.is_bounded())
    throw std::runtime_error("abstract state domain unbounded, cannot grid");
  res.grid = PartitionGrid(res.spec.xhat_domain, config.state_cells);
  res.inputs = InputGrid(res.spec.input_box, config.input_values, res.spec.input_avoid);

  const PartitionGrid& grid = res.grid;
  const std::vector<Box>& avoid = res.spec.avoid_hat;
  auto avoid_pred = [&grid, &avoid](CellIndex s) {
    Box cell = grid.cell_box(s);
    for (const Box& a : avoid)
      if (box_intersects(cell, a)) return true;
    return false;
  };
  ReachSettings settings{config.sampling_period, config.reach_steps, config.inflation};
  auto t0 = std::chrono::steady_clock::now();
  res.ts = build_abstraction(sys.decomposition, res.grid, res.inputs,
                             config.abstract_disturbance, settings, avoid_pred, threads,
                             config.hash());
  res.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

SynthesisResult run_synthesize(const ScenarioConfig& config, const Vec& eps_full,
                               const TransitionSystem& ts) {
  DeformedSpec spec = deform_spec(config, eps_full);
  SynthesisResult res;
  const PartitionGrid& grid = ts.grid();
  for (CellIndex s = 0; s < grid.total_cells(); ++s) {
    if (!ts.is_safe(s)) continue;
    if (box_contains(spec.reach_hat, grid.cell_box(s))) res.game.target_cells.push_back(s);
  }
  for (int u = 0; u < ts.inputs().size(); ++u) {
    res.game.all_inputs.push_back(u);
    if (spec.reach_inputs.contains(ts.inputs().point(u))) res.game.stay_inputs.push_back(u);
  }

  auto t0 = std::chrono::steady_clock::now();
  if (config.mode == SpecMonitor::Mode::reach_avoid_stay) {
    res.safety = solve_safety(ts, res.game);
    std::vector<CellIndex> seed;
    for (CellIndex s = 0; s < grid.total_cells(); ++s)
      if (res.safety.in_s[s]) seed.push_back(s);
    res.reach = solve_reach(ts, seed, res.game.all_inputs);
  } else {
    res.reach = solve_reach(ts, res.game.target_cells, res.game.all_inputs);
  }
  res.table = extract_controller(res.safety, res.reach, ts);
  res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

HierarchicalController make_controller(const ScenarioConfig& config, const ScenarioSystem& system,
                                       const FunnelCertificate& cert, const Vec& eps_full,
                                       const AbstractionResult& abstraction,
                                       const ControllerTable& table) {
  (void)eps_full;
  HierarchicalController hc;
  hc.table = table;
  hc.grid = abstraction.grid;
  hc.inputs = abstraction.inputs;
  hc.cert = cert;
  hc.es = system.error_system;
  hc.t_s = config.sampling_period;
  return hc;
}

SpecMonitor make_monitor(const ScenarioConfig& config) {
  SpecMonitor m;
  m.mode = config.mode;
  m.x = config.state_constraints;
  m.x_avoid = config.avoid;
  m.x_reach = config.reach;
  return m;
}

SimulateResult run_simulate(const ScenarioConfig& config, const ScenarioSystem& system,
                            const HierarchicalController& hc, int runs, std::uint64_t seed,
                            const std::optional<std::string>& out_dir, bool svg_first_run) {
  SimulateResult res;
  SpecMonitor spec = make_monitor(config);

  std::vector<CellIndex> startable;
  for (CellIndex s = 0; s < hc.grid.total_cells(); ++s)
    if (hc.table.in_r[s] && hc.table.has_choice(s)) startable.push_back(s);
  if (startable.empty()) throw std::runtime_error("simulate: winning set has no startable cells");

  const double dt = config.sampling_period / config.steps_per_period;
  Vec eps_applied = config.epsilon_full(system.n_x).value_or(Vec::Zero(system.n_x));

  DisturbanceSignal zero_what;
  zero_what.switch_period = config.disturbance_switch_period;
  zero_what.values = {Vec::Zero(system.abstraction.dim_w)};

  for (int run = 0; run < runs; ++run) {
    RunRecord rec;
    rec.run = run;
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(run + 1));

    CellIndex cell = startable[rng() % startable.size()];
    Vec xhat_draw = interior_sample(rng, hc.grid.cell_box(cell));
    Vec e0_draw = interior_sample(rng, hc.cert.e0);
    Vec uhat_cell = hc.inputs.point(hc.table.choice[cell]);
    rec.x0 = concrete_state(e0_draw, xhat_draw, uhat_cell, hc.es);

    WinningWitness witness = winning_initial_set_query(hc, rec.x0);
    rec.in_winning_set = witness.member;
    if (!witness.member) {
      ++res.rejected;
      res.records.push_back(std::move(rec));
      continue;
    }

    double duration =
        (hc.table.rank[witness.cell] + config.extra_periods) * config.sampling_period;
    DisturbanceSignal w_sig = random_disturbance(config.disturbance, duration,
                                                 config.disturbance_switch_period, rng());
    DisturbanceSignal what_sig =
        config.random_abstract_disturbance
            ? random_disturbance(config.abstract_disturbance, duration,
                                 config.disturbance_switch_period, rng())
            : zero_what;

    SimOptions opt;
    opt.duration = duration;
    opt.dt = dt;
    opt.stop_at_terminal = config.mode == SpecMonitor::Mode::reach_avoid;
    SimResult sim = simulate_closed_loop(system.concrete, system.abstraction, hc, rec.x0,
                                         witness.xhat0, w_sig, what_sig, opt);
    rec.abort_reason = sim.abort_reason;
    rec.t_terminal = sim.t_terminal;
    rec.max_abs_error = sim.max_abs_error;
    rec.clamp_events = sim.clamp_events;
    rec.verdict = monitor(spec, sim.concrete);
    if (!sim.abort_reason.empty()) {
      rec.verdict.satisfied = false;
      if (rec.verdict.reason.empty()) rec.verdict.reason = sim.abort_reason;
    }
    if (rec.verdict.satisfied)
      ++res.satisfied;
    else
      ++res.violated;

    if (out_dir) {
      char name[64];
      std::snprintf(name, sizeof name, "/run_%03d.csv", run);
      write_csv(*out_dir + name, sim.concrete);
      std::snprintf(name, sizeof name, "/run_%03d_abstract.csv", run);
      write_csv(*out_dir + name, sim.abstraction);
      if (svg_first_run && run == 0)
        write_run_svg(*out_dir + "/run_000.svg", config, eps_applied, sim.concrete,
                      sim.abstraction, config.sampling_period);
    }
    res.records.push_back(std::move(rec));
  }
  return res;
}

void write_run_svg(const std::string& path, const ScenarioConfig& config, const Vec& eps_full,
                   const Trajectory& concrete, const Trajectory& abstraction, double t_s) {
  const Box& x = config.state_constraints;
  double margin = 0.4;
  SvgPlot plot(x.lo()[0] - margin, x.hi()[0] + margin, x.lo()[1] - margin, x.hi()[1] + margin);

  plot.add_box(x, "none", "black", 2.5);
  Box x_shrunk = box_shrink(x, eps_full);
  if (!x_shrunk.is_empty()) plot.add_box(x_shrunk, "none", "black", 1.0);
  plot.add_box(config.reach, "#bcd9ee", "none", 0.0, 0.85);
  Box r_shrunk = box_shrink(config.reach, eps_full);
  if (!r_shrunk.is_empty()) plot.add_box(r_shrunk, "none", "#1b7837", 1.5);
  for (const Box& a : config.avoid) {
    plot.add_box(box_expand(a, eps_full), "none", "#1b7837", 1.5);
    plot.add_box(a, "#9a9a9a", "none", 0.0, 0.9);
  }
  plot.add_polyline(abstraction.states, "#d62728", 1.6);
  plot.add_polyline(concrete.states, "#1f77b4", 1.6);

  /* heading arrows at the sampling instants */
  for (size_t k = 0; k < concrete.times.size(); ++k) {
    double phase = std::fmod(concrete.times[k] + 1e-9, t_s);
    if (phase < 2e-9 || concrete.times[k] == concrete.times.back())
      plot.add_heading_arrow(concrete.states[k][0], concrete.states[k][1],
                             concrete.states[k][2], 0.35, "black");
  }
  plot.add_label(x.lo()[0] + 0.1, x.hi()[1] - 0.25, "abstract (red) / concrete (blue)");
  plot.save(path);
}

}  // namespace reachsynth
