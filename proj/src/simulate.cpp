#include "reachsynth/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace reachsynth {

void Trajectory::append(double t, Vec x, Vec u, Vec w) {
  if (!times.empty() && t <= times.back())
    throw std::invalid_argument("Trajectory: times must increase strictly");
  times.push_back(t);
  states.push_back(std::move(x));
  controls.push_back(std::move(u));
  disturbances.push_back(std::move(w));
}

void write_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t";
  auto dims = [&](const char* name, const std::vector<Vec>& v) {
    if (v.empty()) return;
    for (Eigen::Index i = 0; i < v.front().size(); ++i) os << ',' << name << i;
  };
  dims("x", traj.states);
  dims("u", traj.controls);
  dims("w", traj.disturbances);
  os << '\n';
  char buf[64];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (size_t k = 0; k < traj.times.size(); ++k) {
    cell(traj.times[k]);
    for (const auto* seq : {&traj.states, &traj.controls, &traj.disturbances}) {
      if (seq->empty()) continue;
      const Vec& v = (*seq)[k];
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        os << ',';
        cell(v[i]);
      }
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

namespace {

bool inside_domain(const Box& x, const Vec& s) { return x.is_empty() || x.contains(s); }

}  // namespace

MonitorVerdict monitor(const SpecMonitor& spec, const Trajectory& traj) {
  MonitorVerdict v;
  if (traj.times.empty()) {
    v.reason = "empty trajectory";
    v.t_violation = 0.0;
    return v;
  }
  for (size_t k = 0; k < traj.times.size(); ++k) {
    const Vec& s = traj.states[k];
    if (!inside_domain(spec.x, s)) {
      v.t_violation = traj.times[k];
      v.reason = "left the state constraints";
      return v;
    }
    for (size_t a = 0; a < spec.x_avoid.size(); ++a)
      if (spec.x_avoid[a].contains(s)) {
        v.t_violation = traj.times[k];
        v.reason = "entered avoid set " + std::to_string(a);
        return v;
      }
    if (v.t_reach < 0.0 && spec.x_reach.contains(s)) v.t_reach = traj.times[k];
    if (spec.mode == SpecMonitor::Mode::reach_avoid_stay && v.t_reach >= 0.0 &&
        !spec.x_reach.contains(s)) {
      v.t_violation = traj.times[k];
      v.reason = "left the target after reaching it";
      return v;
    }
  }
  if (v.t_reach < 0.0) {
    v.t_violation = traj.times.back();
    v.reason = "never reached the target";
    return v;
  }
  v.satisfied = true;
  return v;
}

const Vec& DisturbanceSignal::at(double t) const {
  if (values.empty()) throw std::logic_error("DisturbanceSignal: empty");
  auto idx = static_cast<std::int64_t>(std::floor(t / switch_period));
  if (idx < 0) idx = 0;
  if (idx >= static_cast<std::int64_t>(values.size()))
    idx = static_cast<std::int64_t>(values.size()) - 1;
  return values[idx];
}

DisturbanceSignal random_disturbance(const Box& w, double duration, double switch_period,
                                     std::uint64_t seed) {
  if (switch_period <= 0.0) throw std::invalid_argument("random_disturbance: switch_period");
  DisturbanceSignal sig;
  sig.switch_period = switch_period;
  std::mt19937_64 rng(seed);
  auto n = static_cast<std::int64_t>(std::ceil(duration / switch_period)) + 1;
  sig.values.reserve(n);
  for (std::int64_t k = 0; k < n; ++k) {
    Vec v(w.dim());
    for (Eigen::Index i = 0; i < w.dim(); ++i) {
      double u01 = (rng() >> 11) * 0x1.0p-53;
      v[i] = w.lo()[i] + (w.hi()[i] - w.lo()[i]) * u01;
    }
    sig.values.push_back(std::move(v));
  }
  return sig;
}

SimResult simulate_closed_loop(const VectorField& concrete, const VectorField& abstraction,
                               const HierarchicalController& hc, const Vec& x0, const Vec& xhat0,
                               const DisturbanceSignal& w_signal,
                               const DisturbanceSignal& what_signal, const SimOptions& opt) {
  if (opt.dt <= 0.0 || opt.duration <= 0.0)
    throw std::invalid_argument("simulate_closed_loop: bad options");
  double ratio = hc.t_s / opt.dt;
  auto steps_per_period = static_cast<std::int64_t>(std::llround(ratio));
  if (steps_per_period < 1 || std::abs(ratio - double(steps_per_period)) > 1e-9)
    throw std::invalid_argument("simulate_closed_loop: dt must divide the sampling period");

  SimResult res;
  res.max_abs_error = Vec::Zero(hc.es.dim_e);
  SampleLatch latch;
  Vec x = x0, xhat = xhat0;
  auto n_steps = static_cast<std::int64_t>(std::llround(opt.duration / opt.dt));

  for (std::int64_t i = 0; i <= n_steps; ++i) {
    double t = i * opt.dt;
    bool sampling_instant = (i % steps_per_period) == 0;
    if (sampling_instant) {
      CellIndex cell = hc.grid.cell_of(xhat);
      bool terminal = cell != hc.grid.out_index() && hc.table.in_r[cell] &&
                      hc.table.rank[cell] == 0 && !hc.table.in_s[cell];
      if (terminal && opt.stop_at_terminal) {
        /* record the terminal sample with a zero hold-over control */
        Vec e = error_state(x, xhat, latch.uhat.size() ? latch.uhat : Vec::Zero(hc.es.dim_uhat),
                            hc.es);
        res.max_abs_error = res.max_abs_error.cwiseMax(e.cwiseAbs());
        res.concrete.append(t, x, Vec::Zero(hc.es.dim_u), w_signal.at(t));
        res.abstraction.append(t, xhat, latch.uhat.size() ? latch.uhat : Vec::Zero(hc.es.dim_uhat),
                               what_signal.at(t));
        res.reached_terminal = true;
        res.t_terminal = t;
        break;
      }
    }
    Vec u;
    try {
      u = composed_control(hc, t, x, xhat, latch);
    } catch (const std::exception& ex) {
      res.abort_reason = ex.what();
      break;
    }
    Vec e = error_state(x, xhat, latch.uhat, hc.es);
    res.max_abs_error = res.max_abs_error.cwiseMax(e.cwiseAbs());
    res.concrete.append(t, x, u, w_signal.at(t));
    res.abstraction.append(t, xhat, latch.uhat, what_signal.at(t));
    if (i == n_steps) break;

    /* one RK4 step of the coupled closed loop; the hold keeps uhat and
     * the folded clock fixed within the step */
    const Vec uhat = latch.uhat;
    const std::int64_t period = latch.period;
    auto rhs = [&](double tau, const Vec& xs, const Vec& xhs, Vec& dx, Vec& dxh) {
      double t_fold = tau - double(period) * hc.t_s;
      Vec ec = error_state(xs, xhs, uhat, hc.es);
      Vec z(1 + ec.size() + xhs.size() + uhat.size());
      z << t_fold, ec, xhs, uhat;
      Vec uc = hc.cert.kappa.eval<double>(z);
      dx = concrete.eval(xs, uc, w_signal.at(tau));
      dxh = abstraction.eval(xhs, uhat, what_signal.at(tau));
    };
    Vec k1x(x.size()), k1h(xhat.size()), k2x(x.size()), k2h(xhat.size()), k3x(x.size()),
        k3h(xhat.size()), k4x(x.size()), k4h(xhat.size());
    rhs(t, x, xhat, k1x, k1h);
    rhs(t + 0.5 * opt.dt, x + 0.5 * opt.dt * k1x, xhat + 0.5 * opt.dt * k1h, k2x, k2h);
    rhs(t + 0.5 * opt.dt, x + 0.5 * opt.dt * k2x, xhat + 0.5 * opt.dt * k2h, k3x, k3h);
    rhs(t + opt.dt, x + opt.dt * k3x, xhat + opt.dt * k3h, k4x, k4h);
    x += opt.dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    xhat += opt.dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
    if (!x.allFinite() || !xhat.allFinite()) {
      res.abort_reason = "state diverged";
      break;
    }
  }
  res.clamp_events = latch.clamp_events;
  return res;
}

}  // namespace reachsynth
