/*
 * simulate.hpp
 *
 * Closed-loop co-simulation of the concrete model and its continuous
 * abstraction under the hierarchical controller, piecewise-constant
 * disturbance generation, and the specification monitor.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/reach.hpp"
#include "reachsynth/refine.hpp"
#include "reachsynth/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reachsynth {

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> controls;
  std::vector<Vec> disturbances;

  void append(double t, Vec x, Vec u, Vec w);
};

void write_csv(const std::string& path, const Trajectory& traj);

struct SpecMonitor {
  enum class Mode { reach_avoid, reach_avoid_stay };
  Box x;                     /* state constraints; +-inf on free dimensions */
  std::vector<Box> x_avoid;
  Box x_reach;
  Mode mode = Mode::reach_avoid;
};

struct MonitorVerdict {
  bool satisfied = false;
  double t_reach = -1.0;      /* first sample in the target, when any */
  double t_violation = -1.0;
  std::string reason;         /* empty when satisfied */
};

/* Sample-based monitor. Reach-avoid: satisfied at the first sample in
 * the target with no sample anywhere violating the avoid or domain
 * constraints. Reach-avoid-stay: additionally every sample after the
 * first target entry must remain in the target. */
MonitorVerdict monitor(const SpecMonitor& spec, const Trajectory& traj);

/* deterministic-from-seed piecewise-constant signal with values uniform
 * in w, switching every switch_period */
struct DisturbanceSignal {
  double switch_period = 1.0;
  std::vector<Vec> values;

  const Vec& at(double t) const;
};

DisturbanceSignal random_disturbance(const Box& w, double duration, double switch_period,
                                     std::uint64_t seed);

struct SimOptions {
  double duration = 0.0;      /* wall end of the run */
  double dt = 0.0;            /* must divide T_s */
  bool stop_at_terminal = true;  /* stop once the latched cell has rank 0 */
};

struct SimResult {
  Trajectory concrete;
  Trajectory abstraction;
  bool reached_terminal = false;
  double t_terminal = -1.0;
  int clamp_events = 0;
  Vec max_abs_error;  /* per-dimension over all recorded instants */
  std::string abort_reason;  /* non-empty when the hold aborted the run */
};

/* Integrate both closed loops with a shared RK4 grid; the abstract input
 * is latched at sampling instants through the hold, the concrete input
 * is the composed tracking law. */
SimResult simulate_closed_loop(const VectorField& concrete, const VectorField& abstraction,
                               const HierarchicalController& hc, const Vec& x0, const Vec& xhat0,
                               const DisturbanceSignal& w_signal,
                               const DisturbanceSignal& what_signal, const SimOptions& opt);

}  // namespace reachsynth
