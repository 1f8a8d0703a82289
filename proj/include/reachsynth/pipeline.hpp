/*
 * pipeline.hpp
 *
 * Staged synthesis pipeline over a scenario configuration:
 *   certify    - generate (or import) a tracking certificate, check it,
 *                fix the error bound used to deform the specification
 *   abstract   - shrink/expand the specification sets, project them into
 *                the abstract space, grid, and build the transition system
 *   synthesize - solve the game and extract the controller table
 *   simulate   - Monte Carlo closed-loop runs with monitor verdicts
 * The CLI subcommands and the acceptance suite both drive these entry
 * points, so a scripted run and a test run are the same code path.
 */

#pragma once

#include "reachsynth/config.hpp"
#include "reachsynth/funnel.hpp"
#include "reachsynth/games.hpp"
#include "reachsynth/reach.hpp"
#include "reachsynth/refine.hpp"
#include "reachsynth/ship.hpp"
#include "reachsynth/simulate.hpp"
#include "reachsynth/transition.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reachsynth {

/* the deformed specification admits no solution (empty shrunk target,
 * no admissible inputs, ...) — a scenario property, not an IO failure */
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* model pieces assembled from the config's model selector */
struct ScenarioSystem {
  ShipParams params;
  VectorField concrete;
  VectorField abstraction;
  DecompositionFunction decomposition;
  ErrorSystem error_system;
  int n_x = 0;
};

ScenarioSystem make_system(const ScenarioConfig& config);

struct CertifyResult {
  FunnelCertificate cert;
  CheckResult initial;
  CheckResult decrease;
  CheckResult jump;
  Vec cert_epsilon;      /* hull of the generated funnel */
  Vec applied_epsilon;   /* per concrete dimension, drives the set deformation */
  bool epsilon_from_config = false;

  bool any_falsified() const;
  bool all_verified() const;
};

CertifyResult run_certify(const ScenarioConfig& config,
                          const std::optional<std::string>& import_path = std::nullopt,
                          const CheckBudget& budget = {});

/* write/read the epsilon handoff between certify and abstract */
void save_epsilon(const std::string& path, const Vec& eps, bool from_config,
                  std::uint64_t config_hash);
Vec load_epsilon(const std::string& path, std::uint64_t expected_hash);

/* specification sets deformed by the error bound and projected into the
 * abstract state/input space */
struct DeformedSpec {
  Box xhat_domain;           /* gridded domain (projection of X^-eps) */
  Box input_box;             /* admissible inputs (Uhat inter projection) */
  std::vector<Box> avoid_hat;     /* state-avoid pieces */
  std::vector<Box> input_avoid;   /* input-avoid pieces */
  Box reach_hat;             /* target projection */
  Box reach_inputs;          /* stay-input projection (unbounded = all) */
};

DeformedSpec deform_spec(const ScenarioConfig& config, const Vec& eps_full);

struct AbstractionResult {
  PartitionGrid grid;
  InputGrid inputs;
  DeformedSpec spec;
  TransitionSystem ts;
  double build_seconds = 0.0;
};

AbstractionResult run_abstract(const ScenarioConfig& config, const Vec& eps_full,
                               int threads = 0);

struct SynthesisResult {
  GameSpec game;
  SafetyResult safety;
  ReachResult reach;
  ControllerTable table;
  double solve_seconds = 0.0;
};

SynthesisResult run_synthesize(const ScenarioConfig& config, const Vec& eps_full,
                               const TransitionSystem& ts);

HierarchicalController make_controller(const ScenarioConfig& config, const ScenarioSystem& system,
                                       const FunnelCertificate& cert, const Vec& eps_full,
                                       const AbstractionResult& abstraction,
                                       const ControllerTable& table);

struct RunRecord {
  int run = 0;
  bool in_winning_set = false;
  Vec x0;
  MonitorVerdict verdict;
  double t_terminal = -1.0;
  Vec max_abs_error;
  int clamp_events = 0;
  std::string abort_reason;
};

struct SimulateResult {
  std::vector<RunRecord> records;
  int satisfied = 0;
  int rejected = 0;   /* drawn states not accepted into the winning set */
  int violated = 0;
};

/* draw initial states from the winning set construction, run the closed
 * loop, monitor each trace; optional CSV/SVG artifacts per run */
SimulateResult run_simulate(const ScenarioConfig& config, const ScenarioSystem& system,
                            const HierarchicalController& hc, int runs, std::uint64_t seed,
                            const std::optional<std::string>& out_dir = std::nullopt,
                            bool svg_first_run = true);

/* monitor over the original (undeformed) specification sets */
SpecMonitor make_monitor(const ScenarioConfig& config);

/* Fig-style planar plot of one run */
void write_run_svg(const std::string& path, const ScenarioConfig& config, const Vec& eps_full,
                   const Trajectory& concrete, const Trajectory& abstraction, double t_s);

}  // namespace reachsynth
