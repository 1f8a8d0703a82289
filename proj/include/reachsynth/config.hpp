/*
 * config.hpp
 *
 * Scenario configuration: one schema-versioned JSON document drives the
 * whole pipeline. Parsing is strict (unknown keys are errors) and the
 * format round-trips the bundled scenario digit for digit; angular and
 * unbounded constants are written as symbolic tokens ("pi/3", "inf") so
 * the stored file matches the model definition exactly.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/simulate.hpp"
#include "reachsynth/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reachsynth {

struct ScenarioConfig {
  int schema_version = 1;
  std::string name;
  std::string model;  /* built-in model selector */
  double sampling_period = 0.0;

  SpecMonitor::Mode mode = SpecMonitor::Mode::reach_avoid;
  Box state_constraints;      /* X, over the concrete state */
  std::vector<Box> avoid;     /* X_a pieces */
  Box reach;                  /* X_r */

  Box disturbance;            /* W */
  Box abstract_disturbance;   /* What */

  Box input_domain;           /* Uhat */
  Box input_jump;             /* DeltaUhat */
  VecI state_cells;
  VecI input_values;
  int reach_steps = 50;
  Vec inflation;              /* per abstract dimension, may be empty */

  Vec q_weight;
  Vec r_weight;
  Vec operating_xhat;
  Vec operating_uhat;
  double time_slope = 0.0;
  std::optional<Vec> epsilon;          /* configured error bound values */
  std::vector<int> epsilon_dims;       /* concrete dimensions they apply to */

  int steps_per_period = 100;
  double disturbance_switch_period = 1.0;
  int extra_periods = 5;
  bool random_abstract_disturbance = false;

  std::uint64_t seed = 1;

  std::string to_json_text() const;
  static ScenarioConfig from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static ScenarioConfig load(const std::string& path);

  /* FNV-1a over the canonical serialization; stamped into artifacts so
   * stages refuse silently drifted inputs */
  std::uint64_t hash() const;

  /* configured epsilon expanded to a full concrete-dimension vector
   * (zeros on unconstrained dimensions); empty when not configured */
  std::optional<Vec> epsilon_full(Eigen::Index n_x) const;
};

/* the bundled docking scenario at desk-scale resolution */
ScenarioConfig ship_scenario();

}  // namespace reachsynth
