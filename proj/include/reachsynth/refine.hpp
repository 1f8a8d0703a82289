/*
 * refine.hpp
 *
 * Composition of the table controller on the abstraction with the
 * low-level tracking law into a controller for the concrete model. The
 * table input is latched at sampling instants (zero-order hold, new
 * value applies exactly at k T_s) and the tracking law runs on the
 * period-folded clock. The latch is explicit state owned by the caller,
 * keeping the control evaluations pure.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/funnel.hpp"
#include "reachsynth/games.hpp"
#include "reachsynth/transition.hpp"
#include "reachsynth/types.hpp"

#include <cstdint>
#include <optional>

namespace reachsynth {

struct HierarchicalController {
  ControllerTable table;
  PartitionGrid grid;
  InputGrid inputs;
  FunnelCertificate cert;
  ErrorSystem es;
  double t_s = 0.0;
};

struct SampleLatch {
  std::int64_t period = -1;
  CellIndex cell = -1;
  Vec uhat;
  int clamp_events = 0;  /* jumps truncated to the admissible jump box */
};

/* current sampling period index of time t */
std::int64_t period_index(double t, double t_s);

/* held abstract input; re-latches H(xhat) when t enters a new period.
 * Throws when the latched cell left the winning set or carries no table
 * input (a rank-0 cell of a plain reach-avoid game is terminal: the run
 * should have stopped there). */
Vec zoh_control(const HierarchicalController& hc, double t, const Vec& xhat, SampleLatch& latch);

/* u = kappa(t mod T_s, e, xhat, uhat) with uhat from the hold */
Vec composed_control(const HierarchicalController& hc, double t, const Vec& x, const Vec& xhat,
                     SampleLatch& latch);

struct WinningWitness {
  bool member = false;
  Vec xhat0;        /* companion initialization, valid when member */
  CellIndex cell = -1;
};

/* Decide membership of a concrete state in the winning initial set
 * { pi(xhat, table input of H(xhat)) | H(xhat) winning } + E0 by a
 * bounded deterministic search: candidate cells are pre-filtered by a
 * conservative image test, then probed at the center and at 32
 * low-discrepancy points. A miss reports non-membership, not an error. */
WinningWitness winning_initial_set_query(const HierarchicalController& hc, const Vec& x);

}  // namespace reachsynth
