/*
 * games.hpp
 *
 * Reach-avoid-stay games on the finite abstraction. The stay part is a
 * maximal controlled-invariance fixed point inside the target cells
 * restricted to the stay inputs; the reach part grows the winning set
 * with all cells that can be forced into it in one step. The production
 * reach solver is predecessor-driven (per-pair counters of successors
 * not yet won, decremented in synchronous waves); the literal rescan
 * loop is kept alongside as an oracle. Both produce identical sets,
 * ranks and choices, with ties broken by the smallest input index.
 */

#pragma once

#include "reachsynth/transition.hpp"
#include "reachsynth/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace reachsynth {

struct GameSpec {
  std::vector<CellIndex> target_cells;  /* sorted, safe cells only */
  std::vector<int> stay_inputs;         /* input indices usable while staying */
  std::vector<int> all_inputs;          /* every admissible input index */
};

struct SafetyResult {
  std::vector<std::uint8_t> in_s;    /* per cell */
  std::vector<std::int32_t> choice;  /* stay witness, -1 outside S */
  int iterations = 0;
};

struct ReachResult {
  std::vector<std::uint8_t> in_r;
  std::vector<std::int32_t> choice;  /* -1 on the seed and outside R */
  std::vector<std::int32_t> rank;    /* entry wave, 0 on the seed, -1 outside */
  int iterations = 0;
};

/* maximal controlled-invariant subset of the target under stay inputs */
SafetyResult solve_safety(const TransitionSystem& ts, const GameSpec& spec);

/* cells from which the seed is reachable while staying off Out;
 * worklist implementation (production path) */
ReachResult solve_reach(const TransitionSystem& ts, const std::vector<CellIndex>& seed,
                        const std::vector<int>& inputs);

/* literal synchronous-rescan fixed point, kept as the oracle */
ReachResult solve_reach_rescan(const TransitionSystem& ts, const std::vector<CellIndex>& seed,
                               const std::vector<int>& inputs);

struct ControllerTable {
  CellIndex n_cells = 0;
  int n_inputs = 0;
  std::vector<std::uint8_t> in_s;
  std::vector<std::uint8_t> in_r;
  std::vector<std::int32_t> choice;  /* -1 = undefined */
  std::vector<std::int32_t> rank;    /* -1 = outside R */
  std::uint64_t config_hash = 0;

  bool has_choice(CellIndex s) const { return choice.at(s) >= 0; }
  std::int64_t stay_count() const;
  std::int64_t win_count() const;
  /* |R| / |X \ {Out}| */
  double coverage() const;

  void save(const std::string& path) const;
  static ControllerTable load(const std::string& path);
  void write_text(std::ostream& os) const;
};

/* merge the stay choices on S with the reach choices on R \ S; pass an
 * empty safety result (no cells) for plain reach-avoid games, where the
 * reach seed cells keep rank 0 and no choice */
ControllerTable extract_controller(const SafetyResult& safety, const ReachResult& reach,
                                   const TransitionSystem& ts);

}  // namespace reachsynth
