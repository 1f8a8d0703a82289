/*
 * transition.hpp
 *
 * Finite abstraction of the continuous dynamics: a uniform state grid, a
 * finite input set, and the non-deterministic successor relation
 *   delta(s, u) = { s' | s' intersects the reach enclosure of cell s
 *                        under input u over one sampling period }.
 * Successor lists are stored in a compressed row layout; the Out symbol
 * (index = total_cells) absorbs the unsafe region and the exterior.
 * Construction is sharded over cell blocks and merged in index order,
 * so results are identical for any thread count.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/reach.hpp"
#include "reachsynth/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace reachsynth {

/* Uniform discretization of a bounded input box, endpoints included
 * (midpoint for single-value dimensions); points falling in any of the
 * avoid boxes are dropped at construction. Point order is row-major in
 * the value indices and is part of the serialized contract. */
class InputGrid {
 public:
  InputGrid() = default;
  InputGrid(Box domain, VecI values_per_dim, const std::vector<Box>& avoid = {});

  /* deserialization path: adopt a stored point list verbatim */
  static InputGrid from_points(Box domain, VecI values_per_dim, std::vector<Vec> points);

  const Box& domain() const { return domain_; }
  const VecI& values_per_dim() const { return values_; }
  int size() const { return static_cast<int>(points_.size()); }
  const Vec& point(int i) const { return points_.at(i); }
  const std::vector<Vec>& points() const { return points_; }

 private:
  Box domain_;
  VecI values_;
  std::vector<Vec> points_;
};

class TransitionSystem {
 public:
  using SuccSpan = std::span<const std::int32_t>;

  TransitionSystem() = default;

  const PartitionGrid& grid() const { return grid_; }
  const InputGrid& inputs() const { return inputs_; }
  std::int32_t out_code() const { return static_cast<std::int32_t>(grid_.total_cells()); }
  bool is_safe(CellIndex s) const { return safe_mask_.at(s) != 0; }
  const std::vector<std::uint8_t>& safe_mask() const { return safe_mask_; }
  std::uint64_t config_hash() const { return config_hash_; }
  std::int64_t transition_count() const { return static_cast<std::int64_t>(successors_.size()); }

  /* sorted, deduplicated successor cells of a non-Out safe state */
  SuccSpan successors(CellIndex s, int input) const;

  void save(const std::string& path) const;
  static TransitionSystem load(const std::string& path);
  void write_text(std::ostream& os) const;

  /* hand construction for small game instances and tests; delta indexed
   * [state][input], successor entries may include n_states for Out */
  static TransitionSystem from_lists(int n_states, int n_inputs,
                                     const std::vector<std::vector<std::vector<std::int32_t>>>&
                                         delta);

  friend TransitionSystem build_abstraction(const DecompositionFunction& d,
                                            const PartitionGrid& grid, const InputGrid& inputs,
                                            const Box& what, const ReachSettings& settings,
                                            const std::function<bool(CellIndex)>& avoid_cells,
                                            int threads, std::uint64_t config_hash);

 private:
  PartitionGrid grid_;
  InputGrid inputs_;
  std::vector<std::uint8_t> safe_mask_;
  std::vector<std::int64_t> offsets_;      /* (s * n_inputs + u) -> successor range */
  std::vector<std::int32_t> successors_;
  std::uint64_t config_hash_ = 0;
};

/* Build the successor relation: for every safe cell and every input,
 * integrate the embedding over one period and collect the intersecting
 * cells; the enclosure leaving the safe region contributes Out. Cells
 * flagged by avoid_cells are merged into Out (no outgoing edges). */
TransitionSystem build_abstraction(const DecompositionFunction& d, const PartitionGrid& grid,
                                   const InputGrid& inputs, const Box& what,
                                   const ReachSettings& settings,
                                   const std::function<bool(CellIndex)>& avoid_cells,
                                   int threads = 0, std::uint64_t config_hash = 0);

}  // namespace reachsynth
