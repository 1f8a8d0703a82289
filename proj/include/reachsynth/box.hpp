/*
 * box.hpp
 *
 * Axis-aligned interval vectors (boxes), uniform grid partitions with an
 * out-of-domain symbol, and interval-preserving preimages of row-sparse
 * affine maps. Boxes are the universal set representation of the library:
 * constraints, partition cells, reachable-set enclosures and error tubes.
 */

#pragma once

#include "reachsynth/interval.hpp"
#include "reachsynth/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace reachsynth {

/* A closed box [lo, hi] or the distinguished empty set of a given
 * dimension. Bounds may be +/-infinity on unconstrained coordinates.
 * Crossed bounds are rejected at construction; emptiness is an explicit
 * state, never an encoding. */
class Box {
 public:
  Box() = default;

  Box(Vec lo, Vec hi);

  static Box empty(Eigen::Index dim);

  /* symmetric box [-radius, radius] */
  static Box symmetric(const Vec& radius);

  /* the whole space of a given dimension */
  static Box unbounded(Eigen::Index dim);

  bool is_empty() const { return empty_; }
  Eigen::Index dim() const { return dim_; }

  const Vec& lo() const;
  const Vec& hi() const;

  Vec center() const;
  Vec width() const;

  bool contains(const Vec& x) const;
  bool is_bounded() const;

  std::string str() const;

 private:
  Vec lo_, hi_;
  Eigen::Index dim_ = 0;
  bool empty_ = true;
};

/* X + [-eps, eps] */
Box box_expand(const Box& x, const Vec& eps);

/* {z | z + [-eps, eps] subset of X}; may come back empty */
Box box_shrink(const Box& x, const Vec& eps);

/* closed boxes sharing at least one point (faces count) */
bool box_intersects(const Box& a, const Box& b);

/* b subset of a, componentwise */
bool box_contains(const Box& a, const Box& b);

/* componentwise intersection */
Box box_intersection(const Box& a, const Box& b);

inline IVec to_ivec(const Box& b) { return to_ivec(b.lo(), b.hi()); }

/* Uniform partition of a bounded box into cells_per_dim[d] slices per
 * dimension. Flat indices are row-major with dimension 0 slowest; index
 * total_cells() is reserved for the Out symbol covering the whole
 * exterior. Cells are half-open [lo, hi) except along the domain's upper
 * faces, where they are closed, so every point of the domain belongs to
 * exactly one cell. */
class PartitionGrid {
 public:
  PartitionGrid() = default;
  PartitionGrid(Box domain, VecI cells_per_dim);

  const Box& domain() const { return domain_; }
  const VecI& cells_per_dim() const { return cells_; }
  const Vec& cell_width() const { return width_; }

  CellIndex total_cells() const { return total_; }
  CellIndex out_index() const { return total_; }

  /* unique cell containing x, or out_index() for exterior points */
  CellIndex cell_of(const Vec& x) const;

  Box cell_box(CellIndex idx) const;

  VecI coords_of(CellIndex idx) const;
  CellIndex flat_of(const VecI& coords) const;

  /* inclusive coordinate range of cells intersecting the (closed) box;
   * nullopt when the box misses the domain entirely */
  std::optional<std::pair<VecI, VecI>> intersecting_range(const Box& b) const;

 private:
  Box domain_;
  VecI cells_;
  Vec width_;
  std::vector<CellIndex> stride_;
  CellIndex total_ = 0;
};

/* Affine map pi(xhat, uhat) = P [xhat; uhat] + omega with at most one
 * non-zero entry per row of P. The row restriction is what keeps inverse
 * images of boxes boxes. */
struct AffineMap {
  Mat P;
  Vec omega;

  Eigen::Index out_dim() const { return P.rows(); }
  Eigen::Index arg_dim() const { return P.cols(); }

  /* throws if some row carries more than one non-zero entry */
  void validate() const;

  Vec apply(const Vec& xhat, const Vec& uhat) const;

  /* column blocks of P acting on xhat resp. uhat */
  Mat state_block(Eigen::Index nhat_x) const { return P.leftCols(nhat_x); }
  Mat input_block(Eigen::Index nhat_x) const { return P.rightCols(P.cols() - nhat_x); }

  static AffineMap identity_stacking(Eigen::Index nhat_x, Eigen::Index nhat_u);
};

/* Interval preimage {(xhat, uhat) | pi(xhat, uhat) in X} as a pair of
 * boxes over the abstract state and input spaces. Coordinates not hit by
 * any row stay unbounded; an infeasible constant row empties the result
 * (both boxes). */
std::pair<Box, Box> preimage_pi(const AffineMap& pi, const Box& x, Eigen::Index nhat_x,
                                Eigen::Index nhat_u);

/* image of a box-pair under the row-sparse affine map; exact (a box) */
Box image_pi(const AffineMap& pi, const Box& xhat, const Box& uhat);

}  // namespace reachsynth
