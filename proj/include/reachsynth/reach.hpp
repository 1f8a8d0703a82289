/*
 * reach.hpp
 *
 * Interval over-approximation of finite-time reachable sets of a
 * disturbed ODE by continuous-time mixed monotonicity: the system is
 * embedded into a doubled monotone system whose single trajectory from
 * (lo, hi) bounds every trajectory from the initial box. The embedding
 * field is assembled from per-evaluation Jacobian interval bounds.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/interval.hpp"
#include "reachsynth/types.hpp"

#include <functional>
#include <string>

namespace reachsynth {

struct VectorField {
  int dim_x = 0;
  int dim_u = 0;
  int dim_w = 0;
  std::function<Vec(const Vec& x, const Vec& u, const Vec& w)> eval;
};

/* Interval bounds on the Jacobian blocks d f/d x and d f/d w, valid for
 * all states in `x`, the fixed input `u` and disturbances in `w`. */
struct JacobianBounds {
  Mat x_lo, x_hi;  /* dim_x x dim_x */
  Mat w_lo, w_hi;  /* dim_x x dim_w */
};

using JacobianBoundFn = std::function<JacobianBounds(const Box& x, const Vec& u, const Box& w)>;

/* Embedding field d(x, x_dual, u, w_a, w_b). Evaluated with
 * (lo, hi, u, W.lo, W.hi) it lower-bounds the derivative on the lower
 * face of the interval hull; with arguments swapped it upper-bounds the
 * upper face. On the diagonal (x == x_dual, w_a == w_b) it reproduces
 * the original field exactly. */
struct DecompositionFunction {
  int dim_x = 0;
  int dim_u = 0;
  int dim_w = 0;
  std::function<Vec(const Vec& x, const Vec& x_dual, const Vec& u, const Vec& w_a,
                    const Vec& w_b)>
      eval;
};

struct ReachSettings {
  double horizon = 1.0;     /* sampling period T_s */
  int steps = 50;           /* fixed RK4 steps over the horizon */
  Vec inflation;            /* additive per-dimension guard, empty = zero */
};

/* Jacobian-bound decomposition: arguments are routed to the min/max
 * operand where the Jacobian entry has a fixed sign over the evaluation
 * box, sign-indefinite entries contribute an additive interval bloat. */
DecompositionFunction build_decomposition(const VectorField& f, JacobianBoundFn jac_bounds);

/* Integrate the doubled embedding system from (X0.lo, X0.hi) over
 * [0, horizon] under constant input u and disturbances in W; returns the
 * terminal box widened by the inflation guard. */
Box embed_integrate(const DecompositionFunction& d, const Box& x0, const Vec& u, const Box& w,
                    const ReachSettings& s);

/* Jacobian bound helper via interval automatic evaluation of an
 * analytic Jacobian callback (used by model definitions). */
JacobianBoundFn jacobian_from_interval_fn(
    std::function<std::pair<IMat, IMat>(const IVec& x, const Vec& u, const IVec& w)> fn);

/* classical fixed-step RK4 for plain ODE integration */
Vec rk4(const std::function<Vec(double t, const Vec& x)>& field, const Vec& x0, double t0,
        double t1, int steps);

}  // namespace reachsynth
