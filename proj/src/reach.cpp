#include "reachsynth/reach.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace reachsynth {

DecompositionFunction build_decomposition(const VectorField& f, JacobianBoundFn jac_bounds) {
  if (!f.eval) throw std::invalid_argument("build_decomposition: field has no evaluator");
  if (!jac_bounds) throw std::invalid_argument("build_decomposition: missing Jacobian bounds");

  DecompositionFunction d;
  d.dim_x = f.dim_x;
  d.dim_u = f.dim_u;
  d.dim_w = f.dim_w;
  int nx = f.dim_x, nw = f.dim_w;
  d.eval = [field = f.eval, jac = std::move(jac_bounds), nx, nw](
               const Vec& x, const Vec& dual, const Vec& u, const Vec& wa,
               const Vec& wb) -> Vec {
    /* Jacobian bounds over the interval hull of the two corners */
    Box hull_x(x.cwiseMin(dual), x.cwiseMax(dual));
    Box hull_w(wa.cwiseMin(wb), wa.cwiseMax(wb));
    JacobianBounds jb = jac(hull_x, u, hull_w);
    if (!jb.x_lo.allFinite() || !jb.x_hi.allFinite() || (nw > 0 && (!jb.w_lo.allFinite() ||
                                                                    !jb.w_hi.allFinite())))
      throw std::runtime_error("build_decomposition: Jacobian bounds not finite");

    Vec out(nx);
    Vec xi(nx), omega(nw);
    for (int i = 0; i < nx; ++i) {
      double bloat = 0.0;
      for (int j = 0; j < nx; ++j) {
        if (j == i) {
          xi[j] = x[j];  /* diagonal argument is the evaluation point itself */
          continue;
        }
        if (jb.x_lo(i, j) >= 0.0)
          xi[j] = x[j];
        else if (jb.x_hi(i, j) <= 0.0)
          xi[j] = dual[j];
        else {
          xi[j] = x[j];
          double m = std::max(std::abs(jb.x_lo(i, j)), std::abs(jb.x_hi(i, j)));
          bloat += m * (dual[j] - x[j]);
        }
      }
      for (int k = 0; k < nw; ++k) {
        if (jb.w_lo(i, k) >= 0.0)
          omega[k] = wa[k];
        else if (jb.w_hi(i, k) <= 0.0)
          omega[k] = wb[k];
        else {
          omega[k] = wa[k];
          double m = std::max(std::abs(jb.w_lo(i, k)), std::abs(jb.w_hi(i, k)));
          bloat += m * (wb[k] - wa[k]);
        }
      }
      out[i] = field(xi, u, omega)[i] - bloat;
    }
    return out;
  };
  return d;
}

Box embed_integrate(const DecompositionFunction& d, const Box& x0, const Vec& u, const Box& w,
                    const ReachSettings& s) {
  if (x0.is_empty()) throw std::invalid_argument("embed_integrate: empty initial box");
  if (s.horizon <= 0.0 || s.steps < 1)
    throw std::invalid_argument("embed_integrate: bad reach settings");
  int nx = d.dim_x;
  Vec lo = x0.lo(), hi = x0.hi();
  const Vec wlo = w.dim() > 0 ? Vec(w.lo()) : Vec(0);
  const Vec whi = w.dim() > 0 ? Vec(w.hi()) : Vec(0);

  auto rhs = [&](const Vec& l, const Vec& h, Vec& dl, Vec& dh) {
    dl = d.eval(l, h, u, wlo, whi);
    dh = d.eval(h, l, u, whi, wlo);
  };

  double dt = s.horizon / s.steps;
  Vec k1l(nx), k1h(nx), k2l(nx), k2h(nx), k3l(nx), k3h(nx), k4l(nx), k4h(nx);
  for (int step = 0; step < s.steps; ++step) {
    rhs(lo, hi, k1l, k1h);
    rhs(lo + 0.5 * dt * k1l, hi + 0.5 * dt * k1h, k2l, k2h);
    rhs(lo + 0.5 * dt * k2l, hi + 0.5 * dt * k2h, k3l, k3h);
    rhs(lo + dt * k3l, hi + dt * k3h, k4l, k4h);
    lo += dt / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
    hi += dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
    if (!lo.allFinite() || !hi.allFinite()) {
      std::ostringstream os;
      os << "embed_integrate: state diverged at step " << step << " from box " << x0.str()
         << " under input [" << u.transpose() << "]";
      throw std::runtime_error(os.str());
    }
    /* the embedding can momentarily cross under RK stages; keep order */
    for (int i = 0; i < nx; ++i)
      if (lo[i] > hi[i]) {
        double m = 0.5 * (lo[i] + hi[i]);
        lo[i] = hi[i] = m;
      }
  }
  Vec guard = s.inflation.size() ? s.inflation : Vec::Zero(nx);
  if (guard.size() != nx) throw std::invalid_argument("embed_integrate: inflation dim mismatch");
  return Box(lo - guard, hi + guard);
}

JacobianBoundFn jacobian_from_interval_fn(
    std::function<std::pair<IMat, IMat>(const IVec& x, const Vec& u, const IVec& w)> fn) {
  return [fn = std::move(fn)](const Box& x, const Vec& u, const Box& w) {
    IVec xi = to_ivec(x);
    IVec wi = w.dim() > 0 ? to_ivec(w) : IVec(0);
    auto [jx, jw] = fn(xi, u, wi);
    JacobianBounds jb;
    jb.x_lo.resize(jx.rows(), jx.cols());
    jb.x_hi.resize(jx.rows(), jx.cols());
    for (Eigen::Index i = 0; i < jx.rows(); ++i)
      for (Eigen::Index j = 0; j < jx.cols(); ++j) {
        jb.x_lo(i, j) = jx(i, j).lo;
        jb.x_hi(i, j) = jx(i, j).hi;
      }
    jb.w_lo.resize(jw.rows(), jw.cols());
    jb.w_hi.resize(jw.rows(), jw.cols());
    for (Eigen::Index i = 0; i < jw.rows(); ++i)
      for (Eigen::Index j = 0; j < jw.cols(); ++j) {
        jb.w_lo(i, j) = jw(i, j).lo;
        jb.w_hi(i, j) = jw(i, j).hi;
      }
    return jb;
  };
}

Vec rk4(const std::function<Vec(double t, const Vec& x)>& field, const Vec& x0, double t0,
        double t1, int steps) {
  if (steps < 1) throw std::invalid_argument("rk4: steps must be >= 1");
  Vec x = x0;
  double dt = (t1 - t0) / steps;
  for (int i = 0; i < steps; ++i) {
    double t = t0 + i * dt;
    Vec k1 = field(t, x);
    Vec k2 = field(t + 0.5 * dt, x + 0.5 * dt * k1);
    Vec k3 = field(t + 0.5 * dt, x + 0.5 * dt * k2);
    Vec k4 = field(t + dt, x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace reachsynth
