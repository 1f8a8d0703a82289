#include "reachsynth/ship.hpp"

#include <type_traits>

namespace reachsynth {

ShipParams ShipParams::scale_model() {
  ShipParams p;
  p.m.resize(3, 3);
  p.m << 87.4, 0.0, 0.0, 0.0, 98.3, 2.48, 0.0, 2.48, 22.2;
  p.d.resize(3, 3);
  p.d << 6.58, 0.0, 0.0, 0.0, 37.7, 2.66, 0.0, 2.66, 19.3;
  p.coriolis_gain.resize(3, 3);
  p.coriolis_gain << 0.0, 0.0, 0.0, 0.0, 0.0, 98.3, 0.0, 0.0, 2.48;
  p.m_inv = p.m.inverse();
  return p;
}

Mat rotation(double psi) { return rotation_t<double>(psi); }

Vec ship_dynamics(const Vec& x, const Vec& tau, const Vec& w, const ShipParams& p) {
  return ship_dynamics_t<double>(x, tau, w, p);
}

Vec ship_kinematics(const Vec& xhat, const Vec& uhat, const Vec& what) {
  return ship_kinematics_t<double>(xhat, uhat, what);
}

VectorField ship_kinematics_field() {
  VectorField f;
  f.dim_x = 3;
  f.dim_u = 3;
  f.dim_w = 3;
  f.eval = [](const Vec& x, const Vec& u, const Vec& w) { return ship_kinematics(x, u, w); };
  return f;
}

JacobianBoundFn ship_kinematics_jacobian() {
  /* only the heading column of df/dxhat is non-zero; df/dwhat = I */
  return jacobian_from_interval_fn(
      [](const IVec& x, const Vec& u, const IVec& w) -> std::pair<IMat, IMat> {
        (void)w;
        Interval psi = x[2];
        Interval s = sin(psi), c = cos(psi);
        IMat jx = IMat::Zero(3, 3);
        jx(0, 2) = -s * Interval(u[0]) - c * Interval(u[1]);
        jx(1, 2) = c * Interval(u[0]) - s * Interval(u[1]);
        IMat jw = IMat::Zero(3, 3);
        for (int i = 0; i < 3; ++i) jw(i, i) = Interval(1.0);
        return {jx, jw};
      });
}

ErrorSystem ship_error_system(const ShipParams& p) {
  auto drift = [p](const auto& e, const auto& xh, const auto& uh, const auto& w,
                   const auto& wh) { return ship_error_drift(e, xh, uh, w, wh, p); };
  auto input = [p](const auto& e, const auto&, const auto&, const auto&) {
    using S = typename std::decay_t<decltype(e)>::Scalar;
    MatT<S> g = MatT<S>::Zero(6, 3);
    g.template bottomRows<3>() = p.m_inv.template cast<S>();
    return g;
  };
  ErrorSystem es =
      make_error_system(6, 3, 3, 6, 3, 3, drift, input, AffineMap::identity_stacking(3, 3));
  es.state_transform = [](const Vec& xhat) {
    Mat phi = Mat::Identity(6, 6);
    phi.topLeftCorner(3, 3) = rotation(xhat[2]).transpose();
    return phi;
  };
  return es;
}

}  // namespace reachsynth
