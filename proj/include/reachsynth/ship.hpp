/*
 * ship.hpp
 *
 * Marine-vessel case study: 6-D surge/sway/yaw dynamics of a 1:30 scale
 * platform supply vessel, its kinematic continuous abstraction, and the
 * heading-aligned tracking-error system between the two. The numeric
 * model parameters are fixed project data; see docs/error_dynamics.md
 * for the derivation of the error field.
 *
 * State x = [N; E; psi; u; v; r] (positions, heading, body velocities),
 * control tau in R^3, disturbance w = [v_c; tau_wind] in R^6. The
 * abstraction keeps the kinematics: xhat = eta_hat, uhat = nu_hat,
 * what = vhat_c.
 */

#pragma once

#include "reachsynth/funnel.hpp"
#include "reachsynth/interval.hpp"
#include "reachsynth/reach.hpp"
#include "reachsynth/types.hpp"

namespace reachsynth {

struct ShipParams {
  Mat m;              /* inertia incl. added mass */
  Mat d;              /* linear damping */
  Mat coriolis_gain;  /* C(nu) = nu(1) * coriolis_gain */
  Mat m_inv;

  static ShipParams scale_model();
};

/* planar rotation about the yaw axis, any scalar ring */
template <class S>
MatT<S> rotation_t(const S& psi) {
  using std::cos;
  using std::sin;
  MatT<S> r(3, 3);
  S c = cos(psi), s = sin(psi);
  r << c, -s, S(0.0), s, c, S(0.0), S(0.0), S(0.0), S(1.0);
  return r;
}

Mat rotation(double psi);

/* eta_dot = R(psi) nu + v_c,  M nu_dot + C(nu) nu + D nu = tau + R'(psi) tau_wind */
template <class S>
VecT<S> ship_dynamics_t(const VecT<S>& x, const VecT<S>& tau, const VecT<S>& w,
                        const ShipParams& p) {
  VecT<S> nu = x.segment(3, 3);
  MatT<S> r = rotation_t(x[2]);
  VecT<S> out(6);
  out.head(3) = r * nu + w.head(3);
  VecT<S> coriolis = p.coriolis_gain.template cast<S>() * nu;
  coriolis = nu[0] * coriolis;
  out.tail(3) =
      p.m_inv.template cast<S>() *
      (tau + r.transpose() * w.tail(3) - coriolis - p.d.template cast<S>() * nu);
  return out;
}

Vec ship_dynamics(const Vec& x, const Vec& tau, const Vec& w, const ShipParams& p);

/* kinematic abstraction  eta_hat_dot = R(psi_hat) nu_hat + vhat_c */
template <class S>
VecT<S> ship_kinematics_t(const VecT<S>& xhat, const VecT<S>& uhat, const VecT<S>& what) {
  VecT<S> out = rotation_t(xhat[2]) * uhat;
  if (what.size() > 0) out += what;
  return out;
}

Vec ship_kinematics(const Vec& xhat, const Vec& uhat, const Vec& what);

VectorField ship_kinematics_field();

/* interval Jacobian bounds of the kinematics for the embedding field */
JacobianBoundFn ship_kinematics_jacobian();

/* Tracking error in heading-aligned coordinates,
 *   e = blkdiag(R(psi_hat)', I) (x - [xhat; uhat]),
 * so e(3) = psi - psi_hat and the pose error lives in the body frame of
 * the abstraction. Drift and input matrix of the error dynamics: */
template <class S>
VecT<S> ship_error_drift(const VecT<S>& e, const VecT<S>& xhat, const VecT<S>& uhat,
                         const VecT<S>& w, const VecT<S>& what, const ShipParams& p) {
  VecT<S> ep = e.head(3), ev = e.tail(3);
  VecT<S> nu = ev + uhat;
  S psi_hat = xhat[2];
  MatT<S> r_hat_tr = rotation_t(psi_hat).transpose();
  MatT<S> r_err = rotation_t(e[2]);

  /* d/dt [R(psi_hat)' (eta - eta_hat)]:
   *   -(uhat_3 + what_3) S e_p + R(e_3) nu - uhat + R(psi_hat)'(v_c - what) */
  S yaw_rate = uhat[2] + (what.size() > 0 ? what[2] : S(0.0));
  VecT<S> skew_ep(3);
  skew_ep << -ep[1], ep[0], S(0.0);
  VecT<S> pose = r_err * nu - uhat;
  pose -= yaw_rate * skew_ep;
  VecT<S> dist = w.head(3);
  if (what.size() > 0) dist -= what;
  pose += r_hat_tr * dist;

  /* d/dt (nu - uhat) with zero-order-held uhat:
   *   M^-1 (R(psi)' tau_wind - C(nu) nu - D nu) */
  MatT<S> r_full_tr = rotation_t(psi_hat + e[2]).transpose();
  VecT<S> coriolis = p.coriolis_gain.template cast<S>() * nu;
  coriolis = nu[0] * coriolis;
  VecT<S> vel = p.m_inv.template cast<S>() *
                (r_full_tr * w.tail(3) - coriolis - p.d.template cast<S>() * nu);

  VecT<S> out(6);
  out << pose, vel;
  return out;
}

/* error system with phi-rotation, pi = identity stacking */
ErrorSystem ship_error_system(const ShipParams& p);

}  // namespace reachsynth
