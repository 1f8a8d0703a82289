#include "reachsynth/lqr.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace reachsynth {

double spectral_abscissa(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a);
  return es.eigenvalues().real().maxCoeff();
}

Mat solve_lyapunov(const Mat& a, const Mat& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("solve_lyapunov: size mismatch");
  /* vec(A'X + XA) = (I (x) A' + A' (x) I) vec(X) */
  Mat k = Mat::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    k.block(i * n, i * n, n, n) += a.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index r = 0; r < n; ++r) k(i * n + r, j * n + r) += a(j, i);
  Vec rhs(n * n);
  for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = -q.col(j);
  Vec x = k.fullPivLu().solve(rhs);
  Mat sol(n, n);
  for (Eigen::Index j = 0; j < n; ++j) sol.col(j) = x.segment(j * n, n);
  return 0.5 * (sol + sol.transpose());
}

Mat solve_care(const Mat& a, const Mat& b, const Mat& q, const Mat& r) {
  const Eigen::Index n = a.rows();
  if (b.rows() != n || q.rows() != n || r.rows() != b.cols())
    throw std::invalid_argument("solve_care: size mismatch");
  Mat rinv = r.fullPivLu().inverse();
  Mat g = b * rinv * b.transpose();

  /* Riccati flow dX/dt = A'X + XA - XGX + Q from X = 0 converges to the
   * stabilizing solution; adaptive step keeps the explicit scheme tame. */
  Mat x = Mat::Zero(n, n);
  auto flow = [&](const Mat& m) -> Mat {
    return a.transpose() * m + m * a - m * g * m + q;
  };
  double dt = 0.05;
  double res = flow(x).norm();
  for (int it = 0; it < 200000 && res > 1e-10; ++it) {
    Mat k1 = flow(x);
    Mat k2 = flow(x + 0.5 * dt * k1);
    Mat k3 = flow(x + 0.5 * dt * k2);
    Mat k4 = flow(x + dt * k3);
    Mat xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    xn = 0.5 * (xn + xn.transpose());
    double rn = flow(xn).norm();
    if (!xn.allFinite() || rn > 4.0 * res + 1.0) {
      dt *= 0.5;
      if (dt < 1e-9) throw std::runtime_error("solve_care: Riccati flow did not converge");
      continue;
    }
    if (rn < res) dt *= 1.05;
    x = xn;
    res = rn;
  }

  /* Newton-Kleinman polish: with K = -R^-1 B'X, solve the Lyapunov
   * equation of the closed loop for the next iterate */
  for (int it = 0; it < 50; ++it) {
    Mat k_gain = -rinv * b.transpose() * x;
    Mat acl = a + b * k_gain;
    if (spectral_abscissa(acl) >= 0.0) break;
    Mat rhs = q + k_gain.transpose() * r * k_gain;
    Mat xn = solve_lyapunov(acl, rhs);
    double step = (xn - x).norm();
    x = 0.5 * (xn + xn.transpose());
    if (step < 1e-13 * (1.0 + x.norm())) break;
  }

  double residual = flow(x).norm();
  if (!(residual < 1e-6 * (1.0 + x.norm())))
    throw std::runtime_error("solve_care: residual too large, pair may be unstabilizable");
  Mat acl = a - g * x;
  if (spectral_abscissa(acl) >= 0.0)
    throw std::runtime_error("solve_care: closed loop not Hurwitz (unstabilizable pair?)");
  return x;
}

Mat lqr_gain(const Mat& a, const Mat& b, const Mat& q, const Mat& r) {
  Mat x = solve_care(a, b, q, r);
  return -r.fullPivLu().inverse() * b.transpose() * x;
}

}  // namespace reachsynth
