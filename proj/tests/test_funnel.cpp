#include "reachsynth/funnel.hpp"

#include "reachsynth/lqr.hpp"

#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

using namespace reachsynth;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

Box point_box(std::initializer_list<double> vals) {
  Vec v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return Box(v, v);
}

PolynomialMap unit_quadratic(int n) {
  return PolynomialMap::quadratic_form({{"t", 1}, {"e", n}}, "e", Mat::Identity(n, n));
}

PolynomialMap zero_kappa(int n_e, int n_xh, int n_uh, int n_u) {
  return PolynomialMap::linear_map({{"t", 1}, {"e", n_e}, {"xhat", n_xh}, {"uhat", n_uh}}, "e",
                                   Mat::Zero(n_u, n_e));
}

/* scalar test plant  de = sign * e + u */
ErrorSystem scalar_system(double sign) {
  auto f = [sign](const auto& e, const auto&, const auto&, const auto&, const auto&) {
    using V = std::decay_t<decltype(e)>;
    V out(1);
    out[0] = e[0] * typename V::Scalar(sign);
    return out;
  };
  auto g = [](const auto& e, const auto&, const auto&, const auto&) {
    using S = typename std::decay_t<decltype(e)>::Scalar;
    MatT<S> m(1, 1);
    m(0, 0) = S(1.0);
    return m;
  };
  AffineMap pi;
  pi.P = Mat::Zero(1, 2);
  pi.P(0, 0) = 1.0;
  pi.omega = Vec::Zero(1);
  return make_error_system(1, 1, 1, 0, 0, 1, f, g, pi);
}

FunnelCertificate scalar_certificate(double gamma) {
  FunnelCertificate c;
  c.V = unit_quadratic(1);
  c.kappa = zero_kappa(1, 1, 1, 1);
  c.gamma = gamma;
  c.t_s = 1.0;
  c.e0 = Box::symmetric(Vec::Constant(1, 0.5 * std::sqrt(gamma)));
  c.domains.xhat = point_box({0.0});
  c.domains.uhat = point_box({0.0});
  c.domains.delta_uhat = point_box({0.0});
  c.domains.w = Box::empty(0);
  c.domains.what = Box::empty(0);
  return c;
}

/* double integrator  de1 = e2, de2 = u */
ErrorSystem double_integrator() {
  auto f = [](const auto& e, const auto&, const auto&, const auto&, const auto&) {
    using V = std::decay_t<decltype(e)>;
    V out(2);
    out[0] = e[1];
    out[1] = typename V::Scalar(0.0);
    return out;
  };
  auto g = [](const auto& e, const auto&, const auto&, const auto&) {
    using S = typename std::decay_t<decltype(e)>::Scalar;
    MatT<S> m = MatT<S>::Zero(2, 1);
    m(1, 0) = S(1.0);
    return m;
  };
  return make_error_system(2, 1, 1, 0, 0, 1, f, g, AffineMap::identity_stacking(1, 1));
}

}  // namespace

TEST_CASE("initial containment of a centered box in the unit ball") {
  for (int n : {1, 2, 4}) {
    FunnelCertificate c;
    c.V = unit_quadratic(n);
    c.kappa = zero_kappa(n, 1, 1, 1);
    c.gamma = 1.0;
    c.t_s = 1.0;
    c.e0 = Box::symmetric(Vec::Constant(n, 0.5));
    CheckResult r = check_initial_containment(c);
    REQUIRE(r.verdict == Verdict::verified);
  }
}

TEST_CASE("initial containment falsified with a witness") {
  FunnelCertificate c;
  c.V = unit_quadratic(1);
  c.kappa = zero_kappa(1, 1, 1, 1);
  c.gamma = 0.1;
  c.t_s = 1.0;
  c.e0 = Box::symmetric(Vec::Constant(1, 1.0));
  CheckResult r = check_initial_containment(c);
  REQUIRE(r.verdict == Verdict::falsified);
  CHECK(std::abs(r.witness[0]) == doctest::Approx(1.0));
  CHECK(r.witness_value > 0.1);
}

TEST_CASE("level-set decrease verified for the stable scalar plant") {
  ErrorSystem es = scalar_system(-1.0);
  FunnelCertificate c = scalar_certificate(1.0);
  CheckResult r = check_decrease(c, es, 0.0);
  REQUIRE(r.verdict == Verdict::verified);
}

TEST_CASE("level-set decrease falsified for the unstable scalar plant") {
  ErrorSystem es = scalar_system(+1.0);
  FunnelCertificate c = scalar_certificate(1.0);
  CheckResult r = check_decrease(c, es, 0.0);
  REQUIRE(r.verdict == Verdict::falsified);
  /* witness re-evaluates positive: Vdot = 2 e^2 = 2 on the level set */
  CHECK(r.witness_value > 0.0);
  double e = r.witness[1];
  CHECK(2.0 * e * e == doctest::Approx(r.witness_value).epsilon(1e-9));
  CHECK(std::abs(e) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("jump condition is immediate when the map ignores the input") {
  ErrorSystem es = scalar_system(-1.0);  /* P row hits xhat only */
  FunnelCertificate c = scalar_certificate(1.0);
  c.domains.delta_uhat = Box::symmetric(Vec::Constant(1, 0.5));
  CheckResult r = check_jump(c, es);
  REQUIRE(r.verdict == Verdict::verified);
}

TEST_CASE("jump condition falsified by the arithmetic worst case") {
  ErrorSystem es = scalar_system(-1.0);
  es.pi.P = Mat::Zero(1, 2);
  es.pi.P(0, 1) = 1.0;  /* shift = delta input */
  FunnelCertificate c = scalar_certificate(1.0);
  c.domains.delta_uhat = Box::symmetric(Vec::Constant(1, 0.5));
  CheckResult r = check_jump(c, es);
  REQUIRE(r.verdict == Verdict::falsified);
  /* worst case |e - du| = 1.5 */
  CHECK(r.witness_value > 1.0);
}

TEST_CASE("funnel hull of the unit ball and of an axis-weighted ellipse") {
  FunnelCertificate c;
  c.V = unit_quadratic(3);
  c.kappa = zero_kappa(3, 1, 1, 1);
  c.gamma = 1.0;
  c.t_s = 1.0;
  Vec eps = compute_epsilon(c);
  CHECK((eps - Vec::Ones(3)).cwiseAbs().maxCoeff() < 1e-12);

  Mat q(2, 2);
  q << 4.0, 0.0, 0.0, 1.0;
  FunnelCertificate c2;
  c2.V = PolynomialMap::quadratic_form({{"t", 1}, {"e", 2}}, "e", q);
  c2.kappa = zero_kappa(2, 1, 1, 1);
  c2.gamma = 1.0;
  c2.t_s = 1.0;
  Vec eps2 = compute_epsilon(c2);
  CHECK(eps2[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(eps2[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("analytic hull agrees with the semi-axis formula on random forms") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    int n = 2 + static_cast<int>(rng() % 4);
    Mat l = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) l(i, j) = uniform(rng, -1, 1);
      l(i, i) = uniform(rng, 0.3, 2.0);
    }
    Mat q = l * l.transpose();
    double gamma = uniform(rng, 0.1, 10.0);
    FunnelCertificate c;
    c.V = PolynomialMap::quadratic_form({{"t", 1}, {"e", n}}, "e", q);
    c.kappa = zero_kappa(n, 1, 1, 1);
    c.gamma = gamma;
    c.t_s = 1.0;
    Vec eps = compute_epsilon(c);
    Mat qinv = q.llt().solve(Mat::Identity(n, n));
    for (int i = 0; i < n; ++i) {
      double expected = std::sqrt(gamma * qinv(i, i));
      REQUIRE(std::abs(eps[i] - expected) <= 1e-9 * expected);
    }
  }
}

TEST_CASE("hull is conservative over sampled funnel points") {
  Mat q(3, 3);
  q << 3.0, 0.4, 0.0, 0.4, 1.5, -0.2, 0.0, -0.2, 2.2;
  FunnelCertificate c;
  c.V = PolynomialMap::quadratic_form({{"t", 1}, {"e", 3}}, "e", q, 0.4);
  c.kappa = zero_kappa(3, 1, 1, 1);
  c.gamma = 2.0;
  c.t_s = 3.0;
  Vec eps = compute_epsilon(c);
  std::mt19937_64 rng(37);
  for (int k = 0; k < 10000; ++k) {
    double t = uniform(rng, 0, 3.0);
    Vec d(3);
    for (int i = 0; i < 3; ++i) d[i] = uniform(rng, -1, 1);
    if (d.norm() < 1e-9) continue;
    d.normalize();
    double scale = 1.0 + 0.4 * t;
    double s = std::sqrt(2.0 / (scale * d.dot(q * d)));
    Vec e = s * uniform(rng, 0, 1) * d;
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(e[i]) <= eps[i] + 1e-12);
  }
}

TEST_CASE("time-scaled quadratic hull matches the widest slice") {
  Mat q(2, 2);
  q << 2.0, 0.3, 0.3, 1.0;
  double gamma = 1.7, ts = 3.0;
  FunnelCertificate c;
  c.V = PolynomialMap::quadratic_form({{"t", 1}, {"e", 2}}, "e", q, 1.0 / ts);
  c.kappa = zero_kappa(2, 1, 1, 1);
  c.gamma = gamma;
  c.t_s = ts;
  Vec eps = compute_epsilon(c);
  Mat qinv = q.ldlt().solve(Mat::Identity(2, 2));
  for (int i = 0; i < 2; ++i) {
    double widest = std::sqrt(gamma * qinv(i, i));  /* t = 0 slice */
    REQUIRE(eps[i] >= widest - 1e-9);
    REQUIRE(eps[i] <= widest * 1.05);
  }
}

TEST_CASE("certificate text format round-trips bit-exactly") {
  FunnelCertificate c = scalar_certificate(0.7531246802);
  c.domains.w = Box(Vec::Constant(2, -0.01), Vec::Constant(2, 0.01));
  std::stringstream ss;
  c.write(ss);
  FunnelCertificate d = FunnelCertificate::read(ss);
  CHECK(c == d);
}

TEST_CASE("candidate generator stabilizes the double integrator") {
  ErrorSystem es = double_integrator();
  CertificateDomains dom;
  dom.xhat = point_box({0.0});
  dom.uhat = point_box({0.0});
  dom.delta_uhat = point_box({0.0});
  dom.w = Box::empty(0);
  dom.what = Box::empty(0);
  OperatingPoint op{Vec::Zero(1), Vec::Zero(1)};
  FunnelCertificate cert =
      lyap_candidate(es, op, Vec::Ones(2), Vec::Ones(1), dom, 1.0);

  /* the linear feedback embedded in kappa is stabilizing */
  Mat a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  Mat k(1, 2);
  Vec z = Vec::Zero(5);  /* (t, e1, e2, xhat, uhat) */
  for (int j = 0; j < 2; ++j) {
    z.setZero();
    z[1 + j] = 1.0;
    k(0, j) = cert.kappa.eval<double>(z)[0];
  }
  CHECK(spectral_abscissa(a + b * k) < 0.0);

  CHECK(cert.gamma > 0.0);
  CHECK(check_initial_containment(cert).verdict == Verdict::verified);
  CHECK(check_decrease(cert, es, 0.0).verdict == Verdict::verified);
  CHECK(check_jump(cert, es).verdict == Verdict::verified);
}

TEST_CASE("candidate generator with a funnel that narrows over the period") {
  ErrorSystem es = double_integrator();
  CertificateDomains dom;
  dom.xhat = point_box({0.0});
  dom.uhat = point_box({0.0});
  dom.delta_uhat = Box::symmetric(Vec::Constant(1, 0.05));
  dom.w = Box::empty(0);
  dom.what = Box::empty(0);
  OperatingPoint op{Vec::Zero(1), Vec::Zero(1)};
  CandidateOptions opts;
  opts.time_slope = 0.5;
  FunnelCertificate cert =
      lyap_candidate(es, op, Vec::Ones(2), Vec::Ones(1), dom, 1.0, opts);
  CHECK(check_jump(cert, es).verdict == Verdict::verified);
  CHECK(check_decrease(cert, es, 0.0).verdict != Verdict::falsified);
}

TEST_CASE("feedback fades out when control effort is penalized heavily") {
  ErrorSystem es = scalar_system(-1.0);
  CertificateDomains dom;
  dom.xhat = point_box({0.0});
  dom.uhat = point_box({0.0});
  dom.delta_uhat = point_box({0.0});
  dom.w = Box::empty(0);
  dom.what = Box::empty(0);
  FunnelCertificate cert = lyap_candidate(es, OperatingPoint{Vec::Zero(1), Vec::Zero(1)},
                                          Vec::Ones(1), Vec::Constant(1, 1e12), dom, 1.0);
  Vec z = Vec::Zero(4);
  z[1] = 1.0;
  CHECK(std::abs(cert.kappa.eval<double>(z)[0]) < 1e-3);
  CHECK(check_decrease(cert, es, 0.0).verdict == Verdict::verified);
}

TEST_CASE("plain error drift matches the composed definition") {
  /* concrete dx = A x + w over R^2, abstract dxhat = uhat over R,
   * pi = [xhat; uhat]; the simplified drift below must equal
   * f(e + pi, w) - [fhat; 0] on samples */
  Mat a(2, 2);
  a << -1.0, 1.0, 0.0, -1.0;
  auto f = [a](const auto& e, const auto& xh, const auto& uh, const auto& w, const auto& wh) {
    using V = std::decay_t<decltype(e)>;
    using S = typename V::Scalar;
    V x(2);
    x[0] = e[0] + xh[0];
    x[1] = e[1] + uh[0];
    V out = a.template cast<S>() * x;
    out[0] += w[0] - uh[0];  /* minus d pi/d xhat * fhat with fhat = uhat */
    out[1] += w[1];
    return out;
  };
  auto g = [](const auto& e, const auto&, const auto&, const auto&) {
    using S = typename std::decay_t<decltype(e)>::Scalar;
    return MatT<S>::Zero(2, 1).eval();
  };
  ErrorSystem es = make_error_system(2, 1, 1, 2, 1, 1, f, g, AffineMap::identity_stacking(1, 1));

  std::mt19937_64 rng(41);
  for (int k = 0; k < 1000; ++k) {
    Vec e(2), xh(1), uh(1), w(2), wh(1);
    for (int i = 0; i < 2; ++i) e[i] = uniform(rng, -1, 1);
    xh[0] = uniform(rng, -1, 1);
    uh[0] = uniform(rng, -1, 1);
    for (int i = 0; i < 2; ++i) w[i] = uniform(rng, -0.1, 0.1);
    wh[0] = uniform(rng, -0.1, 0.1);
    Vec x = concrete_state(e, xh, uh, es);
    Vec fhat(1);
    fhat << uh[0];
    Vec stacked(2);
    stacked << fhat[0], 0.0;
    Vec oracle = a * x + w - stacked;
    REQUIRE((es.f_e(e, xh, uh, w, wh) - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }
}
