#include "reachsynth/funnel.hpp"

#include "reachsynth/lqr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace reachsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double urand(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

double gauss(std::mt19937_64& rng) {
  double u1 = urand(rng, 1e-12, 1.0), u2 = urand(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/* uniform point in a box; with corner_bias, each coordinate snaps to a
 * face with probability 1/2 (finds worst cases on box boundaries) */
Vec box_sample(std::mt19937_64& rng, const Box& b, bool corner_bias) {
  Vec s(b.dim());
  for (Eigen::Index i = 0; i < b.dim(); ++i) {
    double lo = b.lo()[i], hi = b.hi()[i];
    if (corner_bias && (rng() & 1u)) {
      s[i] = (rng() & 1u) ? hi : lo;
    } else {
      s[i] = urand(rng, lo, hi);
    }
  }
  return s;
}

void write_double(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

double read_double(std::istream& is) {
  std::string tok;
  is >> tok;
  if (!is) throw std::runtime_error("certificate: truncated number");
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str()) throw std::runtime_error("certificate: bad number '" + tok + "'");
  return v;
}

void write_box(std::ostream& os, const Box& b) {
  os << "box " << b.dim() << ' ' << (b.is_empty() ? 0 : 1);
  if (!b.is_empty()) {
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
      os << ' ';
      write_double(os, b.lo()[i]);
    }
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
      os << ' ';
      write_double(os, b.hi()[i]);
    }
  }
  os << '\n';
}

Box read_box(std::istream& is) {
  std::string tag;
  int dim = 0, nonempty = 0;
  is >> tag >> dim >> nonempty;
  if (tag != "box" || !is) throw std::runtime_error("certificate: bad box header");
  if (!nonempty) return Box::empty(dim);
  Vec lo(dim), hi(dim);
  for (int i = 0; i < dim; ++i) lo[i] = read_double(is);
  for (int i = 0; i < dim; ++i) hi[i] = read_double(is);
  return Box(lo, hi);
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::verified: return "verified";
    case Verdict::falsified: return "falsified";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

Vec error_state(const Vec& x, const Vec& xhat, const Vec& uhat, const ErrorSystem& es) {
  Vec raw = x - es.pi.apply(xhat, uhat);
  if (es.state_transform) return (*es.state_transform)(xhat)*raw;
  return raw;
}

Vec concrete_state(const Vec& e, const Vec& xhat, const Vec& uhat, const ErrorSystem& es) {
  Vec raw = e;
  if (es.state_transform) {
    Mat phi = (*es.state_transform)(xhat);
    raw = phi.fullPivLu().solve(e);
  }
  return raw + es.pi.apply(xhat, uhat);
}

/* ------------------------------------------------------------------ */
/* certificate io                                                      */

void FunnelCertificate::write(std::ostream& os) const {
  os << "reachsynth-certificate 1\n";
  os << "gamma ";
  write_double(os, gamma);
  os << "\nts ";
  write_double(os, t_s);
  os << "\nV\n";
  V.write(os);
  os << "kappa\n";
  kappa.write(os);
  os << "e0\n";
  write_box(os, e0);
  os << "domains\n";
  write_box(os, domains.xhat);
  write_box(os, domains.uhat);
  write_box(os, domains.delta_uhat);
  write_box(os, domains.w);
  write_box(os, domains.what);
}

FunnelCertificate FunnelCertificate::read(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "reachsynth-certificate" || version != 1)
    throw std::runtime_error("certificate: unknown header");
  FunnelCertificate c;
  is >> tag;
  if (tag != "gamma") throw std::runtime_error("certificate: expected gamma");
  c.gamma = read_double(is);
  is >> tag;
  if (tag != "ts") throw std::runtime_error("certificate: expected ts");
  c.t_s = read_double(is);
  is >> tag;
  if (tag != "V") throw std::runtime_error("certificate: expected V");
  c.V = PolynomialMap::read(is);
  is >> tag;
  if (tag != "kappa") throw std::runtime_error("certificate: expected kappa");
  c.kappa = PolynomialMap::read(is);
  is >> tag;
  if (tag != "e0") throw std::runtime_error("certificate: expected e0");
  c.e0 = read_box(is);
  is >> tag;
  if (tag != "domains") throw std::runtime_error("certificate: expected domains");
  c.domains.xhat = read_box(is);
  c.domains.uhat = read_box(is);
  c.domains.delta_uhat = read_box(is);
  c.domains.w = read_box(is);
  c.domains.what = read_box(is);
  return c;
}

void FunnelCertificate::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("certificate: cannot write " + path);
  write(os);
}

FunnelCertificate FunnelCertificate::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("certificate: cannot read " + path);
  return read(is);
}

bool FunnelCertificate::operator==(const FunnelCertificate& other) const {
  auto box_eq = [](const Box& a, const Box& b) {
    if (a.dim() != b.dim() || a.is_empty() != b.is_empty()) return false;
    if (a.is_empty()) return true;
    return (a.lo().array() == b.lo().array()).all() &&
           (a.hi().array() == b.hi().array()).all();
  };
  return gamma == other.gamma && t_s == other.t_s && V == other.V && kappa == other.kappa &&
         box_eq(e0, other.e0) && box_eq(domains.xhat, other.domains.xhat) &&
         box_eq(domains.uhat, other.domains.uhat) &&
         box_eq(domains.delta_uhat, other.domains.delta_uhat) &&
         box_eq(domains.w, other.domains.w) && box_eq(domains.what, other.domains.what);
}

/* ------------------------------------------------------------------ */
/* storage-function structure helpers                                  */

std::optional<Mat> quadratic_storage_matrix(const PolynomialMap& v) {
  if (v.output_dim() != 1) return std::nullopt;
  int e_off = v.group_offset("e"), n = v.group_arity("e");
  Mat q = Mat::Zero(n, n);
  for (const auto& t : v.terms(0)) {
    int e_deg = 0;
    for (int i = 0; i < n; ++i) e_deg += t.exponents[e_off + i];
    if (e_deg != 2 || t.exponents.sum() != 2) return std::nullopt;  /* t or cross deps */
    int i = -1, j = -1;
    for (int k = 0; k < n; ++k) {
      if (t.exponents[e_off + k] == 2) i = j = k;
      if (t.exponents[e_off + k] == 1) (i < 0 ? i : j) = k;
    }
    if (i == j)
      q(i, i) += t.coeff;
    else {
      q(i, j) += 0.5 * t.coeff;
      q(j, i) += 0.5 * t.coeff;
    }
  }
  return q;
}

namespace {

/* detect V(t,e) = sum_k t^k e'Q_k e; empty result when V is not
 * quadratic in e */
std::optional<std::vector<Mat>> t_scaled_quadratic(const PolynomialMap& v) {
  if (v.output_dim() != 1) return std::nullopt;
  int e_off = v.group_offset("e"), n = v.group_arity("e");
  int t_off = v.group_offset("t");
  std::vector<Mat> qs;
  for (const auto& t : v.terms(0)) {
    int e_deg = 0;
    for (int i = 0; i < n; ++i) e_deg += t.exponents[e_off + i];
    int t_deg = t.exponents[t_off];
    if (e_deg != 2 || e_deg + t_deg != t.exponents.sum()) return std::nullopt;
    while (static_cast<int>(qs.size()) <= t_deg) qs.push_back(Mat::Zero(n, n));
    int i = -1, j = -1;
    for (int k = 0; k < n; ++k) {
      if (t.exponents[e_off + k] == 2) i = j = k;
      if (t.exponents[e_off + k] == 1) (i < 0 ? i : j) = k;
    }
    if (i == j)
      qs[t_deg](i, i) += t.coeff;
    else {
      qs[t_deg](i, j) += 0.5 * t.coeff;
      qs[t_deg](j, i) += 0.5 * t.coeff;
    }
  }
  if (qs.empty()) return std::nullopt;
  return qs;
}

Vec ellipsoid_hull(const Mat& q, double gamma) {
  Eigen::LDLT<Mat> ldlt(q);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("compute_epsilon: storage matrix not positive definite");
  const Eigen::Index n = q.rows();
  Mat qinv = ldlt.solve(Mat::Identity(n, n));
  Vec eps(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double qi = qinv(i, i);
    if (!(qi > 0.0) || !(gamma >= 0.0))
      throw std::runtime_error("compute_epsilon: degenerate level set");
    eps[i] = std::sqrt(gamma * qi);
  }
  return eps;
}

/* conservative enclosure of {e | V(t,e) <= gamma} for all t in [0, Ts];
 * analytic for the quadratic family, otherwise a large fallback window
 * whose adequacy the branch-and-bound pass confirms */
Box level_enclosure(const PolynomialMap& v, double gamma, double t_s) {
  int n = v.group_arity("e");
  if (auto qs = t_scaled_quadratic(v)) {
    /* Q(t) = sum t^k Q_k; bound the hull over a fine t grid and inflate */
    Vec eps = Vec::Zero(n);
    bool any = false;
    for (int k = 0; k <= 256; ++k) {
      double t = t_s * k / 256.0;
      Mat q = Mat::Zero(n, n);
      double tk = 1.0;
      for (const Mat& qk : *qs) {
        q += tk * qk;
        tk *= t;
      }
      Eigen::LDLT<Mat> ldlt(q);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
      any = true;
      eps = eps.cwiseMax(ellipsoid_hull(q, gamma));
    }
    if (any) return Box::symmetric(1.25 * eps.array().max(1e-12).matrix());
  }
  return Box::symmetric(Vec::Constant(n, 1e6));
}

/* branch-and-bound upper bound of max over {z in b0 | feasible(z)} of
 * sign * z[axis]; feasible is given by an interval predicate returning
 * -1 (whole box infeasible), +1 (whole box feasible), 0 (undecided) */
struct BnbResult {
  double bound = -kInf;
  std::int64_t boxes = 0;
  bool budget_ok = true;
};

template <class FeasibleFn>
BnbResult bnb_max_coordinate(const Box& b0, int axis, double sign, FeasibleFn feasible,
                             std::int64_t max_boxes, const Vec& width_floor) {
  BnbResult res;
  std::deque<Box> work{b0};
  auto potential = [&](const Box& b) { return sign > 0 ? sign * b.hi()[axis] : sign * b.lo()[axis]; };
  while (!work.empty()) {
    if (++res.boxes > max_boxes) {
      /* whatever is still open caps the bound conservatively */
      for (const Box& b : work) res.bound = std::max(res.bound, potential(b));
      res.budget_ok = false;
      break;
    }
    Box b = work.front();
    work.pop_front();
    if (potential(b) <= res.bound) continue;
    int f = feasible(b);
    if (f < 0) continue;
    if (f > 0) {
      res.bound = std::max(res.bound, potential(b));
      continue;
    }
    /* split the relatively widest dimension still above the floor */
    int split = -1;
    double best = 1.0;
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
      double rel = b.width()[i] / std::max(width_floor[i], 1e-300);
      if (rel > best) {
        best = rel;
        split = static_cast<int>(i);
      }
    }
    if (split < 0) {
      res.bound = std::max(res.bound, potential(b));  /* at floor: accept */
      continue;
    }
    Vec mid = b.center();
    Vec lo = b.lo(), hi = b.hi();
    Vec hi1 = hi;
    hi1[split] = mid[split];
    Vec lo2 = lo;
    lo2[split] = mid[split];
    /* explore the half with the better potential first */
    Box first(lo, hi1), second(lo2, hi);
    if (potential(second) > potential(first)) std::swap(first, second);
    work.push_front(second);
    work.push_front(first);
  }
  return res;
}

}  // namespace

Vec compute_epsilon(const FunnelCertificate& cert, const CheckBudget& budget) {
  const int n = cert.V.group_arity("e");
  if (auto q = quadratic_storage_matrix(cert.V)) return ellipsoid_hull(*q, cert.gamma);

  /* Lipschitz-in-t margin on the level: between grid samples the level
   * set can only grow by |dV/dt| * dt/2 worth of level */
  Box enclosure = level_enclosure(cert.V, cert.gamma, cert.t_s);
  PolynomialMap dv_dt = cert.V.derivative(cert.V.group_offset("t"));
  const int kSamples = 64;
  double dt = cert.t_s / kSamples;
  IVec z_all(1 + n);
  z_all[0] = Interval(0.0, cert.t_s);
  for (int i = 0; i < n; ++i) z_all[1 + i] = Interval(enclosure.lo()[i], enclosure.hi()[i]);
  double lip_t = dv_dt.eval<Interval>(z_all)[0].mag();
  double level = cert.gamma + lip_t * 0.5 * dt;

  Vec width_floor = enclosure.width() * budget.min_rel_width;
  Vec eps = Vec::Zero(n);
  for (int k = 0; k < kSamples; ++k) {
    double t = (k + 0.5) * dt;
    auto feasible = [&](const Box& b) {
      IVec z(1 + n);
      z[0] = Interval(t);
      for (int i = 0; i < n; ++i) z[1 + i] = Interval(b.lo()[i], b.hi()[i]);
      Interval v = cert.V.eval<Interval>(z)[0];
      if (v.lo > level) return -1;
      if (v.hi <= level) return 1;
      return 0;
    };
    for (int i = 0; i < n; ++i)
      for (double sign : {1.0, -1.0}) {
        BnbResult r = bnb_max_coordinate(enclosure, i, sign, feasible,
                                         budget.max_boxes / (2 * n), width_floor);
        if (r.bound >= 0.99e6)
          throw std::runtime_error("compute_epsilon: level-set bound refinement diverged");
        eps[i] = std::max(eps[i], std::max(0.0, r.bound));
      }
  }
  return eps;
}

/* ------------------------------------------------------------------ */
/* Vdot evaluation                                                     */

namespace {

struct VdotEvaluator {
  const FunnelCertificate* cert;
  const ErrorSystem* es;
  std::vector<PolynomialMap> grad_e;
  PolynomialMap dv_dt;
  int n_e, n_xh, n_uh, n_w, n_wh;

  VdotEvaluator(const FunnelCertificate& c, const ErrorSystem& s) : cert(&c), es(&s) {
    grad_e = c.V.group_gradient("e");
    dv_dt = c.V.derivative(c.V.group_offset("t"));
    n_e = s.dim_e;
    n_xh = s.dim_xhat;
    n_uh = s.dim_uhat;
    n_w = s.dim_w;
    n_wh = s.dim_what;
  }

  template <class S>
  S eval(const S& t, const VecT<S>& e, const VecT<S>& xh, const VecT<S>& uh, const VecT<S>& w,
         const VecT<S>& wh) const {
    VecT<S> zt(1 + n_e);
    zt[0] = t;
    zt.tail(n_e) = e;
    VecT<S> zk(1 + n_e + n_xh + n_uh);
    zk[0] = t;
    zk.segment(1, n_e) = e;
    zk.segment(1 + n_e, n_xh) = xh;
    zk.tail(n_uh) = uh;

    VecT<S> u = cert->kappa.eval<S>(zk);
    VecT<S> drift = field_f(e, xh, uh, w, wh);
    MatT<S> gmat = field_g(e, xh, uh, w);
    VecT<S> edot = drift + gmat * u;

    S acc = dv_dt.eval<S>(zt)[0];
    for (int i = 0; i < n_e; ++i) acc += grad_e[i].eval<S>(zt)[0] * edot[i];
    return acc;
  }

  Vec field_f(const Vec& e, const Vec& xh, const Vec& uh, const Vec& w, const Vec& wh) const {
    return es->f_e(e, xh, uh, w, wh);
  }
  IVec field_f(const IVec& e, const IVec& xh, const IVec& uh, const IVec& w,
               const IVec& wh) const {
    return es->f_e_iv(e, xh, uh, w, wh);
  }
  Mat field_g(const Vec& e, const Vec& xh, const Vec& uh, const Vec& w) const {
    return es->g_e(e, xh, uh, w);
  }
  IMat field_g(const IVec& e, const IVec& xh, const IVec& uh, const IVec& w) const {
    return es->g_e_iv(e, xh, uh, w);
  }
};

/* D(e, du) = V(0, e - P_u du) - V(T_s, e) as an explicit polynomial over
 * groups (e, du); proving D <= 0 on a feasible box settles the jump
 * condition even where V(0, .) sits exactly on the level boundary */
PolynomialMap jump_difference(const PolynomialMap& v, double t_s, const Mat& p_u) {
  const int n = v.group_arity("e");
  const int nd = static_cast<int>(p_u.cols());
  const int t_off = v.group_offset("t"), e_off = v.group_offset("e");
  using Key = std::vector<int>;
  std::map<Key, double> acc;

  auto add = [&](const Key& k, double c) { acc[k] += c; };

  for (const auto& term : v.terms(0)) {
    int a = term.exponents[t_off];
    /* shifted part at t = 0: t^a vanishes unless a == 0 */
    if (a == 0) {
      /* expand coeff * prod_i (e_i - sum_j p_u(i,j) du_j)^(k_i) */
      std::map<Key, double> prod{{Key(n + nd, 0), term.coeff}};
      for (int i = 0; i < n; ++i) {
        for (int rep = 0; rep < term.exponents[e_off + i]; ++rep) {
          std::map<Key, double> next;
          for (const auto& [key, c] : prod) {
            Key k1 = key;
            k1[i] += 1;
            next[k1] += c;
            for (int j = 0; j < nd; ++j) {
              if (p_u(i, j) == 0.0) continue;
              Key k2 = key;
              k2[n + j] += 1;
              next[k2] -= c * p_u(i, j);
            }
          }
          prod = std::move(next);
        }
      }
      for (const auto& [key, c] : prod) add(key, c);
    }
    /* minus the unshifted part at t = T_s */
    double tsc = 1.0;
    for (int r = 0; r < a; ++r) tsc *= t_s;
    Key k(n + nd, 0);
    for (int i = 0; i < n; ++i) k[i] = term.exponents[e_off + i];
    add(k, -term.coeff * tsc);
  }

  PolynomialMap d(std::vector<VarGroup>{{"e", n}, {"du", nd}}, 1);
  for (const auto& [key, c] : acc) {
    if (c == 0.0) continue;
    VecI ex(n + nd);
    for (int i = 0; i < n + nd; ++i) ex[i] = key[i];
    d.add_term(0, c, ex);
  }
  d.canonicalize();
  return d;
}

/* scale a random direction onto the level set V(t, s*d) = gamma; returns
 * false when the ray never crosses the level within the cap */
bool ray_to_level(const PolynomialMap& v, double t, const Vec& dir, double gamma, Vec& e_out) {
  const int n = dir.size();
  Vec z(1 + n);
  z[0] = t;
  auto value = [&](double s) {
    z.tail(n) = s * dir;
    return v.eval<double>(z)[0];
  };
  if (value(0.0) > gamma) return false;
  double s_hi = 1.0;
  int guard = 0;
  while (value(s_hi) <= gamma) {
    s_hi *= 2.0;
    if (++guard > 120) return false;
  }
  double s_lo = s_hi * 0.5 > 1.0 ? s_hi * 0.5 : 0.0;
  for (int it = 0; it < 80; ++it) {
    double m = 0.5 * (s_lo + s_hi);
    (value(m) <= gamma ? s_lo : s_hi) = m;
  }
  /* the lower end is on the feasible side of the level */
  e_out = s_lo * dir;
  return true;
}

void require_bounded(const Box& b, const char* name) {
  if (b.is_empty() || !b.is_bounded())
    throw std::invalid_argument(std::string("funnel check: domain ") + name +
                                " must be non-empty and bounded");
}

}  // namespace

/* ------------------------------------------------------------------ */
/* the three conditions                                                */

CheckResult check_initial_containment(const FunnelCertificate& cert, const CheckBudget& budget) {
  CheckResult res;
  if (cert.e0.is_empty())
    throw std::invalid_argument("check_initial_containment: E0 empty");
  require_bounded(cert.e0, "E0");
  const int n = cert.V.group_arity("e");
  std::mt19937_64 rng(budget.seed);
  const double gamma_slack = 1e-10 * std::max(1.0, std::abs(cert.gamma));

  /* sampling pass: corners first, then random */
  auto v0 = [&](const Vec& e) {
    Vec z(1 + n);
    z[0] = 0.0;
    z.tail(n) = e;
    return cert.V.eval<double>(z)[0];
  };
  std::int64_t corner_count = n <= 16 ? (std::int64_t{1} << n) : 0;
  for (std::int64_t c = 0; c < corner_count; ++c) {
    Vec e(n);
    for (int i = 0; i < n; ++i) e[i] = (c >> i) & 1 ? cert.e0.hi()[i] : cert.e0.lo()[i];
    ++res.samples_drawn;
    double val = v0(e);
    if (val > cert.gamma + gamma_slack) {
      res.verdict = Verdict::falsified;
      res.witness = e;
      res.witness_value = val;
      return res;
    }
  }
  for (std::int64_t k = 0; k < budget.samples; ++k) {
    Vec e = box_sample(rng, cert.e0, true);
    ++res.samples_drawn;
    double val = v0(e);
    if (val > cert.gamma + gamma_slack) {
      res.verdict = Verdict::falsified;
      res.witness = e;
      res.witness_value = val;
      return res;
    }
  }

  /* interval pass: prove sup over E0 of V(0,.) <= gamma */
  Vec width_floor = cert.e0.width() * budget.min_rel_width;
  std::deque<Box> work{cert.e0};
  while (!work.empty()) {
    if (++res.boxes_processed > budget.max_boxes) {
      res.verdict = Verdict::inconclusive;
      res.detail = "bisection budget exhausted";
      return res;
    }
    Box b = work.front();
    work.pop_front();
    IVec z(1 + n);
    z[0] = Interval(0.0);
    for (int i = 0; i < n; ++i) z[1 + i] = Interval(b.lo()[i], b.hi()[i]);
    Interval v = cert.V.eval<Interval>(z)[0];
    if (v.hi <= cert.gamma) continue;
    int split = -1;
    double best = 1.0;
    for (int i = 0; i < n; ++i) {
      double rel = b.width()[i] / std::max(width_floor[i], 1e-300);
      if (rel > best) {
        best = rel;
        split = i;
      }
    }
    if (split < 0) {
      res.verdict = Verdict::inconclusive;
      res.detail = "width floor reached with V possibly above gamma";
      return res;
    }
    Vec mid = b.center();
    Vec hi1 = b.hi();
    hi1[split] = mid[split];
    Vec lo2 = b.lo();
    lo2[split] = mid[split];
    work.emplace_back(b.lo(), hi1);
    work.emplace_back(lo2, b.hi());
  }
  res.verdict = Verdict::verified;
  return res;
}

CheckResult check_decrease(const FunnelCertificate& cert, const ErrorSystem& es, double tolerance,
                           const CheckBudget& budget) {
  CheckResult res;
  require_bounded(cert.domains.xhat, "Xhat");
  require_bounded(cert.domains.uhat, "Uhat");
  if (es.dim_w > 0) require_bounded(cert.domains.w, "W");
  if (es.dim_what > 0) require_bounded(cert.domains.what, "What");

  VdotEvaluator vd(cert, es);
  const int n = es.dim_e;
  std::mt19937_64 rng(budget.seed);
  const double slack = 1e-10 * std::max(1.0, std::abs(cert.gamma));

  /* falsification: project random directions onto the level set, sample
   * the remaining variables with boundary bias */
  for (std::int64_t k = 0; k < budget.samples; ++k) {
    double t = urand(rng, 0.0, cert.t_s);
    Vec dir(n);
    for (int i = 0; i < n; ++i) dir[i] = gauss(rng);
    if (dir.norm() < 1e-12) continue;
    dir.normalize();
    Vec e;
    if (!ray_to_level(cert.V, t, dir, cert.gamma, e)) continue;
    Vec xh = box_sample(rng, cert.domains.xhat, true);
    Vec uh = box_sample(rng, cert.domains.uhat, true);
    Vec w = es.dim_w > 0 ? box_sample(rng, cert.domains.w, true) : Vec(0);
    Vec wh = es.dim_what > 0 ? box_sample(rng, cert.domains.what, true) : Vec(0);
    ++res.samples_drawn;
    double val = vd.eval<double>(t, e, xh, uh, w, wh);
    if (val > tolerance + slack) {
      res.verdict = Verdict::falsified;
      res.witness.resize(1 + n + es.dim_xhat + es.dim_uhat + es.dim_w + es.dim_what);
      res.witness << t, e, xh, uh, w, wh;
      res.witness_value = val;
      return res;
    }
  }

  /* interval certification over (t, e, xhat, uhat, w, what); subboxes
   * provably off the level set are discarded */
  Box e_box = level_enclosure(cert.V, cert.gamma, cert.t_s);
  std::vector<Box> parts{Box(Vec::Zero(1), Vec::Constant(1, cert.t_s)), e_box,
                         cert.domains.xhat, cert.domains.uhat};
  if (es.dim_w > 0) parts.push_back(cert.domains.w);
  if (es.dim_what > 0) parts.push_back(cert.domains.what);
  Eigen::Index total_dim = 0;
  for (const Box& p : parts) total_dim += p.dim();
  Vec lo(total_dim), hi(total_dim);
  Eigen::Index off = 0;
  for (const Box& p : parts) {
    lo.segment(off, p.dim()) = p.lo();
    hi.segment(off, p.dim()) = p.hi();
    off += p.dim();
  }
  Box all(lo, hi);
  Vec width_floor = all.width() * budget.min_rel_width;

  auto split_z = [&](const Box& b, IVec& t, IVec& e, IVec& xh, IVec& uh, IVec& w, IVec& wh) {
    Eigen::Index o = 0;
    auto take = [&](int dim) {
      IVec v(dim);
      for (int i = 0; i < dim; ++i, ++o) v[i] = Interval(b.lo()[o], b.hi()[o]);
      return v;
    };
    t = take(1);
    e = take(n);
    xh = take(es.dim_xhat);
    uh = take(es.dim_uhat);
    w = take(es.dim_w);
    wh = take(es.dim_what);
  };

  std::deque<Box> work{all};
  while (!work.empty()) {
    if (++res.boxes_processed > budget.max_boxes) {
      res.verdict = Verdict::inconclusive;
      std::ostringstream os;
      os << "bisection budget exhausted after " << res.boxes_processed << " boxes; "
         << res.samples_drawn << " falsification samples clean";
      res.detail = os.str();
      return res;
    }
    Box b = work.front();
    work.pop_front();
    IVec ti, ei, xhi, uhi, wi, whi;
    split_z(b, ti, ei, xhi, uhi, wi, whi);
    IVec zt(1 + n);
    zt[0] = ti[0];
    zt.tail(n) = ei;
    Interval v = cert.V.eval<Interval>(zt)[0];
    if (v.lo > cert.gamma || v.hi < cert.gamma) continue;  /* off the level set */
    Interval vdot = vd.eval<Interval>(ti[0], ei, xhi, uhi, wi, whi);
    if (vdot.hi <= tolerance) continue;
    int split = -1;
    double best = 1.0;
    for (Eigen::Index i = 0; i < total_dim; ++i) {
      double rel = b.width()[i] / std::max(width_floor[i], 1e-300);
      if (rel > best) {
        best = rel;
        split = static_cast<int>(i);
      }
    }
    if (split < 0) {
      res.verdict = Verdict::inconclusive;
      res.detail = "width floor reached with interval Vdot possibly positive";
      return res;
    }
    Vec mid = b.center();
    Vec hi1 = b.hi();
    hi1[split] = mid[split];
    Vec lo2 = b.lo();
    lo2[split] = mid[split];
    work.emplace_back(b.lo(), hi1);
    work.emplace_back(lo2, b.hi());
  }
  res.verdict = Verdict::verified;
  return res;
}

CheckResult check_jump(const FunnelCertificate& cert, const ErrorSystem& es,
                       const CheckBudget& budget) {
  CheckResult res;
  require_bounded(cert.domains.delta_uhat, "DeltaUhat");
  const int n = es.dim_e;
  const Mat p_u = es.pi.input_block(es.dim_xhat);
  std::mt19937_64 rng(budget.seed + 1);
  const double gamma_slack = 1e-10 * std::max(1.0, std::abs(cert.gamma));

  auto v_at = [&](double t, const Vec& e) {
    Vec z(1 + n);
    z[0] = t;
    z.tail(n) = e;
    return cert.V.eval<double>(z)[0];
  };

  /* falsification: e in the terminal funnel slice, du corner-biased */
  for (std::int64_t k = 0; k < budget.samples; ++k) {
    Vec dir(n);
    for (int i = 0; i < n; ++i) dir[i] = gauss(rng);
    if (dir.norm() < 1e-12) continue;
    dir.normalize();
    Vec e;
    if (!ray_to_level(cert.V, cert.t_s, dir, cert.gamma, e)) continue;
    if ((rng() & 3u) == 0u) e *= urand(rng, 0.0, 1.0);  /* occasionally interior */
    Vec du = box_sample(rng, cert.domains.delta_uhat, true);
    ++res.samples_drawn;
    double val = v_at(0.0, e - p_u * du);
    if (val > cert.gamma + gamma_slack) {
      res.verdict = Verdict::falsified;
      res.witness.resize(n + du.size());
      res.witness << e, du;
      res.witness_value = val;
      return res;
    }
  }

  /* interval certification over (e, du); a feasible box passes when the
   * jumped value provably stays under gamma, or when the difference
   * polynomial V(0, e - P_u du) - V(T_s, e) is provably non-positive */
  Box e_box = level_enclosure(cert.V, cert.gamma, cert.t_s);
  PolynomialMap diff = jump_difference(cert.V, cert.t_s, p_u);
  Eigen::Index nd = cert.domains.delta_uhat.dim();
  Vec lo(n + nd), hi(n + nd);
  lo << e_box.lo(), cert.domains.delta_uhat.lo();
  hi << e_box.hi(), cert.domains.delta_uhat.hi();
  Box all(lo, hi);
  Vec width_floor = all.width() * budget.min_rel_width;

  std::deque<Box> work{all};
  while (!work.empty()) {
    if (++res.boxes_processed > budget.max_boxes) {
      res.verdict = Verdict::inconclusive;
      res.detail = "bisection budget exhausted";
      return res;
    }
    Box b = work.front();
    work.pop_front();
    IVec ei(n), dui(nd);
    for (int i = 0; i < n; ++i) ei[i] = Interval(b.lo()[i], b.hi()[i]);
    for (Eigen::Index i = 0; i < nd; ++i) dui[i] = Interval(b.lo()[n + i], b.hi()[n + i]);
    IVec zt(1 + n);
    zt[0] = Interval(cert.t_s);
    zt.tail(n) = ei;
    Interval v_end = cert.V.eval<Interval>(zt)[0];
    if (v_end.lo > cert.gamma) continue;  /* infeasible: outside terminal slice */
    IVec zd(n + nd);
    zd.head(n) = ei;
    zd.tail(nd) = dui;
    if (diff.eval<Interval>(zd)[0].hi <= 0.0) continue;
    IVec shifted = ei;
    for (int i = 0; i < n; ++i) {
      Interval s(0.0);
      for (Eigen::Index j = 0; j < nd; ++j) s += Interval(p_u(i, j)) * dui[j];
      shifted[i] = ei[i] - s;
    }
    IVec z0(1 + n);
    z0[0] = Interval(0.0);
    z0.tail(n) = shifted;
    Interval v_jumped = cert.V.eval<Interval>(z0)[0];
    if (v_jumped.hi <= cert.gamma) continue;
    int split = -1;
    double best = 1.0;
    for (Eigen::Index i = 0; i < n + nd; ++i) {
      double rel = b.width()[i] / std::max(width_floor[i], 1e-300);
      if (rel > best) {
        best = rel;
        split = static_cast<int>(i);
      }
    }
    if (split < 0) {
      res.verdict = Verdict::inconclusive;
      res.detail = "width floor reached with jump condition undecided";
      return res;
    }
    Vec mid = b.center();
    Vec hi1 = b.hi();
    hi1[split] = mid[split];
    Vec lo2 = b.lo();
    lo2[split] = mid[split];
    work.emplace_back(b.lo(), hi1);
    work.emplace_back(lo2, b.hi());
  }
  res.verdict = Verdict::verified;
  return res;
}

/* ------------------------------------------------------------------ */
/* candidate generation                                                */

FunnelCertificate lyap_candidate(const ErrorSystem& es, const OperatingPoint& op,
                                 const Vec& q_weight, const Vec& r_weight,
                                 const CertificateDomains& domains, double t_s,
                                 const CandidateOptions& options) {
  const int n = es.dim_e, m = es.dim_u;
  if (q_weight.size() != n || r_weight.size() != m)
    throw std::invalid_argument("lyap_candidate: weight dimensions");
  if (options.time_slope < 0.0)
    throw std::invalid_argument("lyap_candidate: time_slope must be >= 0");
  Vec zero_w = Vec::Zero(es.dim_w), zero_wh = Vec::Zero(es.dim_what);
  Vec e0v = Vec::Zero(n);

  /* linearize the drift in e by central differences; input matrix is
   * g_e at the operating point (control-affine) */
  Mat a(n, n);
  double h = 1e-5;
  for (int j = 0; j < n; ++j) {
    Vec ep = e0v, em = e0v;
    ep[j] += h;
    em[j] -= h;
    a.col(j) = (es.f_e(ep, op.xhat, op.uhat, zero_w, zero_wh) -
                es.f_e(em, op.xhat, op.uhat, zero_w, zero_wh)) /
               (2.0 * h);
  }
  Mat b = es.g_e(e0v, op.xhat, op.uhat, zero_w);

  Mat k = lqr_gain(a, b, Mat(q_weight.asDiagonal()), Mat(r_weight.asDiagonal()));
  Mat a_cl = a + b * k;
  if (spectral_abscissa(a_cl) >= 0.0)
    throw std::runtime_error("lyap_candidate: closed-loop linearization not Hurwitz");
  Mat q_l = solve_lyapunov(a_cl, Mat::Identity(n, n));

  std::vector<VarGroup> v_groups{{"t", 1}, {"e", n}};
  std::vector<VarGroup> k_groups{{"t", 1}, {"e", n}, {"xhat", es.dim_xhat},
                                 {"uhat", es.dim_uhat}};
  FunnelCertificate cert;
  cert.V = PolynomialMap::quadratic_form(v_groups, "e", q_l,
                                         options.time_slope > 0.0 ? options.time_slope / t_s
                                                                  : 0.0);
  cert.kappa = PolynomialMap::linear_map(k_groups, "e", k);
  cert.t_s = t_s;
  cert.domains = domains;

  /* E0: half of the funnel hull, capped so the box corners stay inside
   * the t = 0 slice (exact corner scan of the quadratic form) */
  auto e0_for_gamma = [&](double gamma) {
    Vec eps = ellipsoid_hull(q_l, gamma);
    double worst = 0.0;
    for (std::int64_t c = 0; c < (std::int64_t{1} << n); ++c) {
      Vec corner(n);
      for (int i = 0; i < n; ++i) corner[i] = (c >> i) & 1 ? eps[i] : -eps[i];
      worst = std::max(worst, corner.dot(q_l * corner));
    }
    double scale = std::min(0.5, 0.99 * std::sqrt(gamma / worst));
    return Box::symmetric(scale * eps);
  };

  auto acceptable = [&](double gamma) {
    cert.gamma = gamma;
    cert.e0 = e0_for_gamma(gamma);
    CheckResult dec = check_decrease(cert, es, 0.0, options.budget);
    if (dec.verdict == Verdict::falsified) return false;
    if (dec.verdict == Verdict::inconclusive && !options.accept_inconclusive) return false;
    CheckResult jmp = check_jump(cert, es, options.budget);
    if (jmp.verdict == Verdict::falsified) return false;
    if (jmp.verdict == Verdict::inconclusive && !options.accept_inconclusive) return false;
    return true;
  };

  /* ladder up from gamma = 1 for the largest acceptable level, then
   * bisect the bracket */
  double good = -1.0, bad = -1.0;
  double g = 1.0;
  if (acceptable(g)) {
    good = g;
    while (good * 2.0 <= options.gamma_ceil) {
      g = good * 2.0;
      if (acceptable(g))
        good = g;
      else {
        bad = g;
        break;
      }
    }
  } else {
    bad = g;
    while (bad * 0.5 >= options.gamma_floor) {
      g = bad * 0.5;
      if (acceptable(g)) {
        good = g;
        break;
      }
      bad = g;
    }
  }
  if (good < 0.0)
    throw std::runtime_error(
        "lyap_candidate: no acceptable level found (decrease or jump falsified at every "
        "gamma)");
  if (bad > 0.0) {
    for (int it = 0; it < options.gamma_bisection_iters; ++it) {
      double mid = 0.5 * (good + bad);
      (acceptable(mid) ? good : bad) = mid;
    }
  }
  cert.gamma = good;
  cert.e0 = e0_for_gamma(good);
  return cert;
}

}  // namespace reachsynth
