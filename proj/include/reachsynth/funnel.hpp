/*
 * funnel.hpp
 *
 * Tracking-error machinery between a concrete control-affine model and
 * its low-dimensional continuous abstraction: the error state and its
 * dynamics, numerical verification of the storage-function conditions
 * (initial containment, level-set decrease, input-jump absorption), the
 * per-dimension hull of the funnel, and a linearization-based candidate
 * generator (Riccati feedback + Lyapunov storage function).
 *
 * Checks are three-valued: `verified` is established by interval
 * evaluation over a bisection tree, `falsified` carries a concrete
 * witness, and `inconclusive` reports an exhausted budget. Silent
 * acceptance is never an outcome.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/interval.hpp"
#include "reachsynth/poly.hpp"
#include "reachsynth/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace reachsynth {

/* Error dynamics  de/dt = f_e(e, xhat, uhat, w, what) + g_e(e, xhat, uhat, w) u.
 * Both evaluators are provided in double and in interval arithmetic; use
 * make_error_system to derive the pair from one generic callable. */
struct ErrorSystem {
  int dim_e = 0;
  int dim_xhat = 0;
  int dim_uhat = 0;
  int dim_w = 0;
  int dim_what = 0;
  int dim_u = 0;

  std::function<Vec(const Vec& e, const Vec& xhat, const Vec& uhat, const Vec& w, const Vec& what)>
      f_e;
  std::function<Mat(const Vec& e, const Vec& xhat, const Vec& uhat, const Vec& w)> g_e;
  std::function<IVec(const IVec&, const IVec&, const IVec&, const IVec&, const IVec&)> f_e_iv;
  std::function<IMat(const IVec&, const IVec&, const IVec&, const IVec&)> g_e_iv;

  AffineMap pi;
  /* optional state-dependent change of error coordinates (e.g. a rotation
   * by the abstract heading); identity when absent */
  std::optional<std::function<Mat(const Vec& xhat)>> state_transform;
};

/* build the double/interval evaluator pair from generic callables */
template <class F, class G>
ErrorSystem make_error_system(int dim_e, int dim_xhat, int dim_uhat, int dim_w, int dim_what,
                              int dim_u, F f, G g, AffineMap pi) {
  ErrorSystem es;
  es.dim_e = dim_e;
  es.dim_xhat = dim_xhat;
  es.dim_uhat = dim_uhat;
  es.dim_w = dim_w;
  es.dim_what = dim_what;
  es.dim_u = dim_u;
  es.f_e = [f](const Vec& e, const Vec& xh, const Vec& uh, const Vec& w, const Vec& wh) {
    return f(e, xh, uh, w, wh);
  };
  es.f_e_iv = [f](const IVec& e, const IVec& xh, const IVec& uh, const IVec& w, const IVec& wh) {
    return f(e, xh, uh, w, wh);
  };
  es.g_e = [g](const Vec& e, const Vec& xh, const Vec& uh, const Vec& w) { return g(e, xh, uh, w); };
  es.g_e_iv = [g](const IVec& e, const IVec& xh, const IVec& uh, const IVec& w) {
    return g(e, xh, uh, w);
  };
  es.pi = std::move(pi);
  return es;
}

struct CertificateDomains {
  Box xhat;       /* abstract state constraint */
  Box uhat;       /* abstract input constraint */
  Box delta_uhat; /* per-period abstract input jump */
  Box w;          /* concrete disturbance */
  Box what;       /* abstract disturbance */
};

struct FunnelCertificate {
  PolynomialMap V;      /* scalar, over groups (t, e) */
  PolynomialMap kappa;  /* over groups (t, e, xhat, uhat), output dim n_u */
  double gamma = 0.0;
  double t_s = 0.0;
  Box e0;
  CertificateDomains domains;

  void write(std::ostream& os) const;
  static FunnelCertificate read(std::istream& is);
  void save(const std::string& path) const;
  static FunnelCertificate load(const std::string& path);
  bool operator==(const FunnelCertificate& other) const;
};

enum class Verdict { verified, falsified, inconclusive };

const char* to_string(Verdict v);

struct CheckResult {
  Verdict verdict = Verdict::inconclusive;
  /* falsification witness, flattened (t, e, xhat, uhat, w, what) or
   * (e, delta_uhat) depending on the check; empty otherwise */
  Vec witness;
  double witness_value = 0.0;
  std::int64_t boxes_processed = 0;
  std::int64_t samples_drawn = 0;
  std::string detail;
};

struct CheckBudget {
  std::int64_t max_boxes = 200000;
  std::int64_t samples = 20000;
  double min_rel_width = 1.0 / 1024.0;  /* bisection floor per dimension */
  std::uint64_t seed = 2024;
};

/* e = phi(xhat) (x - pi(xhat, uhat)), phi = identity when absent */
Vec error_state(const Vec& x, const Vec& xhat, const Vec& uhat, const ErrorSystem& es);

/* inverse of the error map: x = phi(xhat)^-1 e + pi(xhat, uhat) */
Vec concrete_state(const Vec& e, const Vec& xhat, const Vec& uhat, const ErrorSystem& es);

/* E0 inside the initial funnel slice {e | V(0, e) <= gamma} */
CheckResult check_initial_containment(const FunnelCertificate& cert,
                                      const CheckBudget& budget = {});

/* dV/dt + dV/de (f_e + g_e kappa) <= tolerance on the level set V = gamma
 * over t in [0, T_s] and the certificate domains */
CheckResult check_decrease(const FunnelCertificate& cert, const ErrorSystem& es,
                           double tolerance = 0.0, const CheckBudget& budget = {});

/* V(0, e - P [0; du]) <= gamma whenever V(T_s, e) <= gamma, du in DeltaUhat */
CheckResult check_jump(const FunnelCertificate& cert, const ErrorSystem& es,
                       const CheckBudget& budget = {});

/* per-dimension hull of  U_{t in [0,Ts)} {e | V(t,e) <= gamma};  exact
 * semi-axis formula for time-invariant quadratic V, conservative
 * bisection bound otherwise */
Vec compute_epsilon(const FunnelCertificate& cert, const CheckBudget& budget = {});

/* detect V == e'Qe (no time dependence) and return Q */
std::optional<Mat> quadratic_storage_matrix(const PolynomialMap& v);

struct OperatingPoint {
  Vec xhat;
  Vec uhat;
};

struct CandidateOptions {
  /* linear growth slope of the storage level over one period:
   * V(t,e) = (1 + slope * t / T_s) e'Qe. A positive slope shrinks the
   * funnel across the period, which is what lets the certificate absorb
   * the input jump when pi feeds uhat through to the reference. */
  double time_slope = 0.0;
  int gamma_bisection_iters = 40;
  /* accept a gamma during bisection when the checks are not falsified
   * (high-dimensional domains rarely certify within budget) */
  bool accept_inconclusive = true;
  CheckBudget budget{.max_boxes = 20000, .samples = 4000, .min_rel_width = 1.0 / 64.0,
                     .seed = 99};
  double gamma_floor = 1e-8;
  double gamma_ceil = 1e6;
};

/* Linearize the error dynamics at e = 0 and the operating point, solve
 * the Riccati equation for a stabilizing feedback K, take V from the
 * closed-loop Lyapunov equation and pick the largest acceptable gamma by
 * bisection. kappa(t, e, xhat, uhat) = K e. */
FunnelCertificate lyap_candidate(const ErrorSystem& es, const OperatingPoint& op,
                                 const Vec& q_weight, const Vec& r_weight,
                                 const CertificateDomains& domains, double t_s,
                                 const CandidateOptions& options = {});

}  // namespace reachsynth
