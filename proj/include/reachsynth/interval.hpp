/*
 * interval.hpp
 *
 * Scalar interval arithmetic for range bounding of nonlinear expressions
 * (certificate checks, per-cell Jacobian bounds). Plain floating point,
 * no directed rounding: the library is explicitly non-validated and backs
 * its soundness claims with Monte Carlo property suites instead.
 */

#pragma once

#include "reachsynth/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace reachsynth {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double point) : lo(point), hi(point) {}  // NOLINT: implicit on purpose
  Interval(double l, double h) : lo(l), hi(h) {
    if (!(l <= h)) throw std::invalid_argument("interval bounds crossed");
  }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  double mag() const { return std::max(std::abs(lo), std::abs(hi)); }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool is_point() const { return lo == hi; }

  Interval& operator+=(const Interval& r) {
    lo += r.lo;
    hi += r.hi;
    return *this;
  }
  Interval& operator-=(const Interval& r) {
    lo -= r.hi;
    hi -= r.lo;
    return *this;
  }
  Interval& operator*=(const Interval& r) {
    double a = lo * r.lo, b = lo * r.hi, c = hi * r.lo, d = hi * r.hi;
    lo = std::min(std::min(a, b), std::min(c, d));
    hi = std::max(std::max(a, b), std::max(c, d));
    return *this;
  }
};

inline Interval operator+(Interval a, const Interval& b) { return a += b; }
inline Interval operator-(Interval a, const Interval& b) { return a -= b; }
inline Interval operator*(Interval a, const Interval& b) { return a *= b; }
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }
inline Interval operator+(const Interval& a) { return a; }

inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains(0.0)) throw std::domain_error("interval division by range containing zero");
  Interval inv{1.0 / b.hi, 1.0 / b.lo};
  return a * inv;
}

inline bool operator==(const Interval& a, const Interval& b) {
  return a.lo == b.lo && a.hi == b.hi;
}
inline bool operator!=(const Interval& a, const Interval& b) { return !(a == b); }

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

inline Interval abs(const Interval& a) {
  if (a.lo >= 0.0) return a;
  if (a.hi <= 0.0) return -a;
  return {0.0, a.mag()};
}

inline Interval sq(const Interval& a) {
  double l = std::abs(a.lo), h = std::abs(a.hi);
  double m = std::max(l, h);
  if (a.contains(0.0)) return {0.0, m * m};
  double n = std::min(l, h);
  return {n * n, m * m};
}

inline Interval pow_int(const Interval& a, int k) {
  if (k < 0) throw std::invalid_argument("pow_int: negative exponent");
  Interval r{1.0, 1.0};
  Interval base = a;
  int e = k;
  while (e > 0) {
    /* even powers through sq() keep the bound tight around zero */
    if (e & 1) r = r * base;
    e >>= 1;
    if (e) base = sq(base);
  }
  return r;
}

/* cos over an interval: endpoint values plus any enclosed critical points */
inline Interval cos(const Interval& a) {
  constexpr double two_pi = 2.0 * M_PI;
  if (a.width() >= two_pi) return {-1.0, 1.0};
  double cl = std::cos(a.lo), ch = std::cos(a.hi);
  double lo = std::min(cl, ch), hi = std::max(cl, ch);
  /* k with  a.lo <= k*pi <= a.hi;  even k -> max 1, odd k -> min -1 */
  double k0 = std::ceil(a.lo / M_PI);
  for (double k = k0; k * M_PI <= a.hi; k += 1.0) {
    if (std::fmod(std::abs(k), 2.0) < 0.5)
      hi = 1.0;
    else
      lo = -1.0;
  }
  return {lo, hi};
}

inline Interval sin(const Interval& a) { return cos(Interval{a.lo - M_PI_2, a.hi - M_PI_2}); }

inline Interval sqrt(const Interval& a) {
  if (a.lo < 0.0) throw std::domain_error("interval sqrt of negative range");
  return {std::sqrt(a.lo), std::sqrt(a.hi)};
}

inline std::ostream& operator<<(std::ostream& os, const Interval& a) {
  return os << '[' << a.lo << ',' << a.hi << ']';
}

}  // namespace reachsynth

namespace Eigen {

template <>
struct NumTraits<reachsynth::Interval> : GenericNumTraits<reachsynth::Interval> {
  typedef reachsynth::Interval Real;
  typedef reachsynth::Interval NonInteger;
  typedef reachsynth::Interval Nested;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 8
  };
  static inline Real epsilon() { return reachsynth::Interval(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() {
    return reachsynth::Interval(NumTraits<double>::dummy_precision());
  }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen

namespace reachsynth {

using IVec = VecT<Interval>;
using IMat = MatT<Interval>;

/* lift a real vector / bound pair into interval vectors */
inline IVec to_ivec(const Vec& v) {
  IVec r(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) r[i] = Interval(v[i]);
  return r;
}

inline IVec to_ivec(const Vec& lo, const Vec& hi) {
  IVec r(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) r[i] = Interval(lo[i], hi[i]);
  return r;
}

}  // namespace reachsynth
