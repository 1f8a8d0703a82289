/*
 * poly.hpp
 *
 * Vector-valued multivariate polynomials over named variable groups.
 * Storage functions V (scalar, over (t, e)) and feedback laws kappa
 * (over (t, e, xhat, uhat)) live here. Evaluation is exact monomial
 * arithmetic in any scalar ring, in particular double and Interval.
 */

#pragma once

#include "reachsynth/interval.hpp"
#include "reachsynth/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace reachsynth {

struct VarGroup {
  std::string name;
  int arity = 0;
};

class PolynomialMap {
 public:
  struct Term {
    double coeff = 0.0;
    VecI exponents;  /* one entry per flattened variable */
  };

  PolynomialMap() = default;
  PolynomialMap(std::vector<VarGroup> groups, int output_dim);

  const std::vector<VarGroup>& groups() const { return groups_; }
  int n_vars() const { return n_vars_; }
  int output_dim() const { return static_cast<int>(terms_.size()); }
  const std::vector<Term>& terms(int out) const { return terms_.at(out); }

  /* offset of a named group in the flattened variable vector */
  int group_offset(const std::string& name) const;
  int group_arity(const std::string& name) const;

  void add_term(int out, double coeff, const VecI& exponents);

  /* merge duplicate monomials, drop zeros, sort by exponent pattern */
  void canonicalize();

  int max_degree() const;

  template <class S>
  VecT<S> eval(const VecT<S>& z) const {
    if (z.size() != n_vars_) throw std::invalid_argument("PolynomialMap::eval: arity mismatch");
    VecT<S> out(output_dim());
    for (int o = 0; o < output_dim(); ++o) {
      S acc = S(0.0);
      for (const Term& t : terms_[o]) {
        S m = S(t.coeff);
        for (int v = 0; v < n_vars_; ++v) {
          int e = t.exponents[v];
          if (e == 0) continue;
          m = m * pow_scalar(z[v], e);
        }
        acc += m;
      }
      out[o] = acc;
    }
    return out;
  }

  double eval_scalar(const Vec& z) const;

  /* exact partial derivative in flattened variable `var` */
  PolynomialMap derivative(int var) const;

  /* gradient with respect to a whole group: output o, rows = group arity */
  std::vector<PolynomialMap> group_gradient(const std::string& name) const;

  /* scalar quadratic form z'Qz over group `name`, optionally scaled by
   * (1 + slope * t) with t the first variable of group "t" */
  static PolynomialMap quadratic_form(std::vector<VarGroup> groups, const std::string& name,
                                      const Mat& q, double t_slope = 0.0);

  /* linear map K acting on group `name` */
  static PolynomialMap linear_map(std::vector<VarGroup> groups, const std::string& name,
                                  const Mat& k);

  void write(std::ostream& os) const;
  static PolynomialMap read(std::istream& is);

  bool operator==(const PolynomialMap& other) const;

 private:
  static double pow_scalar(double x, int e) {
    double r = 1.0;
    while (e-- > 0) r *= x;
    return r;
  }
  static Interval pow_scalar(const Interval& x, int e) { return pow_int(x, e); }

  std::vector<VarGroup> groups_;
  std::vector<int> offsets_;
  int n_vars_ = 0;
  std::vector<std::vector<Term>> terms_;
};

}  // namespace reachsynth
