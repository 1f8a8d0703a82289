#include "reachsynth/poly.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace reachsynth {

PolynomialMap::PolynomialMap(std::vector<VarGroup> groups, int output_dim)
    : groups_(std::move(groups)), terms_(output_dim) {
  if (output_dim <= 0) throw std::invalid_argument("PolynomialMap: output_dim must be positive");
  offsets_.reserve(groups_.size());
  for (const VarGroup& g : groups_) {
    if (g.arity < 0) throw std::invalid_argument("PolynomialMap: negative arity");
    offsets_.push_back(n_vars_);
    n_vars_ += g.arity;
  }
}

int PolynomialMap::group_offset(const std::string& name) const {
  for (size_t i = 0; i < groups_.size(); ++i)
    if (groups_[i].name == name) return offsets_[i];
  throw std::invalid_argument("PolynomialMap: unknown group " + name);
}

int PolynomialMap::group_arity(const std::string& name) const {
  for (const VarGroup& g : groups_)
    if (g.name == name) return g.arity;
  throw std::invalid_argument("PolynomialMap: unknown group " + name);
}

void PolynomialMap::add_term(int out, double coeff, const VecI& exponents) {
  if (out < 0 || out >= output_dim()) throw std::out_of_range("PolynomialMap::add_term");
  if (exponents.size() != n_vars_)
    throw std::invalid_argument("PolynomialMap::add_term: exponent arity mismatch");
  if ((exponents.array() < 0).any())
    throw std::invalid_argument("PolynomialMap::add_term: negative exponent");
  if (coeff == 0.0) return;
  terms_[out].push_back(Term{coeff, exponents});
}

void PolynomialMap::canonicalize() {
  auto lex_less = [](const Term& a, const Term& b) {
    for (Eigen::Index i = 0; i < a.exponents.size(); ++i)
      if (a.exponents[i] != b.exponents[i]) return a.exponents[i] < b.exponents[i];
    return false;
  };
  auto same_exp = [](const VecI& a, const VecI& b) { return (a.array() == b.array()).all(); };
  for (auto& ts : terms_) {
    std::sort(ts.begin(), ts.end(), lex_less);
    std::vector<Term> merged;
    for (const Term& t : ts) {
      if (!merged.empty() && same_exp(merged.back().exponents, t.exponents))
        merged.back().coeff += t.coeff;
      else
        merged.push_back(t);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Term& t) { return t.coeff == 0.0; }),
                 merged.end());
    ts = std::move(merged);
  }
}

int PolynomialMap::max_degree() const {
  int d = 0;
  for (const auto& ts : terms_)
    for (const Term& t : ts) d = std::max(d, t.exponents.sum());
  return d;
}

double PolynomialMap::eval_scalar(const Vec& z) const {
  if (output_dim() != 1) throw std::logic_error("PolynomialMap::eval_scalar: not scalar-valued");
  return eval<double>(z)[0];
}

PolynomialMap PolynomialMap::derivative(int var) const {
  if (var < 0 || var >= n_vars_) throw std::out_of_range("PolynomialMap::derivative");
  PolynomialMap d(groups_, output_dim());
  for (int o = 0; o < output_dim(); ++o)
    for (const Term& t : terms_[o]) {
      int e = t.exponents[var];
      if (e == 0) continue;
      VecI ex = t.exponents;
      ex[var] -= 1;
      d.add_term(o, t.coeff * e, ex);
    }
  d.canonicalize();
  return d;
}

std::vector<PolynomialMap> PolynomialMap::group_gradient(const std::string& name) const {
  int off = group_offset(name), n = group_arity(name);
  std::vector<PolynomialMap> grad;
  grad.reserve(n);
  for (int i = 0; i < n; ++i) grad.push_back(derivative(off + i));
  return grad;
}

PolynomialMap PolynomialMap::quadratic_form(std::vector<VarGroup> groups, const std::string& name,
                                            const Mat& q, double t_slope) {
  PolynomialMap p(std::move(groups), 1);
  int off = p.group_offset(name);
  int n = p.group_arity(name);
  if (q.rows() != n || q.cols() != n)
    throw std::invalid_argument("PolynomialMap::quadratic_form: Q size mismatch");
  int t_off = t_slope != 0.0 ? p.group_offset("t") : -1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double c = q(i, j);
      if (c == 0.0) continue;
      VecI ex = VecI::Zero(p.n_vars());
      ex[off + i] += 1;
      ex[off + j] += 1;
      p.add_term(0, c, ex);
      if (t_slope != 0.0) {
        VecI ext = ex;
        ext[t_off] += 1;
        p.add_term(0, c * t_slope, ext);
      }
    }
  p.canonicalize();
  return p;
}

PolynomialMap PolynomialMap::linear_map(std::vector<VarGroup> groups, const std::string& name,
                                        const Mat& k) {
  PolynomialMap p(std::move(groups), static_cast<int>(k.rows()));
  int off = p.group_offset(name);
  int n = p.group_arity(name);
  if (k.cols() != n) throw std::invalid_argument("PolynomialMap::linear_map: K size mismatch");
  for (int o = 0; o < k.rows(); ++o)
    for (int j = 0; j < n; ++j) {
      if (k(o, j) == 0.0) continue;
      VecI ex = VecI::Zero(p.n_vars());
      ex[off + j] = 1;
      p.add_term(o, k(o, j), ex);
    }
  p.canonicalize();
  return p;
}

void PolynomialMap::write(std::ostream& os) const {
  os << "groups " << groups_.size();
  for (const VarGroup& g : groups_) os << ' ' << g.name << ' ' << g.arity;
  os << '\n' << "outputs " << output_dim() << '\n';
  char buf[64];
  for (int o = 0; o < output_dim(); ++o) {
    os << "terms " << terms_[o].size() << '\n';
    for (const Term& t : terms_[o]) {
      std::snprintf(buf, sizeof buf, "%.17g", t.coeff);
      os << buf;
      for (Eigen::Index v = 0; v < t.exponents.size(); ++v) os << ' ' << t.exponents[v];
      os << '\n';
    }
  }
}

PolynomialMap PolynomialMap::read(std::istream& is) {
  std::string tag;
  size_t n_groups = 0;
  is >> tag >> n_groups;
  if (tag != "groups") throw std::runtime_error("PolynomialMap::read: bad groups header");
  std::vector<VarGroup> groups(n_groups);
  for (VarGroup& g : groups) is >> g.name >> g.arity;
  int n_out = 0;
  is >> tag >> n_out;
  if (tag != "outputs") throw std::runtime_error("PolynomialMap::read: bad outputs header");
  PolynomialMap p(std::move(groups), n_out);
  for (int o = 0; o < n_out; ++o) {
    size_t n_terms = 0;
    is >> tag >> n_terms;
    if (tag != "terms") throw std::runtime_error("PolynomialMap::read: bad terms header");
    for (size_t k = 0; k < n_terms; ++k) {
      double coeff;
      is >> coeff;
      VecI ex(p.n_vars());
      for (int v = 0; v < p.n_vars(); ++v) is >> ex[v];
      if (!is) throw std::runtime_error("PolynomialMap::read: truncated term");
      p.add_term(o, coeff, ex);
    }
  }
  return p;
}

bool PolynomialMap::operator==(const PolynomialMap& other) const {
  if (n_vars_ != other.n_vars_ || output_dim() != other.output_dim()) return false;
  if (groups_.size() != other.groups_.size()) return false;
  for (size_t i = 0; i < groups_.size(); ++i)
    if (groups_[i].name != other.groups_[i].name || groups_[i].arity != other.groups_[i].arity)
      return false;
  for (int o = 0; o < output_dim(); ++o) {
    if (terms_[o].size() != other.terms_[o].size()) return false;
    for (size_t k = 0; k < terms_[o].size(); ++k)
      if (terms_[o][k].coeff != other.terms_[o][k].coeff ||
          !(terms_[o][k].exponents.array() == other.terms_[o][k].exponents.array()).all())
        return false;
  }
  return true;
}

}  // namespace reachsynth
