#include "reachsynth/box.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace reachsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw std::invalid_argument(os.str());
  }
}

void require_nonnegative(const Vec& eps, const char* what) {
  for (Eigen::Index i = 0; i < eps.size(); ++i)
    if (!(eps[i] >= 0.0)) throw std::invalid_argument(std::string(what) + ": eps must be >= 0");
}

}  // namespace

Box::Box(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  require_same_dim(lo_.size(), hi_.size(), "Box");
  dim_ = lo_.size();
  for (Eigen::Index i = 0; i < dim_; ++i) {
    if (std::isnan(lo_[i]) || std::isnan(hi_[i]))
      throw std::invalid_argument("Box: NaN bound");
    if (lo_[i] > hi_[i]) throw std::invalid_argument("Box: crossed bounds (use Box::empty)");
  }
  empty_ = false;
}

Box Box::empty(Eigen::Index dim) {
  Box b;
  b.dim_ = dim;
  b.empty_ = true;
  return b;
}

Box Box::symmetric(const Vec& radius) {
  require_nonnegative(radius, "Box::symmetric");
  return Box(-radius, radius);
}

Box Box::unbounded(Eigen::Index dim) {
  return Box(Vec::Constant(dim, -kInf), Vec::Constant(dim, kInf));
}

const Vec& Box::lo() const {
  if (empty_) throw std::logic_error("Box: bounds of empty box");
  return lo_;
}

const Vec& Box::hi() const {
  if (empty_) throw std::logic_error("Box: bounds of empty box");
  return hi_;
}

Vec Box::center() const { return 0.5 * (lo() + hi()); }

Vec Box::width() const { return hi() - lo(); }

bool Box::contains(const Vec& x) const {
  if (empty_) return false;
  require_same_dim(x.size(), dim_, "Box::contains");
  return (x.array() >= lo_.array()).all() && (x.array() <= hi_.array()).all();
}

bool Box::is_bounded() const {
  if (empty_) return true;
  return lo_.allFinite() && hi_.allFinite();
}

std::string Box::str() const {
  if (empty_) return "(empty)";
  std::ostringstream os;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    if (i) os << " x ";
    os << '[' << lo_[i] << ", " << hi_[i] << ']';
  }
  return os.str();
}

Box box_expand(const Box& x, const Vec& eps) {
  require_same_dim(eps.size(), x.dim(), "box_expand");
  require_nonnegative(eps, "box_expand");
  if (x.is_empty()) return Box::empty(x.dim());
  return Box(x.lo() - eps, x.hi() + eps);
}

Box box_shrink(const Box& x, const Vec& eps) {
  require_same_dim(eps.size(), x.dim(), "box_shrink");
  require_nonnegative(eps, "box_shrink");
  if (x.is_empty()) return Box::empty(x.dim());
  Vec lo = x.lo() + eps;
  Vec hi = x.hi() - eps;
  for (Eigen::Index i = 0; i < x.dim(); ++i) {
    /* inf - finite stays inf; the unconstrained dimension survives any shrink */
    if (std::isinf(x.lo()[i])) lo[i] = x.lo()[i];
    if (std::isinf(x.hi()[i])) hi[i] = x.hi()[i];
    if (lo[i] > hi[i]) return Box::empty(x.dim());
  }
  return Box(std::move(lo), std::move(hi));
}

bool box_intersects(const Box& a, const Box& b) {
  require_same_dim(a.dim(), b.dim(), "box_intersects");
  if (a.is_empty() || b.is_empty()) return false;
  return (a.lo().array() <= b.hi().array()).all() && (b.lo().array() <= a.hi().array()).all();
}

bool box_contains(const Box& a, const Box& b) {
  require_same_dim(a.dim(), b.dim(), "box_contains");
  if (b.is_empty()) return true;
  if (a.is_empty()) return false;
  return (a.lo().array() <= b.lo().array()).all() && (b.hi().array() <= a.hi().array()).all();
}

Box box_intersection(const Box& a, const Box& b) {
  require_same_dim(a.dim(), b.dim(), "box_intersection");
  if (a.is_empty() || b.is_empty() || !box_intersects(a, b)) return Box::empty(a.dim());
  return Box(a.lo().cwiseMax(b.lo()), a.hi().cwiseMin(b.hi()));
}

PartitionGrid::PartitionGrid(Box domain, VecI cells_per_dim)
    : domain_(std::move(domain)), cells_(std::move(cells_per_dim)) {
  if (domain_.is_empty()) throw std::invalid_argument("PartitionGrid: empty domain");
  if (!domain_.is_bounded()) throw std::invalid_argument("PartitionGrid: unbounded domain");
  require_same_dim(cells_.size(), domain_.dim(), "PartitionGrid");
  total_ = 1;
  for (Eigen::Index d = 0; d < cells_.size(); ++d) {
    if (cells_[d] <= 0) throw std::invalid_argument("PartitionGrid: cells_per_dim must be > 0");
    total_ *= cells_[d];
  }
  width_ = domain_.width().cwiseQuotient(cells_.cast<double>());
  /* row-major, dimension 0 slowest */
  stride_.assign(cells_.size(), 1);
  for (Eigen::Index d = cells_.size() - 2; d >= 0; --d)
    stride_[d] = stride_[d + 1] * cells_[d + 1];
}

CellIndex PartitionGrid::cell_of(const Vec& x) const {
  require_same_dim(x.size(), domain_.dim(), "PartitionGrid::cell_of");
  CellIndex flat = 0;
  for (Eigen::Index d = 0; d < cells_.size(); ++d) {
    double lo = domain_.lo()[d], hi = domain_.hi()[d];
    if (x[d] < lo || x[d] > hi) return out_index();
    long k = static_cast<long>(std::floor((x[d] - lo) / width_[d]));
    if (k < 0) k = 0;
    if (k >= cells_[d]) k = cells_[d] - 1;  /* closed upper face */
    flat += stride_[d] * k;
  }
  return flat;
}

Box PartitionGrid::cell_box(CellIndex idx) const {
  VecI c = coords_of(idx);
  Vec lo(cells_.size()), hi(cells_.size());
  for (Eigen::Index d = 0; d < cells_.size(); ++d) {
    lo[d] = domain_.lo()[d] + c[d] * width_[d];
    hi[d] = (c[d] + 1 == cells_[d]) ? domain_.hi()[d] : domain_.lo()[d] + (c[d] + 1) * width_[d];
  }
  return Box(std::move(lo), std::move(hi));
}

VecI PartitionGrid::coords_of(CellIndex idx) const {
  if (idx < 0 || idx >= total_) throw std::out_of_range("PartitionGrid::coords_of");
  VecI c(cells_.size());
  for (Eigen::Index d = 0; d < cells_.size(); ++d) {
    c[d] = static_cast<int>(idx / stride_[d]);
    idx %= stride_[d];
  }
  return c;
}

CellIndex PartitionGrid::flat_of(const VecI& coords) const {
  require_same_dim(coords.size(), cells_.size(), "PartitionGrid::flat_of");
  CellIndex flat = 0;
  for (Eigen::Index d = 0; d < cells_.size(); ++d) {
    if (coords[d] < 0 || coords[d] >= cells_[d]) throw std::out_of_range("PartitionGrid::flat_of");
    flat += stride_[d] * coords[d];
  }
  return flat;
}

std::optional<std::pair<VecI, VecI>> PartitionGrid::intersecting_range(const Box& b) const {
  if (b.is_empty()) return std::nullopt;
  require_same_dim(b.dim(), domain_.dim(), "PartitionGrid::intersecting_range");
  VecI lo(cells_.size()), hi(cells_.size());
  for (Eigen::Index d = 0; d < cells_.size(); ++d) {
    double dl = domain_.lo()[d], dh = domain_.hi()[d];
    if (b.hi()[d] < dl || b.lo()[d] > dh) return std::nullopt;
    /* the box is read with the same half-open convention as the cells:
     * an upper bound landing exactly on a cell boundary stops short of
     * the next cell (reach enclosures are images of half-open cells) */
    long k0 = static_cast<long>(std::floor((b.lo()[d] - dl) / width_[d]));
    long k1 = static_cast<long>(std::floor((b.hi()[d] - dl) / width_[d]));
    if (k1 > k0 && dl + k1 * width_[d] == b.hi()[d]) --k1;
    k0 = std::max(k0, 0L);
    k1 = std::min(k1, static_cast<long>(cells_[d]) - 1);
    if (k1 < k0) k1 = k0 = std::min(std::max(k0, 0L), static_cast<long>(cells_[d]) - 1);
    lo[d] = static_cast<int>(k0);
    hi[d] = static_cast<int>(k1);
  }
  return std::make_pair(lo, hi);
}

void AffineMap::validate() const {
  if (P.rows() != omega.size()) throw std::invalid_argument("AffineMap: P/omega size mismatch");
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    int nonzero = 0;
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      if (P(i, j) != 0.0) ++nonzero;
    if (nonzero > 1)
      throw std::invalid_argument("AffineMap: more than one non-zero entry in row " +
                                  std::to_string(i));
  }
}

Vec AffineMap::apply(const Vec& xhat, const Vec& uhat) const {
  require_same_dim(xhat.size() + uhat.size(), P.cols(), "AffineMap::apply");
  Vec z(P.cols());
  z << xhat, uhat;
  return P * z + omega;
}

AffineMap AffineMap::identity_stacking(Eigen::Index nhat_x, Eigen::Index nhat_u) {
  AffineMap pi;
  pi.P = Mat::Identity(nhat_x + nhat_u, nhat_x + nhat_u);
  pi.omega = Vec::Zero(nhat_x + nhat_u);
  return pi;
}

std::pair<Box, Box> preimage_pi(const AffineMap& pi, const Box& x, Eigen::Index nhat_x,
                                Eigen::Index nhat_u) {
  pi.validate();
  require_same_dim(pi.P.cols(), nhat_x + nhat_u, "preimage_pi");
  require_same_dim(pi.out_dim(), x.dim(), "preimage_pi");
  auto empty = std::make_pair(Box::empty(nhat_x), Box::empty(nhat_u));
  if (x.is_empty()) return empty;

  Vec lo = Vec::Constant(nhat_x + nhat_u, -kInf);
  Vec hi = Vec::Constant(nhat_x + nhat_u, kInf);
  for (Eigen::Index i = 0; i < pi.P.rows(); ++i) {
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < pi.P.cols(); ++j)
      if (pi.P(i, j) != 0.0) {
        col = j;
        break;
      }
    if (col < 0) {
      /* constant row: feasible iff omega lands inside the target slab */
      if (pi.omega[i] < x.lo()[i] || pi.omega[i] > x.hi()[i]) return empty;
      continue;
    }
    double p = pi.P(i, col);
    double a = (x.lo()[i] - pi.omega[i]) / p;
    double b = (x.hi()[i] - pi.omega[i]) / p;
    if (p < 0.0) std::swap(a, b);
    lo[col] = std::max(lo[col], a);
    hi[col] = std::min(hi[col], b);
    if (lo[col] > hi[col]) return empty;
  }
  return {Box(lo.head(nhat_x), hi.head(nhat_x)), Box(lo.tail(nhat_u), hi.tail(nhat_u))};
}

Box image_pi(const AffineMap& pi, const Box& xhat, const Box& uhat) {
  pi.validate();
  require_same_dim(pi.P.cols(), xhat.dim() + uhat.dim(), "image_pi");
  if (xhat.is_empty() || uhat.is_empty()) return Box::empty(pi.out_dim());
  Vec zlo(pi.P.cols()), zhi(pi.P.cols());
  zlo << xhat.lo(), uhat.lo();
  zhi << xhat.hi(), uhat.hi();
  Vec lo = pi.omega, hi = pi.omega;
  for (Eigen::Index i = 0; i < pi.P.rows(); ++i)
    for (Eigen::Index j = 0; j < pi.P.cols(); ++j) {
      double p = pi.P(i, j);
      if (p == 0.0) continue;
      lo[i] += p * (p > 0 ? zlo[j] : zhi[j]);
      hi[i] += p * (p > 0 ? zhi[j] : zlo[j]);
    }
  return Box(std::move(lo), std::move(hi));
}

}  // namespace reachsynth
