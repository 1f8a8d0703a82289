#include "reachsynth/box.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace reachsynth;

namespace {

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

}  // namespace

TEST_CASE("box_expand matches the docking scenario obstacle inflation") {
  Box xa1(v3(2.0, 0.0, -M_PI), v3(2.5, 3.0, M_PI));
  Vec eps = v3(0.427, 0.432, 0.235);
  Box e = box_expand(xa1, eps);
  CHECK(e.lo()[0] == doctest::Approx(1.573).epsilon(1e-12));
  CHECK(e.hi()[0] == doctest::Approx(2.927).epsilon(1e-12));
  CHECK(e.lo()[1] == doctest::Approx(-0.432).epsilon(1e-12));
  CHECK(e.hi()[1] == doctest::Approx(3.432).epsilon(1e-12));
  CHECK(e.lo()[2] == doctest::Approx(-M_PI - 0.235).epsilon(1e-12));
  CHECK(e.hi()[2] == doctest::Approx(M_PI + 0.235).epsilon(1e-12));
}

TEST_CASE("box_expand trivials") {
  Box x(v1(0.0), v1(1.0));
  Box same = box_expand(x, v1(0.0));
  CHECK(same.lo()[0] == 0.0);
  CHECK(same.hi()[0] == 1.0);

  Box sq(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  Box infl = box_expand(sq, Vec::Constant(2, 0.5));
  CHECK(infl.lo()[0] == -1.5);
  CHECK(infl.hi()[1] == 1.5);

  CHECK_THROWS_AS(box_expand(x, Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("box_shrink matches the shrunk state constraints") {
  Box x(v3(0.0, 0.0, -M_PI), v3(10.0, 6.5, M_PI));
  Box s = box_shrink(x, v3(0.427, 0.432, 0.235));
  CHECK(s.lo()[0] == doctest::Approx(0.427).epsilon(1e-12));
  CHECK(s.hi()[0] == doctest::Approx(9.573).epsilon(1e-12));
  CHECK(s.lo()[1] == doctest::Approx(0.432).epsilon(1e-12));
  CHECK(s.hi()[1] == doctest::Approx(6.068).epsilon(1e-12));
  CHECK(s.lo()[2] == doctest::Approx(-M_PI + 0.235).epsilon(1e-12));
  CHECK(s.hi()[2] == doctest::Approx(M_PI - 0.235).epsilon(1e-12));
}

TEST_CASE("box_shrink empties on over-shrink and keeps identity at zero") {
  Box x(v1(0.0), v1(1.0));
  CHECK(box_shrink(x, v1(0.6)).is_empty());
  Box id = box_shrink(x, v1(0.0));
  CHECK(id.lo()[0] == 0.0);
  CHECK(id.hi()[0] == 1.0);
}

TEST_CASE("box_intersects counts shared faces") {
  Box a(Vec::Zero(2), Vec::Ones(2));
  Box b(v3(1.0, 0.0, 0.0).head(2), v3(2.0, 1.0, 0.0).head(2));
  CHECK(box_intersects(a, b));
  CHECK(!box_intersects(Box(v1(0.0), v1(1.0)), Box(v1(2.0), v1(3.0))));
  Box cell(Vec::Zero(3), Vec::Constant(3, 0.2));
  Box reach(Vec::Constant(3, 0.15), Vec::Constant(3, 0.5));
  CHECK(box_intersects(cell, reach));
}

TEST_CASE("box_contains") {
  Box a(v1(0.0), v1(2.0));
  CHECK(box_contains(a, Box(v1(0.5), v1(1.5))));
  CHECK(!box_contains(a, Box(v1(0.5), v1(2.5))));
}

TEST_CASE("empty boxes behave as the neutral element") {
  Box e = Box::empty(2);
  CHECK(e.is_empty());
  CHECK(!e.contains(Vec::Zero(2)));
  Box a(Vec::Zero(2), Vec::Ones(2));
  CHECK(!box_intersects(a, e));
  CHECK(box_contains(a, e));
  CHECK(!box_contains(e, a));
  CHECK(box_expand(e, Vec::Ones(2)).is_empty());
}

TEST_CASE("grid indexing is row-major with dimension 0 slowest") {
  PartitionGrid g(Box(v3(0.0, 0.0, -M_PI), v3(10.0, 6.5, M_PI)), VecI::Constant(3, 50));
  CHECK(g.total_cells() == 125000);
  CHECK(g.cell_of(v3(0.05, 0.05, -M_PI + 0.01)) == 0);
  CHECK(g.cell_of(v3(11.0, 0.0, 0.0)) == g.out_index());
  /* full flat layout: flat = (i0*50 + i1)*50 + i2 */
  VecI c(3);
  c << 2, 3, 4;
  CHECK(g.flat_of(c) == (2 * 50 + 3) * 50 + 4);
  CHECK((g.coords_of(g.flat_of(c)) - c).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("interior cell boundaries are half-open") {
  PartitionGrid g(Box(v1(0.0), v1(1.0)), VecI::Constant(1, 5));
  CHECK(g.cell_of(v1(0.2)) == 1);
  /* the domain's upper face is closed */
  CHECK(g.cell_of(v1(1.0)) == 4);
}

TEST_CASE("partition soundness on random points") {
  PartitionGrid g(Box(v3(0.0, 0.0, -M_PI), v3(10.0, 6.5, M_PI)), VecI::Constant(3, 50));
  std::mt19937_64 rng(42);
  for (int k = 0; k < 100000; ++k) {
    Vec x = v3(uniform(rng, 0, 10), uniform(rng, 0, 6.5), uniform(rng, -M_PI, M_PI));
    CellIndex i = g.cell_of(x);
    REQUIRE(i < g.total_cells());
    REQUIRE(g.cell_box(i).contains(x));
  }
  for (int k = 0; k < 10000; ++k) {
    Vec x = v3(uniform(rng, 10.01, 20), uniform(rng, -50, 50), uniform(rng, -50, 50));
    REQUIRE(g.cell_of(x) == g.out_index());
  }
}

TEST_CASE("cell centers map back to their own index") {
  PartitionGrid g(Box(v3(0.0, 0.0, -M_PI), v3(10.0, 6.5, M_PI)), VecI::Constant(3, 17));
  for (CellIndex i = 0; i < g.total_cells(); i += 7)
    REQUIRE(g.cell_of(g.cell_box(i).center()) == i);
}

TEST_CASE("cells tile the domain") {
  PartitionGrid g(Box(v1(-1.0), v1(2.0)), VecI::Constant(1, 7));
  double edge = -1.0;
  for (CellIndex i = 0; i < g.total_cells(); ++i) {
    Box c = g.cell_box(i);
    CHECK(c.lo()[0] == doctest::Approx(edge).epsilon(1e-14));
    edge = c.hi()[0];
  }
  CHECK(edge == 2.0);
}

TEST_CASE("expand/shrink duality and monotonicity") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 500; ++k) {
    int d = 1 + static_cast<int>(rng() % 5);
    Vec lo(d), hi(d), eps(d);
    for (int i = 0; i < d; ++i) {
      lo[i] = uniform(rng, -5, 5);
      hi[i] = lo[i] + uniform(rng, 0, 5);
      eps[i] = uniform(rng, 0, 2);
    }
    Box x(lo, hi);
    Box back = box_shrink(box_expand(x, eps), eps);
    REQUIRE(!back.is_empty());
    REQUIRE((back.lo() - x.lo()).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((back.hi() - x.hi()).cwiseAbs().maxCoeff() < 1e-12);

    /* A inside B keeps inclusion through both operations */
    Vec shift = 0.1 * x.width();
    Box a(lo + shift, hi - shift.cwiseMin(0.4 * x.width()));
    REQUIRE(box_contains(box_expand(x, eps), box_expand(a, eps)));
    Box sa = box_shrink(a, eps), sx = box_shrink(x, eps);
    if (!sa.is_empty()) REQUIRE(box_contains(sx, sa));
  }
}

TEST_CASE("preimage of the identity-stacking map") {
  AffineMap pi = AffineMap::identity_stacking(3, 3);
  Vec lo(6), hi(6);
  double inf = std::numeric_limits<double>::infinity();
  lo << 0, 0, -M_PI, -inf, -inf, -inf;
  hi << 10, 6.5, M_PI, inf, inf, inf;
  auto [xhat, uhat] = preimage_pi(pi, Box(lo, hi), 3, 3);
  CHECK(xhat.lo()[0] == 0.0);
  CHECK(xhat.hi()[1] == 6.5);
  CHECK(xhat.hi()[2] == M_PI);
  CHECK(!uhat.is_bounded());
  CHECK(std::isinf(uhat.hi()[0]));
}

TEST_CASE("preimage scaling and infeasible constant rows") {
  AffineMap pi;
  pi.P = 2.0 * Mat::Identity(1, 1);
  pi.omega = Vec::Zero(1);
  auto [x, u] = preimage_pi(pi, Box(v1(0.0), v1(4.0)), 1, 0);
  CHECK(x.lo()[0] == 0.0);
  CHECK(x.hi()[0] == 2.0);
  CHECK(u.dim() == 0);

  AffineMap zero;
  zero.P = Mat::Zero(1, 1);
  zero.omega = v1(5.0);
  auto [xz, uz] = preimage_pi(zero, Box(v1(0.0), v1(4.0)), 1, 0);
  CHECK(xz.is_empty());
  CHECK(uz.is_empty());
}

TEST_CASE("preimage rejects maps with dense rows") {
  AffineMap pi;
  pi.P = Mat::Ones(2, 2);
  pi.omega = Vec::Zero(2);
  CHECK_THROWS_AS(preimage_pi(pi, Box(Vec::Zero(2), Vec::Ones(2)), 1, 1),
                  std::invalid_argument);
}

TEST_CASE("preimage soundness on random row-sparse maps") {
  std::mt19937_64 rng(19);
  int inside_checked = 0, outside_checked = 0;
  while (inside_checked < 10000) {
    int n_out = 2 + static_cast<int>(rng() % 3);
    int nx = 1 + static_cast<int>(rng() % 2);
    int nu = 1 + static_cast<int>(rng() % 2);
    AffineMap pi;
    pi.P = Mat::Zero(n_out, nx + nu);
    pi.omega = Vec::Zero(n_out);
    for (int i = 0; i < n_out; ++i) {
      if (rng() % 5 == 0) continue;  /* keep some all-zero rows */
      int col = static_cast<int>(rng() % (nx + nu));
      double p = uniform(rng, 0.2, 2.0) * (rng() % 2 ? 1.0 : -1.0);
      pi.P(i, col) = p;
      pi.omega[i] = uniform(rng, -1, 1);
    }
    Vec lo(n_out), hi(n_out);
    for (int i = 0; i < n_out; ++i) {
      lo[i] = uniform(rng, -3, 1);
      hi[i] = lo[i] + uniform(rng, 0.5, 4.0);
    }
    Box target(lo, hi);
    auto [xhat, uhat] = preimage_pi(pi, target, nx, nu);
    if (xhat.is_empty()) continue;

    /* clip unbounded coordinates to a sampling window */
    auto sample_in = [&](const Box& b) {
      Vec s(b.dim());
      for (Eigen::Index i = 0; i < b.dim(); ++i) {
        double l = std::max(b.lo()[i], -20.0), h = std::min(b.hi()[i], 20.0);
        s[i] = uniform(rng, l, h);
      }
      return s;
    };
    for (int k = 0; k < 20 && inside_checked < 10000; ++k, ++inside_checked) {
      Vec xs = sample_in(xhat), us = sample_in(uhat);
      REQUIRE(target.contains(pi.apply(xs, us)));
    }
    /* push one bounded coordinate strictly past its bound */
    for (int k = 0; k < 10; ++k) {
      Vec xs = sample_in(xhat), us = sample_in(uhat);
      Vec z(nx + nu);
      z << xs, us;
      std::vector<int> bounded;
      for (int j = 0; j < nx + nu; ++j) {
        double l = j < nx ? xhat.lo()[j] : uhat.lo()[j - nx];
        double h = j < nx ? xhat.hi()[j] : uhat.hi()[j - nx];
        if (std::isfinite(l) || std::isfinite(h)) bounded.push_back(j);
      }
      if (bounded.empty()) break;
      int j = bounded[rng() % bounded.size()];
      double l = j < nx ? xhat.lo()[j] : uhat.lo()[j - nx];
      double h = j < nx ? xhat.hi()[j] : uhat.hi()[j - nx];
      if (std::isfinite(h))
        z[j] = h + uniform(rng, 0.01, 1.0);
      else
        z[j] = l - uniform(rng, 0.01, 1.0);
      REQUIRE(!target.contains(pi.apply(z.head(nx), z.tail(nu))));
      ++outside_checked;
    }
  }
  CHECK(outside_checked > 1000);
}

TEST_CASE("image of a box pair under the stacking map") {
  AffineMap pi = AffineMap::identity_stacking(2, 1);
  Box xh(Vec::Zero(2), Vec::Ones(2));
  Box uh(v1(-1.0), v1(1.0));
  Box img = image_pi(pi, xh, uh);
  CHECK(img.dim() == 3);
  CHECK(img.lo()[2] == -1.0);
  CHECK(img.hi()[1] == 1.0);
}
