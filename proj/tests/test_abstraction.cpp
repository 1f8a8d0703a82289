#include "reachsynth/transition.hpp"

#include "reachsynth/ship.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace reachsynth;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

JacobianBoundFn zero_jacobian(int nx, int nw) {
  return [nx, nw](const Box&, const Vec&, const Box&) {
    return JacobianBounds{Mat::Zero(nx, nx), Mat::Zero(nx, nx), Mat::Zero(nx, nw),
                          Mat::Zero(nx, nw)};
  };
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("input grid uses endpoint discretization and drops avoided points") {
  Vec lo(2), hi(2);
  lo << 0.0, -1.0;
  hi << 0.18, 1.0;
  VecI n(2);
  n << 5, 3;
  InputGrid g(Box(lo, hi), n);
  CHECK(g.size() == 15);
  CHECK(g.point(0)[0] == 0.0);
  CHECK(g.point(0)[1] == -1.0);
  CHECK(g.point(14)[0] == doctest::Approx(0.18));
  CHECK(g.point(14)[1] == 1.0);
  /* midpoint rule for single-value dimensions */
  VecI one(2);
  one << 1, 1;
  InputGrid mid(Box(lo, hi), one);
  CHECK(mid.size() == 1);
  CHECK(mid.point(0)[0] == doctest::Approx(0.09));

  Box avoid(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5));
  InputGrid filtered(Box(lo, hi), n, {avoid});
  CHECK(filtered.size() < 15);
  for (const Vec& p : filtered.points()) CHECK(!avoid.contains(p));
}

TEST_CASE("zero field produces self-loops everywhere") {
  VectorField f{1, 1, 0, [](const Vec& x, const Vec&, const Vec&) { return Vec::Zero(x.size()); }};
  auto d = build_decomposition(f, zero_jacobian(1, 0));
  PartitionGrid grid(Box(Vec::Zero(1), Vec::Ones(1)), VecI::Constant(1, 5));
  InputGrid inputs(Box(Vec::Constant(1, -1.0), Vec::Ones(1)), VecI::Constant(1, 3));
  TransitionSystem ts =
      build_abstraction(d, grid, inputs, Box::empty(0), ReachSettings{1.0, 10, {}}, nullptr, 1);
  for (CellIndex s = 0; s < 5; ++s)
    for (int u = 0; u < 3; ++u) {
      auto succ = ts.successors(s, u);
      REQUIRE(succ.size() == 1);
      REQUIRE(succ[0] == s);
    }
}

TEST_CASE("integrator cell translates onto the expected successor pair") {
  VectorField f{1, 1, 0, [](const Vec&, const Vec& u, const Vec&) { return u; }};
  auto d = build_decomposition(f, zero_jacobian(1, 0));
  PartitionGrid grid(Box(Vec::Zero(1), Vec::Ones(1)), VecI::Constant(1, 5));
  InputGrid inputs(Box(Vec::Constant(1, 0.1), Vec::Constant(1, 0.1)), VecI::Constant(1, 1));
  TransitionSystem ts =
      build_abstraction(d, grid, inputs, Box::empty(0), ReachSettings{3.0, 50, {}}, nullptr, 1);
  /* cell [0, 0.2) + 0.3 = [0.3, 0.5]: cells 1 and 2 */
  auto succ = ts.successors(0, 0);
  REQUIRE(succ.size() == 2);
  CHECK(succ[0] == 1);
  CHECK(succ[1] == 2);
  /* the last cell [0.8, 1.0] + 0.3 leaves the domain */
  auto last = ts.successors(4, 0);
  REQUIRE(last.size() == 1);
  CHECK(last[0] == ts.out_code());
}

TEST_CASE("avoid cells are merged into Out") {
  VectorField f{1, 1, 0, [](const Vec&, const Vec& u, const Vec&) { return u; }};
  auto d = build_decomposition(f, zero_jacobian(1, 0));
  PartitionGrid grid(Box(Vec::Zero(1), Vec::Ones(1)), VecI::Constant(1, 5));
  InputGrid inputs(Box(Vec::Constant(1, 0.1), Vec::Constant(1, 0.1)), VecI::Constant(1, 1));
  auto avoid = [](CellIndex s) { return s == 2; };
  TransitionSystem ts =
      build_abstraction(d, grid, inputs, Box::empty(0), ReachSettings{3.0, 50, {}}, avoid, 1);
  CHECK(!ts.is_safe(2));
  CHECK_THROWS_AS(ts.successors(2, 0), std::out_of_range);
  /* cell 0 reaches [0.3, 0.5]: successor 1 stays, the avoid part becomes Out */
  auto succ = ts.successors(0, 0);
  REQUIRE(succ.size() == 2);
  CHECK(succ[0] == 1);
  CHECK(succ[1] == ts.out_code());
}

TEST_CASE("ship abstraction sizes at survey and desk resolution") {
  Vec lo(3), hi(3);
  lo << 0.0, 0.0, -M_PI;
  hi << 10.0, 6.5, M_PI;
  PartitionGrid paper(Box(lo, hi), VecI::Constant(3, 50));
  CHECK(paper.total_cells() == 125000);
  Vec ulo(3), uhi(3);
  ulo << 0.0, -0.05, -0.1;
  uhi << 0.18, 0.05, 0.1;
  InputGrid paper_inputs(Box(ulo, uhi), VecI::Constant(3, 9));
  CHECK(paper_inputs.size() == 729);

  PartitionGrid desk(Box(lo, hi), VecI::Constant(3, 20));
  CHECK(desk.total_cells() == 8000);
  InputGrid desk_inputs(Box(ulo, uhi), VecI::Constant(3, 5));
  CHECK(desk_inputs.size() == 125);
}

TEST_CASE("behavioral inclusion on a coarse ship abstraction") {
  auto d = build_decomposition(ship_kinematics_field(), ship_kinematics_jacobian());
  Vec lo(3), hi(3);
  lo << 0.0, 0.0, -M_PI;
  hi << 10.0, 6.5, M_PI;
  PartitionGrid grid(Box(lo, hi), VecI::Constant(3, 8));
  Vec ulo(3), uhi(3);
  ulo << 0.0, -0.05, -0.1;
  uhi << 0.18, 0.05, 0.1;
  InputGrid inputs(Box(ulo, uhi), VecI::Constant(3, 2));
  Box what(Vec::Constant(3, -0.01), Vec::Constant(3, 0.01));
  ReachSettings settings{3.0, 50, {}};
  TransitionSystem ts = build_abstraction(d, grid, inputs, what, settings, nullptr, 0);

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    CellIndex s = static_cast<CellIndex>(rng() % grid.total_cells());
    int u = static_cast<int>(rng() % inputs.size());
    Box cell = grid.cell_box(s);
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = uniform(rng, cell.lo()[i], cell.hi()[i]);
    /* piecewise-constant disturbance with 10 switches */
    Vec endpoint = x;
    for (int seg = 0; seg < 10; ++seg) {
      Vec w(3);
      for (int i = 0; i < 3; ++i) w[i] = uniform(rng, -0.01, 0.01);
      endpoint = rk4([&](double, const Vec& z) { return ship_kinematics(z, inputs.point(u), w); },
                     endpoint, 0.0, 0.3, 10);
    }
    CellIndex target = grid.cell_of(endpoint);
    auto succ = ts.successors(s, u);
    bool found = false;
    std::int32_t code = target == grid.out_index() ? ts.out_code()
                										: static_cast<std::int32_t>(target);
    for (std::int32_t t : succ)
      if (t == code) {
        found = true;
        break;
      }
    REQUIRE(found);
  }
}

TEST_CASE("construction is deterministic across thread counts") {
  auto d = build_decomposition(ship_kinematics_field(), ship_kinematics_jacobian());
  Vec lo(3), hi(3);
  lo << 0.0, 0.0, -M_PI;
  hi << 10.0, 6.5, M_PI;
  PartitionGrid grid(Box(lo, hi), VecI::Constant(3, 6));
  Vec ulo(3), uhi(3);
  ulo << 0.0, -0.05, -0.1;
  uhi << 0.18, 0.05, 0.1;
  InputGrid inputs(Box(ulo, uhi), VecI::Constant(3, 2));
  Box what(Vec::Constant(3, -0.01), Vec::Constant(3, 0.01));
  ReachSettings settings{3.0, 20, {}};

  TransitionSystem a = build_abstraction(d, grid, inputs, what, settings, nullptr, 1, 77);
  TransitionSystem b = build_abstraction(d, grid, inputs, what, settings, nullptr, 4, 77);
  std::string fa = "build/ts_threads1.rts", fb = "build/ts_threads4.rts";
  a.save(fa);
  b.save(fb);
  CHECK(read_file(fa) == read_file(fb));
  std::remove(fa.c_str());
  std::remove(fb.c_str());
}

TEST_CASE("binary round trip preserves the relation") {
  VectorField f{1, 1, 0, [](const Vec&, const Vec& u, const Vec&) { return u; }};
  auto d = build_decomposition(f, zero_jacobian(1, 0));
  PartitionGrid grid(Box(Vec::Zero(1), Vec::Ones(1)), VecI::Constant(1, 7));
  InputGrid inputs(Box(Vec::Constant(1, -0.1), Vec::Constant(1, 0.1)), VecI::Constant(1, 3));
  TransitionSystem ts = build_abstraction(d, grid, inputs, Box::empty(0),
                                          ReachSettings{2.0, 20, {}}, nullptr, 1, 12345);
  std::string path = "build/ts_roundtrip.rts";
  ts.save(path);
  TransitionSystem back = TransitionSystem::load(path);
  std::remove(path.c_str());
  CHECK(back.config_hash() == 12345);
  CHECK(back.grid().total_cells() == 7);
  CHECK(back.inputs().size() == 3);
  for (CellIndex s = 0; s < 7; ++s)
    for (int u = 0; u < 3; ++u) {
      auto sa = ts.successors(s, u);
      auto sb = back.successors(s, u);
      REQUIRE(sa.size() == sb.size());
      for (size_t i = 0; i < sa.size(); ++i) REQUIRE(sa[i] == sb[i]);
    }

  std::ostringstream text;
  ts.write_text(text);
  CHECK(text.str().find("0 0 :") != std::string::npos);
}

TEST_CASE("hand-built transition systems reject malformed input") {
  CHECK_THROWS_AS(TransitionSystem::from_lists(2, 1, {{{0}}, {{5}}}), std::invalid_argument);
  TransitionSystem ts = TransitionSystem::from_lists(2, 1, {{{1, 0, 1}}, {{2}}});
  auto s0 = ts.successors(0, 0);
  REQUIRE(s0.size() == 2);  /* deduplicated and sorted */
  CHECK(s0[0] == 0);
  CHECK(s0[1] == 1);
  auto s1 = ts.successors(1, 0);
  CHECK(s1[0] == ts.out_code());
}
