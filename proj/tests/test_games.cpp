#include "reachsynth/games.hpp"

#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

using namespace reachsynth;

namespace {

/* independent brute-force backward induction over explicit sets; written
 * against the definitions, not the production data structures */
struct Oracle {
  int n_states, n_inputs;
  std::vector<std::vector<std::vector<std::int32_t>>> delta;  /* [s][u] */
  std::int32_t out;

  bool subset_of(const std::vector<std::int32_t>& succ, const std::set<int>& s) const {
    for (std::int32_t t : succ)
      if (t == out || !s.count(t)) return false;
    return true;
  }

  std::set<int> safety(const std::set<int>& target, const std::vector<int>& stay) const {
    std::set<int> s = target;
    for (;;) {
      std::set<int> next;
      for (int q : s)
        for (int u : stay)
          if (subset_of(delta[q][u], s)) {
            next.insert(q);
            break;
          }
      if (next == s) return s;
      s = std::move(next);
    }
  }

  std::set<int> reach(const std::set<int>& seed, const std::vector<int>& inputs) const {
    std::set<int> r = seed;
    for (;;) {
      std::set<int> next = r;
      for (int q = 0; q < n_states; ++q) {
        if (r.count(q)) continue;
        for (int u : inputs)
          if (subset_of(delta[q][u], r)) {
            next.insert(q);
            break;
          }
      }
      if (next == r) return r;
      r = std::move(next);
    }
  }
};

std::vector<int> iota_inputs(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("safety fixed point on the three-state example") {
  /* delta(a) = {a}, delta(b) = {a, c}, delta(c) = {Out}; target {a, b} */
  TransitionSystem ts = TransitionSystem::from_lists(3, 1, {{{0}}, {{0, 2}}, {{3}}});
  GameSpec spec{{0, 1}, {0}, {0}};
  SafetyResult s = solve_safety(ts, spec);
  CHECK(s.in_s[0] == 1);
  CHECK(s.in_s[1] == 0);  /* c is not in the target, so b cannot stay */
  CHECK(s.in_s[2] == 0);
  CHECK(s.choice[0] == 0);
  CHECK(s.choice[1] == -1);
}

TEST_CASE("self-loop system keeps the whole target invariant") {
  TransitionSystem ts = TransitionSystem::from_lists(4, 2, {{{0}, {1}},
                                                            {{1}, {2}},
                                                            {{2}, {3}},
                                                            {{3}, {0}}});
  GameSpec spec{{0, 1, 2, 3}, {0, 1}, {0, 1}};
  SafetyResult s = solve_safety(ts, spec);
  for (int q = 0; q < 4; ++q) CHECK(s.in_s[q] == 1);
  CHECK(s.iterations == 1);

  GameSpec empty{{}, {0, 1}, {0, 1}};
  SafetyResult e = solve_safety(ts, empty);
  CHECK(std::count(e.in_s.begin(), e.in_s.end(), 1) == 0);
}

TEST_CASE("reach ranks along a chain") {
  /* a -> b -> c with c absorbing */
  TransitionSystem ts = TransitionSystem::from_lists(3, 1, {{{1}}, {{2}}, {{2}}});
  ReachResult r = solve_reach(ts, {2}, {0});
  CHECK(r.rank[2] == 0);
  CHECK(r.rank[1] == 1);
  CHECK(r.rank[0] == 2);
  CHECK(r.choice[0] == 0);
  CHECK(r.choice[2] == -1);

  ReachResult none = solve_reach(ts, {}, {0});
  CHECK(std::count(none.in_r.begin(), none.in_r.end(), 1) == 0);
}

TEST_CASE("states whose every input risks Out are excluded") {
  TransitionSystem ts = TransitionSystem::from_lists(2, 2, {{{1}, {1, 2}}, {{1}, {1}}});
  ReachResult r = solve_reach(ts, {1}, {0, 1});
  CHECK(r.in_r[0] == 1);   /* input 0 avoids Out */
  CHECK(r.choice[0] == 0);
  TransitionSystem ts2 = TransitionSystem::from_lists(2, 1, {{{1, 2}}, {{1}}});
  ReachResult r2 = solve_reach(ts2, {1}, {0});
  CHECK(r2.in_r[0] == 0);  /* the only input may fall Out */
}

TEST_CASE("smallest-input tie-break in the extracted controller") {
  /* both inputs keep the singleton target invariant */
  TransitionSystem ts = TransitionSystem::from_lists(1, 8, {{{0}, {0}, {0}, {0}, {0}, {0}, {0}, {0}}});
  GameSpec spec{{0}, {3, 7}, iota_inputs(8)};
  SafetyResult s = solve_safety(ts, spec);
  CHECK(s.choice[0] == 3);
}

TEST_CASE("controller table merges stay and reach choices") {
  /* chain a -> b -> c, c absorbing and the stay target */
  TransitionSystem ts = TransitionSystem::from_lists(3, 1, {{{1}}, {{2}}, {{2}}});
  GameSpec spec{{2}, {0}, {0}};
  SafetyResult s = solve_safety(ts, spec);
  ReachResult r = solve_reach(ts, {2}, spec.all_inputs);
  ControllerTable table = extract_controller(s, r, ts);
  CHECK(table.stay_count() == 1);
  CHECK(table.win_count() == 3);
  CHECK(table.coverage() == doctest::Approx(1.0));
  CHECK(table.has_choice(0));
  CHECK(table.has_choice(2));  /* stay choice on S */
  CHECK(table.rank[0] == 2);
}

TEST_CASE("random systems: solver equals brute-force backward induction") {
  std::mt19937_64 rng(101);
  for (int instance = 0; instance < 200; ++instance) {
    int n = 2 + static_cast<int>(rng() % 11);   /* <= 12 states */
    int m = 1 + static_cast<int>(rng() % 3);    /* <= 3 inputs */
    Oracle oracle;
    oracle.n_states = n;
    oracle.n_inputs = m;
    oracle.out = n;
    oracle.delta.assign(n, std::vector<std::vector<std::int32_t>>(m));
    for (int s = 0; s < n; ++s)
      for (int u = 0; u < m; ++u) {
        int k = 1 + static_cast<int>(rng() % 4);  /* <= 4 successors */
        k = std::min(k, n + 1);
        std::set<std::int32_t> succ;
        while (static_cast<int>(succ.size()) < k)
          succ.insert(static_cast<std::int32_t>(rng() % (n + 1)));  /* may include Out */
        oracle.delta[s][u].assign(succ.begin(), succ.end());
      }
    TransitionSystem ts = TransitionSystem::from_lists(n, m, oracle.delta);

    std::set<int> target;
    for (int s = 0; s < n; ++s)
      if (rng() % 3 == 0) target.insert(s);
    std::vector<int> stay;
    for (int u = 0; u < m; ++u)
      if (rng() % 2 == 0) stay.push_back(u);
    if (stay.empty()) stay.push_back(0);
    std::vector<int> all = iota_inputs(m);

    GameSpec spec{std::vector<CellIndex>(target.begin(), target.end()), stay, all};
    SafetyResult s = solve_safety(ts, spec);
    std::set<int> s_oracle = oracle.safety(target, stay);
    for (int q = 0; q < n; ++q) REQUIRE(static_cast<bool>(s.in_s[q]) == (s_oracle.count(q) > 0));

    std::vector<CellIndex> seed;
    for (int q = 0; q < n; ++q)
      if (s.in_s[q]) seed.push_back(q);
    ReachResult fast = solve_reach(ts, seed, all);
    ReachResult slow = solve_reach_rescan(ts, seed, all);
    std::set<int> r_oracle = oracle.reach(s_oracle, all);
    for (int q = 0; q < n; ++q) {
      REQUIRE(fast.in_r[q] == slow.in_r[q]);
      REQUIRE(fast.rank[q] == slow.rank[q]);
      REQUIRE(fast.choice[q] == slow.choice[q]);
      REQUIRE(static_cast<bool>(fast.in_r[q]) == (r_oracle.count(q) > 0));
    }
  }
}

TEST_CASE("fixed-point certification and rank decrease") {
  std::mt19937_64 rng(202);
  for (int instance = 0; instance < 40; ++instance) {
    int n = 4 + static_cast<int>(rng() % 9);
    int m = 1 + static_cast<int>(rng() % 3);
    std::vector<std::vector<std::vector<std::int32_t>>> delta(
        n, std::vector<std::vector<std::int32_t>>(m));
    for (int s = 0; s < n; ++s)
      for (int u = 0; u < m; ++u) {
        int k = 1 + static_cast<int>(rng() % 3);
        std::set<std::int32_t> succ;
        while (static_cast<int>(succ.size()) < k)
          succ.insert(static_cast<std::int32_t>(rng() % (n + 1)));
        delta[s][u].assign(succ.begin(), succ.end());
      }
    TransitionSystem ts = TransitionSystem::from_lists(n, m, delta);
    std::vector<CellIndex> target;
    for (int s = 0; s < n; ++s)
      if (rng() % 2 == 0) target.push_back(s);
    GameSpec spec{target, iota_inputs(m), iota_inputs(m)};
    SafetyResult s = solve_safety(ts, spec);
    /* every surviving cell has its witness inside S */
    for (int q = 0; q < n; ++q) {
      if (!s.in_s[q]) continue;
      for (std::int32_t t : ts.successors(q, s.choice[q])) {
        REQUIRE(t != ts.out_code());
        REQUIRE(s.in_s[t] == 1);
      }
    }
    std::vector<CellIndex> seed;
    for (int q = 0; q < n; ++q)
      if (s.in_s[q]) seed.push_back(q);
    ReachResult r = solve_reach(ts, seed, spec.all_inputs);
    for (int q = 0; q < n; ++q) {
      if (!r.in_r[q] || r.rank[q] == 0) continue;
      for (std::int32_t t : ts.successors(q, r.choice[q])) {
        REQUIRE(t != ts.out_code());
        REQUIRE(r.in_r[t] == 1);
        REQUIRE(r.rank[t] < r.rank[q]);
      }
    }
    /* adversarial runs reach the seed within rank steps and stay in S */
    ControllerTable table = extract_controller(s, r, ts);
    for (int run = 0; run < 25; ++run) {
      std::vector<int> winners;
      for (int q = 0; q < n; ++q)
        if (r.in_r[q]) winners.push_back(q);
      if (winners.empty()) break;
      int q = winners[rng() % winners.size()];
      int budget = r.rank[q];
      while (r.rank[q] > 0) {
        auto succ = ts.successors(q, table.choice[q]);
        q = succ[rng() % succ.size()];
        REQUIRE(--budget >= 0);
      }
      /* inside S now: stay there for a few steps */
      for (int step = 0; step < 10 && !seed.empty(); ++step) {
        REQUIRE(s.in_s[q] == 1);
        auto succ = ts.successors(q, table.choice[q]);
        q = succ[rng() % succ.size()];
      }
    }
  }
}

TEST_CASE("controller table round-trips through the binary format") {
  TransitionSystem ts = TransitionSystem::from_lists(3, 2, {{{1}, {0}}, {{2}, {0}}, {{2}, {2}}});
  GameSpec spec{{2}, {0, 1}, {0, 1}};
  SafetyResult s = solve_safety(ts, spec);
  ReachResult r = solve_reach(ts, {2}, spec.all_inputs);
  ControllerTable table = extract_controller(s, r, ts);
  std::string path = "build/controller_roundtrip.rsc";
  table.save(path);
  ControllerTable back = ControllerTable::load(path);
  std::remove(path.c_str());
  CHECK(back.n_cells == table.n_cells);
  CHECK(back.win_count() == table.win_count());
  for (CellIndex q = 0; q < 3; ++q) {
    CHECK(back.choice[q] == table.choice[q]);
    CHECK(back.rank[q] == table.rank[q]);
  }
}
