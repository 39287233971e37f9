// Copyright 2026 The l2b Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "l2b/branching.hpp"
#include "random_instances.hpp"

using namespace l2b;

namespace {

MilpInstance knapsack() {
  return parse_instance("MILP v1 knap 2 1 2\nOBJ -5 -4\nROW 0 4 2 0 2 1 3\nBND 0 0 1\nBND 1 0 1\n");
}

bool contains(std::span<const int> set, int j) { return std::find(set.begin(), set.end(), j) != set.end(); }

// Owns everything a BranchContext points at.
struct Node {
  MilpInstance inst;
  LpSolver solver;
  RowView rows;
  std::vector<BoundOverride> overrides;
  LpSolution lp;
  PseudocostStore pc;
  Rng rng;

  Node(MilpInstance i, std::vector<BoundOverride> ov = {}, std::uint64_t seed = 1)
      : inst(std::move(i)), solver(inst), rows(RowView::build(inst)), overrides(std::move(ov)), pc(inst.num_vars),
        rng(seed) {
    lp = solver.solve(overrides);
  }
  BranchContext context(double db = 0.0) {
    return BranchContext(solver, rows, overrides, lp, fractional_candidates(inst, lp.x), 0, db, pc, rng);
  }
};

}  // namespace

TEST_CASE("most infeasible") {
  const std::vector<int> both{0, 1};
  CHECK(most_infeasible_select(std::vector<double>{0.5, 0.9}, both) == 0);
  CHECK(most_infeasible_select(std::vector<double>{0.3, 0.7}, both) == 0);
  CHECK(most_infeasible_select(std::vector<double>{0.2, 0.4}, both) == 1);
  CHECK(most_infeasible_select(std::vector<double>{0.1, 0.7}, std::vector<int>{1}) == 1);
  CHECK_THROWS(most_infeasible_select(std::vector<double>{0.5}, std::vector<int>{}));
}

TEST_CASE("pseudocost score") {
  CHECK(pc_score(0.5, 2.0, 4.0) == doctest::Approx(2.0));
  CHECK(pc_score(0.5, 0.0, 0.0) == doctest::Approx(1e-12));
  CHECK(pc_score(0.25, 4.0, 0.0) == doctest::Approx(1e-6));
}

TEST_CASE("pseudocost update") {
  PseudocostStore s(3);
  CHECK(s.psi(1, BranchDir::up) == 1.0);
  s.update(1, BranchDir::up, 10.0, LpStatus::optimal, 13.0, 0.5);
  CHECK(s.psi(1, BranchDir::up) == 6.0);
  CHECK(s.count(1, BranchDir::up) == 1);
  s.update(1, BranchDir::up, 10.0, LpStatus::optimal, 11.0, 0.5);
  CHECK(s.psi(1, BranchDir::up) == 4.0);
  CHECK(s.count(1, BranchDir::up) == 2);
  const PseudocostStore before = s;
  s.update(1, BranchDir::up, 10.0, LpStatus::infeasible, 0.0, 0.5);
  CHECK(s == before);
  CHECK(s.psi(1, BranchDir::down) == 1.0);
}

TEST_CASE("strong branching on the knapsack root") {
  Node node(knapsack());
  auto ctx = node.context();
  REQUIRE(ctx.candidates() == std::vector<int>{1});
  CHECK(sb_select(ctx) == 1);
}

TEST_CASE("strong branching prefers a candidate with two infeasible children") {
  // x0 is pinned to 0.5 by an equality; x2 is fractional with feasible
  // children.
  const MilpInstance inst = parse_instance(
      "MILP v1 sb3 3 2 3\nOBJ 0 -1 -1\nEQ 0 1 1 0 2\nROW 1 1.5 2 1 1 2 1\nBND 0 0 1\nBND 1 0 1\nBND 2 0 1\n");
  Node node(inst);
  REQUIRE(node.lp.optimal());
  const auto cands = fractional_candidates(inst, node.lp.x);
  REQUIRE(cands.size() == 2);
  REQUIRE(cands[0] == 0);
  // Independent probes with fresh cold solves.
  for (int j : cands) {
    const double v = node.lp.x[j];
    const auto down = solve_lp(inst, std::vector<BoundOverride>{{j, BoundSide::upper, std::floor(v)}});
    const auto up = solve_lp(inst, std::vector<BoundOverride>{{j, BoundSide::lower, std::ceil(v)}});
    if (j == 0) {
      CHECK(down.status == LpStatus::infeasible);
      CHECK(up.status == LpStatus::infeasible);
    } else {
      CHECK(down.optimal());
      CHECK(up.optimal());
    }
  }
  auto ctx = node.context();
  CHECK(sb_select(ctx) == 0);
  CHECK(sb_score(node.lp.objective, *ctx.cached_probe(0)) == doctest::Approx(1e12));
  CHECK(ctx.probe_cost() > 0);
}

TEST_CASE("equal strong branching scores pick the lowest index") {
  const MilpInstance inst =
      parse_instance("MILP v1 sym 2 2 2\nOBJ -1 -1\nROW 0 1 1 0 2\nROW 1 1 1 1 2\nBND 0 0 1\nBND 1 0 1\n");
  Node node(inst);
  auto ctx = node.context();
  REQUIRE(ctx.candidates().size() == 2);
  CHECK(sb_select(ctx) == 0);
  // Side effect: feasible children feed the pseudocosts, infeasible ones
  // do not.
  CHECK(node.pc.count(0, BranchDir::down) == 1);
  CHECK(node.pc.count(1, BranchDir::down) == 1);
  CHECK(node.pc.count(1, BranchDir::up) == 0);
}

TEST_CASE("active constraint scores") {
  SUBCASE("single active row, single candidate") {
    const MilpInstance inst = parse_instance("MILP v1 ac1 1 1 1\nOBJ -1\nROW 0 1.5 1 0 1\nBND 0 0 5\n");
    const std::vector<double> x{1.5};
    const auto s = ac_scores(inst, RowView::build(inst), x, std::vector<int>{0}, {1, 0, 0, 0});
    CHECK(s[0] == 1.0);
  }
  SUBCASE("zero weights fall back to most infeasible") {
    const MilpInstance inst =
        parse_instance("MILP v1 ac0 2 1 2\nOBJ -1 -1\nROW 0 1 2 0 1 1 1\nBND 0 0 1\nBND 1 0 1\n");
    const std::vector<double> x{0.2, 0.8 - 0.3};
    const auto rows = RowView::build(inst);
    const std::vector<int> cands{0, 1};
    const auto s = ac_scores(inst, rows, x, cands, {0, 0, 0, 0});
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 0.0);
    CHECK(ac_select(inst, rows, x, cands, {0, 0, 0, 0}) == 1);
  }
  SUBCASE("hand-computed three by three") {
    const MilpInstance inst = parse_instance(
        "MILP v1 ac3 3 3 2\nOBJ 0 0 0\nROW 0 3.5 3 0 1 1 2 2 2\nROW 1 5.5 2 0 3 2 4\nROW 2 10 2 0 1 1 1\n"
        "BND 0 0 1\nBND 1 0 1\nBND 2 0 1\n");
    const std::vector<double> x{0.5, 0.5, 1.0};
    const std::vector<int> cands{0, 1};
    const AcWeights r{0.1, 0.2, 0.3, 0.4};
    const auto s = ac_scores(inst, RowView::build(inst), x, cands, r);
    // Rows 0 and 1 are tight, row 2 is slack.
    // W1 = (2, 1), W2 = (1/2 + 1, 1/2), W3 = (1/3 + 3/5, 2/3), W4 = (1/3 + 1, 2/3).
    const double w1 = 1.0 / 2.0, w2 = 0.5 / 1.5, w3 = (2.0 / 3.0) / (1.0 / 3.0 + 3.0 / 5.0), w4 = (2.0 / 3.0) / (4.0 / 3.0);
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.1 * w1 + 0.2 * w2 + 0.3 * w3 + 0.4 * w4).epsilon(1e-12));
  }
}

TEST_CASE("hybrid strategy table") {
  CHECK(hybrid_uses_pc(1.0, 2.0, 0.5, 0.1));
  CHECK_FALSE(hybrid_uses_pc(3.0, 2.0, 0.5, 0.1));
  CHECK_FALSE(hybrid_uses_pc(1.0, 2.0, 0.5, 0.9));
  CHECK(hybrid_uses_pc(3.0, 2.0, 0.5, 0.9));
}

TEST_CASE("hybrid sampling frequency") {
  const MilpInstance inst = knapsack();
  const auto rows = RowView::build(inst);
  const std::vector<double> x{1.0, 2.0 / 3.0};
  const std::vector<int> cands{1};
  const PseudocostStore pc(2);
  for (double r0 : {0.2, 0.5, 0.8}) {
    HybridConfig cfg;
    cfg.r0 = r0;
    Rng rng(static_cast<std::uint64_t>(r0 * 1000));
    int pc_count = 0;
    for (int k = 0; k < 10000; ++k) pc_count += hybrid_select(-8.0, -7.0, cfg, rng, inst, rows, x, cands, pc).used_pc;
    CHECK(std::abs(pc_count / 10000.0 - r0) <= 0.02);
  }
  HybridConfig cfg;
  cfg.r0 = 1.0 - 1e-12;
  Rng rng(5);
  int pc_count = 0;
  for (int k = 0; k < 10000; ++k) pc_count += hybrid_select(-8.0, -7.0, cfg, rng, inst, rows, x, cands, pc).used_pc;
  CHECK(pc_count == 10000);
}

TEST_CASE("dive threshold on the knapsack") {
  Node node(knapsack());
  // x1 = 2/3 rounds up, leaving x0 = 1/2; x0 rounds up (infeasible), then
  // down, landing on (0, 1) with objective -4.
  const auto inc = most_infeasible_dive(node.solver, node.lp);
  REQUIRE(inc.has_value());
  CHECK(*inc == doctest::Approx(-4.0));
  const double db0 = dive_db0(node.solver, node.lp, 0.2);
  CHECK(db0 == doctest::Approx(node.lp.objective + 0.2 * (*inc - node.lp.objective)));
}

TEST_CASE("pseudocost selection is invariant to scaling the pseudocosts") {
  Rng rng(17);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    const auto s = testing::random_node(rng);
    bool clean = true;
    for (int j : s.candidates) {
      const double f = s.lp.x[j] - std::floor(s.lp.x[j]);
      clean = clean && std::min(f, 1.0 - f) > 1e-3;
    }
    if (!clean) continue;
    PseudocostStore a(s.inst.num_vars), b(s.inst.num_vars);
    const double scale = uniform_real(rng, 0.5, 10.0);
    for (int j : s.candidates) {
      for (BranchDir dir : {BranchDir::down, BranchDir::up}) {
        const double gain = uniform_real(rng, 0.1, 5.0);
        a.update(j, dir, 0.0, LpStatus::optimal, gain, 1.0);
        b.update(j, dir, 0.0, LpStatus::optimal, gain * scale, 1.0);
      }
    }
    CHECK(pc_select(s.lp.x, s.candidates, a) == pc_select(s.lp.x, s.candidates, b));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("strong branching is invariant to scaling the objective") {
  Rng rng(23);
  int checked = 0;
  for (int k = 0; k < 1000 && checked < 40; ++k) {
    const auto s = testing::random_node(rng);
    const double scale = uniform_real(rng, 2.0, 10.0);
    MilpInstance scaled = s.inst;
    for (double& c : scaled.objective) c *= scale;
    Node a(s.inst, s.overrides), b(scaled, s.overrides);
    auto ca = a.context(), cb = b.context();
    if (ca.candidates() != cb.candidates()) continue;  // different optimal vertex
    const int ja = sb_select(ca), jb = sb_select(cb);
    // The floor and the infeasibility constant do not scale; only compare
    // nodes where neither matters.
    bool clean = true;
    for (int j : ca.candidates()) {
      for (const ChildProbe* p : {ca.cached_probe(j), cb.cached_probe(j)}) {
        if (!p) continue;
        for (const LpSolution* child : {&p->down, &p->up}) {
          clean = clean && child->optimal() && child->objective - a.lp.objective > 1e-4;
        }
      }
    }
    if (!clean || ca.candidates().size() < 2) continue;
    CHECK(ja == jb);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("every selector returns a candidate on fuzzed nodes") {
  Rng rng(31);
  MostInfeasiblePolicy mi;
  PseudocostPolicy pcp;
  StrongBranchingPolicy sb;
  ActiveConstraintPolicy ac;
  HybridPolicy hy;
  RandomPolicy rnd;
  std::vector<BranchingPolicy*> policies{&mi, &pcp, &sb, &ac, &hy, &rnd};
  for (int k = 0; k < 1000; ++k) {
    const auto s = testing::random_node(rng);
    Node node(s.inst, s.overrides, static_cast<std::uint64_t>(k));
    if (fractional_candidates(node.inst, node.lp.x).empty()) continue;
    hy.reset(node.solver, node.lp);
    for (BranchingPolicy* p : policies) {
      auto ctx = node.context(node.lp.objective);
      const int j = p->select(ctx);
      CHECK(contains(ctx.candidates(), j));
    }
    AcWeights w;
    for (double& v : w) v = uniform01(rng);
    const auto scores = ac_scores(s.inst, node.rows, node.lp.x, s.candidates, w);
    const double cap = w[0] + w[1] + w[2] + w[3];
    for (double v : scores) CHECK((v >= 0.0 && v <= cap + 1e-12));
  }
}
