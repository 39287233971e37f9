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

#include "l2b/lp.hpp"
#include "l2b/milp.hpp"
#include "oracles.hpp"

using namespace l2b;

namespace {

const char* kKnapsack =
    "MILP v1 knap 2 1 2\n"
    "OBJ -5 -4\n"
    "ROW 0 4 2 0 2 1 3\n"
    "BND 0 0 1\n"
    "BND 1 0 1\n";

}  // namespace

TEST_CASE("parse a single binary variable") {
  const MilpInstance inst = parse_instance("MILP v1 one 1 0 1\nOBJ 1\nBND 0 0 1\n");
  CHECK(inst.num_vars == 1);
  CHECK(inst.num_cons == 0);
  CHECK(inst.num_int == 1);
  CHECK(inst.lower[0] == 0.0);
  CHECK(inst.upper[0] == 1.0);
  CHECK(inst.is_integer(0));
}

TEST_CASE("knapsack file round-trips") {
  const MilpInstance inst = parse_instance(kKnapsack);
  CHECK(inst.num_vars == 2);
  CHECK(inst.matrix.size() == 2);
  CHECK(inst.matrix[1].value == 3.0);
  CHECK(parse_instance(serialize_instance(inst)) == inst);
}

TEST_CASE("inverted bounds name the variable") {
  try {
    parse_instance("MILP v1 bad 1 0 1\nOBJ 1\nBND 0 2 1\n");
    FAIL("expected an error");
  } catch (const InstanceError& e) {
    CHECK(std::string(e.what()).find("bounds of variable 0") != std::string::npos);
  }
}

TEST_CASE("syntax errors carry line numbers") {
  try {
    parse_instance("MILP v1 bad 2 0 2\nOBJ 1 x\n");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_instance("MILP v1 bad 1 1 1\nOBJ 1\nROW 0 1 2 0 1\nBND 0 0 1\n"), ParseError);
  CHECK_THROWS_AS(parse_instance("MILP v1 bad 1 1 1\nOBJ 1\nROW 0 1 1 3 1\nBND 0 0 1\n"), InstanceError);
  CHECK_THROWS_AS(parse_instance("NOPE"), ParseError);
}

TEST_CASE(">= and = rows are normalized to <=") {
  const MilpInstance inst = parse_instance(
      "MILP v1 mixed 2 2 0\nOBJ 1 1\nGEQ 0 1 2 0 1 1 1\nEQ 1 3 1 0 2\nBND 0 -inf inf\nBND 1 0 5\n");
  REQUIRE(inst.num_cons == 3);
  CHECK(inst.rhs == std::vector<double>{-1.0, 3.0, -3.0});
  CHECK(inst.matrix[0] == Triplet{0, 0, -1.0});
  CHECK(inst.matrix[2] == Triplet{1, 0, 2.0});
  CHECK(inst.matrix[3] == Triplet{2, 0, -2.0});
  CHECK(std::isinf(inst.lower[0]));
  CHECK(parse_instance(serialize_instance(inst)) == inst);
}

TEST_CASE("lp_relaxation drops integrality only") {
  const MilpInstance inst = parse_instance(kKnapsack);
  const MilpInstance rel = lp_relaxation(inst);
  CHECK(rel.num_int == 0);
  CHECK(inst.num_int == 2);
  MilpInstance expected = inst;
  expected.num_int = 0;
  CHECK(rel == expected);
  CHECK(lp_relaxation(rel) == rel);
}

TEST_CASE("knapsack relaxation bounds the integer optimum") {
  const MilpInstance inst = parse_instance(kKnapsack);
  const auto milp_opt = oracle::brute_force_milp(inst);
  const auto lp_opt = oracle::vertex_enumeration(oracle::to_dense(lp_relaxation(inst)));
  REQUIRE(milp_opt);
  REQUIRE(lp_opt);
  CHECK(*milp_opt == doctest::Approx(-5.0));
  CHECK(*lp_opt == doctest::Approx(-23.0 / 3.0));
  CHECK(*lp_opt <= *milp_opt);
}

TEST_CASE("generation is deterministic in the seed") {
  for (auto fam : {InstanceFamily::multi_knapsack, InstanceFamily::set_cover, InstanceFamily::item_placement}) {
    InstanceFamilySpec spec{fam, 10, 4, 0.5, 42};
    CHECK(serialize_instance(generate_instance(spec)) == serialize_instance(generate_instance(spec)));
    InstanceFamilySpec other = spec;
    other.seed = 43;
    CHECK(serialize_instance(generate_instance(spec)) != serialize_instance(generate_instance(other)));
  }
}

TEST_CASE("multi-knapsack plants a feasible point") {
  const auto g = generate_instance_with_witness({InstanceFamily::multi_knapsack, 10, 3, 0.6, 7});
  CHECK(g.instance.num_cons == 3);
  CHECK(max_violation(g.instance, g.planted) <= 0.0);
}

TEST_CASE("set-cover rows are coverable") {
  const auto g = generate_instance_with_witness({InstanceFamily::set_cover, 12, 8, 0.2, 1});
  const RowView rows = RowView::build(g.instance);
  for (int i = 0; i < g.instance.num_cons; ++i) CHECK(!rows.cols(i).empty());
  CHECK(max_violation(g.instance, g.planted) <= 0.0);
}

TEST_CASE("item placement is mixed integer with a feasible witness") {
  const auto g = generate_instance_with_witness({InstanceFamily::item_placement, 5, 2, 0.5, 3});
  CHECK(g.instance.num_int == 10);
  CHECK(g.instance.num_vars == 14);
  CHECK(std::isinf(g.instance.upper[13]));
  CHECK(max_violation(g.instance, g.planted) <= 0.0);
}

TEST_CASE("unsupported sizes and families are rejected") {
  CHECK_THROWS_AS(generate_instance({InstanceFamily::set_cover, 0, 3, 0.5, 1}), InstanceError);
  CHECK_THROWS_AS(family_from_string("tsp"), InstanceError);
}

TEST_CASE("property: corpus round-trips and relaxation bounds the optimum") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (auto fam : {InstanceFamily::multi_knapsack, InstanceFamily::set_cover}) {
      const int n = 4 + static_cast<int>(seed % 9);
      const MilpInstance inst = generate_instance({fam, n, 1 + static_cast<int>(seed % 4), 0.5, seed});
      CHECK(parse_instance(serialize_instance(inst)) == inst);
      const auto milp_opt = oracle::brute_force_milp(inst);
      REQUIRE(milp_opt);
      const LpSolution lp = solve_lp(lp_relaxation(inst));
      REQUIRE(lp.optimal());
      CHECK(lp.objective <= *milp_opt + 1e-9);
      ++checked;
    }
  }
  CHECK(checked == 80);
}
