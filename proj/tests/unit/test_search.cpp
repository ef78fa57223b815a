#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "../support/completions.hpp"
#include "../support/search_fixtures.hpp"
#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/search/search.hpp"
#include "blended/towers/towers.hpp"

using namespace blended;
using testsupport::arith_spec;
using testsupport::StaticPolicy;
using testsupport::ToyDomain;

namespace {

const ArithmeticDomain& arith() {
  static const ArithmeticDomain d;
  return d;
}

std::vector<std::string> pop_order(const std::function<SearchResult(SearchOptions)>& run, long budget) {
  std::vector<std::string> out;
  SearchOptions o;
  o.node_budget = budget;
  o.on_pop = [&](const Sketch& s, double) { out.push_back(print_program(*s.root())); };
  run(o);
  return out;
}

// * 0.1, + 0.3, x 0.3, 1..4 0.075.
StaticPolicy skewed() { return StaticPolicy(arith().grammar(), {0.1, 0.3, 0.3, 0.075, 0.075, 0.075, 0.075}); }

}  // namespace

TEST(Search, PopCostsNondecrease) {
  const auto pol = skewed();
  const UniformPolicy uni(arith().grammar());
  for (const Policy* p : {static_cast<const Policy*>(&pol), static_cast<const Policy*>(&uni)}) {
    SearchOptions o;
    o.node_budget = 3000;
    double last = 0.0;
    long pops = 0;
    o.on_pop = [&](const Sketch& s, double key) {
      EXPECT_GE(key, last - 1e-12);
      EXPECT_NEAR(key, -s.log_prob(), 1e-12);
      last = key;
      ++pops;
    };
    const auto r = best_first(arith(), arith_spec({{0, 1000}, {1, 999}}), *p, o);
    EXPECT_FALSE(r.solved);
    EXPECT_EQ(r.nodes, 3000);
    EXPECT_EQ(pops, 3000);
  }
}

TEST(Search, AstarWithUnitValueMatchesBestFirst) {
  const auto pol = skewed();
  const ConstantValue one(1.0);
  const auto spec = arith_spec({{2, 37}, {0, 5}});
  const auto a = pop_order([&](SearchOptions o) { return best_first(arith(), spec, pol, o); }, 2500);
  const auto b = pop_order([&](SearchOptions o) { return astar(arith(), spec, pol, one, o); }, 2500);
  EXPECT_EQ(a, b);
  EXPECT_GT(a.size(), 100u);
}

TEST(Search, AstarHeuristicIsClamped) {
  const auto pol = skewed();
  const ConstantValue tiny(1e-300);
  SearchOptions o;
  o.node_budget = 50;
  o.on_pop = [&](const Sketch& s, double key) {
    const double h = key + s.log_prob();
    if (s.complete())
      EXPECT_NEAR(h, 0.0, 1e-9);
    else
      EXPECT_NEAR(h, kHeuristicMax, 1e-9);
  };
  astar(arith(), arith_spec({{0, 1000}}), pol, tiny, o);
}

// The first solution popped is the most probable solution of all.
TEST(Search, BestFirstIsOptimal) {
  const auto pol = skewed();
  testsupport::Enumerator en(arith().grammar(), 4);
  for (const auto& spec : {arith_spec({{3, 4}, {0, 1}}), arith_spec({{2, 4}, {3, 9}}), arith_spec({{2, 5}, {0, 1}})}) {
    double best = -1e300;
    for (const auto& p : en.all("E", 3))
      if (arith().check_solution(*p, spec)) best = std::max(best, pol.log_prob(*p));
    // Depth-4 programs have at least 7 nodes, each with probability <= 0.3.
    ASSERT_GT(best, 7 * std::log(0.3));
    SearchOptions o;
    o.node_budget = 200000;
    const auto r = best_first(arith(), spec, pol, o);
    ASSERT_TRUE(r.solved);
    EXPECT_NEAR(pol.log_prob(*r.solution), best, 1e-9) << print_program(*r.solution);
    EXPECT_TRUE(check_solution(arith(), *r.solution, spec));
  }
}

TEST(Search, CompleteOnDepthLimitedTree) {
  const UniformPolicy uni(arith().grammar());
  SearchOptions o;
  o.node_budget = 1000000;
  o.max_depth = 5;
  const auto r = best_first(arith(), arith_spec({{1, 5}, {2, 8}, {0, 2}}), uni, o);
  ASSERT_TRUE(r.solved);
  EXPECT_EQ(r.solution->size(), 5);
  const auto u = best_first(arith(), arith_spec({{1, 500}}), uni, o);
  EXPECT_FALSE(u.solved);
  EXPECT_LT(u.nodes, o.node_budget);
}

TEST(Search, UniformBestFirstIsBreadthFirstByDepth) {
  const UniformPolicy uni(arith().grammar());
  SearchOptions o;
  o.node_budget = 2000;
  int last = 0;
  o.on_pop = [&](const Sketch& s, double) {
    EXPECT_GE(s.steps(), last);
    last = s.steps();
  };
  best_first(arith(), arith_spec({{0, 1000}}), uni, o);
}

TEST(Search, SampleSearchGeometricLaw) {
  const ToyDomain toy;
  const double p = 0.2;
  const StaticPolicy pol(toy.grammar(), {p, 1 - p});
  Spec spec{"toy", {{Value(0), Value(1)}}};
  const int k = 3, trials = 1000;
  int solved = 0;
  for (int i = 0; i < trials; ++i) {
    Rng rng = make_rng(static_cast<std::uint64_t>(i), "geometric");
    SearchOptions o;
    o.sample_budget = k;
    const auto r = sample_search(toy, spec, pol, rng, o);
    EXPECT_LE(r.samples, k);
    if (r.solved) ++solved;
  }
  const double want = 1 - std::pow(1 - p, k);
  const double sigma = std::sqrt(trials * want * (1 - want));
  EXPECT_LE(std::abs(solved - trials * want), 3 * sigma);

  Rng a = make_rng(5, "det"), b = make_rng(5, "det");
  SearchOptions o;
  o.sample_budget = 50;
  const auto ra = sample_search(arith(), arith_spec({{1, 9}}), skewed(), a, o);
  const auto rb = sample_search(arith(), arith_spec({{1, 9}}), skewed(), b, o);
  EXPECT_EQ(ra.samples, rb.samples);
  EXPECT_EQ(ra.solved, rb.solved);
}

TEST(Search, CheckSolutionUsesOccupancy) {
  const towers::TowerDomain tow;
  const auto a = parse_program("[(placeVerticalBlock) (moveHand 4) (placeHorizontalBlock)]", tow.grammar());
  const auto b = parse_program("[(moveHand 4) (placeHorizontalBlock) (reverseHand) (moveHand 4) (placeVerticalBlock)]",
                               tow.grammar());
  const auto spec = tow.spec_for(towers::render(tow.execute(*a), tow.config()));
  EXPECT_TRUE(check_solution(tow, *b, spec));
  const auto bad = parse_program("[(reverseHand) (moveHand 1)]", tow.grammar());
  EXPECT_FALSE(check_solution(tow, *bad, spec));
}

TEST(Search, PruningIsSoundAndSavesNodes) {
  const towers::TowerDomain tow;
  harness::TowerGenOptions go;
  go.motif_pool = 16;
  const auto set = harness::gen_tower_tasks(tow, 0, 12, 3, go);
  const UniformPolicy uni(tow.grammar());
  long pruned = 0;
  for (const auto& t : set.test) {
    SearchOptions base;
    base.node_budget = 4000;
    SearchOptions with = base;
    with.prune = tower_prune(tow, t.spec);
    const auto r0 = best_first(tow, t.spec, uni, base);
    const auto r1 = best_first(tow, t.spec, uni, with);
    pruned += r1.pruned;
    EXPECT_LE(r1.nodes, r0.nodes);
    if (r0.solved) {
      ASSERT_TRUE(r1.solved) << t.id;
      EXPECT_LE(r1.solved_at, r0.solved_at);
    }
  }
  EXPECT_GT(pruned, 0);
  // Also the other direction: a sketch already overshooting is pruned.
  const Sketch over(parse_program("[(placeVerticalBlock) ?S]", tow.grammar()), tow.grammar().order());
  EXPECT_TRUE(prune_hook(tow, over, tow.spec_for(ImageGrid(24, 16))));
}

TEST(Search, SolveRecordsAreMonotone) {
  SearchResult r;
  r.solved = true;
  r.solved_at = 40;
  EXPECT_FALSE(r.solved_within(39));
  EXPECT_TRUE(r.solved_within(40));
  EXPECT_TRUE(r.solved_within(2000));
}
