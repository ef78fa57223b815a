#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/lists/lists.hpp"
#include "blended/towers/towers.hpp"
#include "blended/util/error.hpp"

using namespace blended;

namespace {

const ArithmeticDomain& arith() {
  static const ArithmeticDomain d;
  return d;
}
const towers::TowerDomain& tow() {
  static const towers::TowerDomain d;
  return d;
}
const lists::ListDomain& lst() {
  static const lists::ListDomain d;
  return d;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParseError::Kind parse_error_kind(const std::string& text, const Grammar& g) {
  try {
    parse_program(text, g);
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no parse error for " << text;
  return ParseError::Kind::Syntax;
}

}  // namespace

TEST(Parse, CanonicalRoundTrip) {
  for (const char* text : {"(+ (* 2 x) 1)", "(+ ?E ?E)", "?E", "x"}) {
    const auto e = parse_program(text, arith().grammar());
    EXPECT_EQ(print_program(*e), text);
  }
  const auto t = parse_program("(seq (loop 4 (seq (placeVerticalBlock) (seq (moveHand ?n) (done)))) ?P)",
                               tow().grammar());
  EXPECT_EQ(count_holes(*t), 2);
}

TEST(Parse, BracketSugarExpandsToSeq) {
  const auto a = parse_program("[(placeVerticalBlock) (moveHand 2)]", tow().grammar());
  EXPECT_EQ(print_program(*a), "(seq (placeVerticalBlock) (seq (moveHand 2) (done)))");
}

TEST(Parse, Errors) {
  EXPECT_EQ(parse_error_kind("(+ 1)", arith().grammar()), ParseError::Kind::ArityMismatch);
  EXPECT_EQ(parse_error_kind("(+ 1 2 3)", arith().grammar()), ParseError::Kind::ArityMismatch);
  EXPECT_EQ(parse_error_kind("(foo 1 2)", arith().grammar()), ParseError::Kind::UnknownSymbol);
  EXPECT_EQ(parse_error_kind("(+ 1 2", arith().grammar()), ParseError::Kind::Syntax);
  EXPECT_EQ(parse_error_kind("(map input input)", lst().grammar()), ParseError::Kind::TypeMismatch);
}

TEST(Parse, ErrorPositionPointsAtOffendingToken) {
  try {
    parse_program("(+ 1 (foo 2))", arith().grammar());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 6u);
  }
}

TEST(Holes, Count) {
  EXPECT_EQ(count_holes(*parse_program("(+ 1 2)", arith().grammar())), 0);
  EXPECT_EQ(count_holes(*parse_program("(+ ?E ?E)", arith().grammar())), 2);
  EXPECT_EQ(count_holes(*parse_program("?E", arith().grammar())), 1);
}

TEST(Sketch, ArithmeticExpansions) {
  const Sketch s = Sketch::initial(arith().grammar());
  const auto acts = expansions(s, arith().grammar());
  ASSERT_EQ(acts.size(), 7u);
  std::vector<std::string> got;
  for (const auto& a : acts) got.push_back(print_program(*apply_action(s, a, arith().grammar()).root()));
  EXPECT_EQ(got, (std::vector<std::string>{"(* ?E ?E)", "(+ ?E ?E)", "x", "1", "2", "3", "4"}));
}

TEST(Sketch, TowerIntegerHoleHasEightExpansions) {
  const auto& g = tow().grammar();
  const Sketch s(parse_program("(seq (moveHand ?n) ?P)", g), g.order());
  EXPECT_EQ(expansions(s, g).size(), 8u);
  EXPECT_EQ(s.cursor().type(), "n");
}

TEST(Sketch, LeftToRightFill) {
  const auto& g = arith().grammar();
  Sketch s = Sketch::initial(g);
  s = apply_action(s, {g.rules_for("E")[1], 0}, g);
  EXPECT_EQ(print_program(*s.root()), "(+ ?E ?E)");
  s = apply_action(s, {g.rules_for("E")[3], 0}, g);
  EXPECT_EQ(print_program(*s.root()), "(+ 1 ?E)");
  EXPECT_EQ(s.steps(), 2);
}

TEST(Sketch, RightToLeftFillExpandsRightmostHole) {
  const auto& g = lst().grammar();
  const Sketch s(parse_program("(zipwith ?F2 ?L ?L)", g), g.order());
  EXPECT_EQ(s.cursor_index(), 2);
  int input_rule = -1;
  for (int r : g.rules_for("L"))
    if (g.rule(r).kind == NodeKind::Variable) input_rule = r;
  const Sketch t = apply_action(s, {input_rule, 2}, g);
  EXPECT_EQ(print_program(*t.root()), "(zipwith ?F2 ?L input)");
  EXPECT_THROW(apply_action(s, {input_rule, 1}, g), Error);
}

TEST(Sketch, ApplyRejectsWrongType) {
  const auto& g = tow().grammar();
  const Sketch s = Sketch::initial(g);
  EXPECT_THROW(apply_action(s, {g.rules_for("n")[0], 0}, g), Error);
}

TEST(Sketch, HoleBookkeepingAndTyping) {
  const Domain* doms[] = {&arith(), &tow(), &lst()};
  for (const Domain* d : doms) {
    const auto& g = d->grammar();
    Rng rng = make_rng(11, "walk", fnv1a(d->name()));
    for (int trial = 0; trial < 200; ++trial) {
      Sketch s = Sketch::initial(g);
      for (int step = 0; step < 40 && !s.complete(); ++step) {
        const auto acts = expansions(s, g);
        ASSERT_FALSE(acts.empty());
        const auto& a = acts[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(acts.size()) - 1))];
        const Sketch t = apply_action(s, a, g);
        EXPECT_EQ(t.hole_count(), s.hole_count() - 1 + g.rule(a.rule).slots());
        EXPECT_TRUE(well_typed(*t.root(), g)) << print_program(*t.root());
        s = t;
      }
    }
  }
}

TEST(Sketch, ReplayOfDerivedActionsRebuildsProgram) {
  const Domain* doms[] = {&arith(), &tow(), &lst()};
  for (const Domain* d : doms) {
    const auto& g = d->grammar();
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto p = sample_program(g, seed, 5);
      Sketch s = Sketch::initial(g);
      for (const auto& a : derive_actions(p, g)) s = apply_action(s, a, g);
      ASSERT_TRUE(s.complete());
      EXPECT_TRUE(equal(*s.root(), *p)) << print_program(*p);
      EXPECT_EQ(static_cast<int>(derive_actions(p, g).size()), p->size());
    }
  }
}

TEST(Sample, DepthOneGivesTerminal) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = sample_program(arith().grammar(), seed, 1);
    const std::string t = print_program(*p);
    EXPECT_TRUE(t == "x" || t == "1" || t == "2" || t == "3" || t == "4") << t;
  }
}

TEST(Sample, DeterministicAndComplete) {
  const Domain* doms[] = {&arith(), &tow(), &lst()};
  for (const Domain* d : doms)
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto a = sample_program(d->grammar(), seed, 6);
      const auto b = sample_program(d->grammar(), seed, 6);
      EXPECT_TRUE(equal(*a, *b));
      EXPECT_EQ(count_holes(*a), 0);
      EXPECT_TRUE(equal(*parse_program(print_program(*a), d->grammar()), *a));
    }
}

TEST(Sample, DepthCapRespected) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) EXPECT_LE(sample_program(arith().grammar(), seed, 4)->depth(), 4);
}

// Top-level rule frequencies against PCFG weights: every rule within 3 sigma.
void check_frequencies(Grammar g, const std::map<int, double>& weights) {
  for (const auto& [r, w] : weights) g.set_weight(r, w);
  double total = 0.0;
  for (int r : g.rules_for("E")) total += g.rule(r).weight;
  std::map<int, int> counts;
  const int n = 10000;
  Rng rng = make_rng(5, "pcfg");
  for (int i = 0; i < n; ++i) {
    const auto p = sample_expression(g, "E", rng, 4);
    for (int r : g.rules_for("E"))
      if (g.rule(r).matches(*p)) ++counts[r];
  }
  for (int r : g.rules_for("E")) {
    const double p = g.rule(r).weight / total;
    const double sigma = std::sqrt(n * p * (1 - p));
    EXPECT_LE(std::abs(counts[r] - n * p), 3 * sigma) << g.rule(r).text();
  }
}

TEST(Sample, TopLevelFrequenciesMatchWeights) {
  const auto& g = arith().grammar();
  check_frequencies(g, {});
  const auto& e = g.rules_for("E");
  check_frequencies(g, {{e[0], 3.0}, {e[2], 0.5}, {e[6], 2.0}});
}

TEST(Grammar, WeightsFromText) {
  Grammar g = arith().grammar();
  const auto h0 = g.hash();
  g.apply_weights("E (* ?E ?E) : 4\nE x : 0.25\n");
  EXPECT_DOUBLE_EQ(g.rule(g.rules_for("E")[0]).weight, 4.0);
  EXPECT_DOUBLE_EQ(g.rule(g.rules_for("E")[2]).weight, 0.25);
  EXPECT_NE(g.hash(), h0);
  EXPECT_THROW(g.apply_weights("E (- ?E ?E) : 1\n"), ConfigError);
}

TEST(Grammar, RejectsMissingTerminal) {
  EXPECT_THROW(Grammar::parse("grammar bad\nroot E\nnonterminal E int\nbuiltin + int int -> int\nrule E (+ ?E ?E)\n"),
               ConfigError);
}

TEST(Grammar, ShippedFilesMatchBuiltInGrammars) {
  const std::string dir = std::string(BLENDED_SOURCE_DIR) + "/grammars/";
  EXPECT_EQ(Grammar::parse(read_file(dir + "arithmetic.grammar")).hash(), arith().grammar().hash());
  EXPECT_EQ(Grammar::parse(read_file(dir + "towers.grammar")).hash(), tow().grammar().hash());
  EXPECT_EQ(Grammar::parse(read_file(dir + "lists.grammar")).hash(), lst().grammar().hash());
}

TEST(Expr, ReplaceAndFreeVariables) {
  const auto& g = lst().grammar();
  const auto e = parse_program("(map (lambda (x) (+ x ?I1)) input)", g);
  const auto paths = hole_paths(*e);
  ASSERT_EQ(paths.size(), 1u);
  const auto filled = replace_at(e, paths[0], parse_program("x", g, "I1"));
  EXPECT_EQ(print_program(*filled), "(map (lambda (x) (+ x x)) input)");
  EXPECT_EQ(print_program(*e), "(map (lambda (x) (+ x ?I1)) input)");
  EXPECT_EQ(free_variables(*filled), std::vector<std::string>{"input"});
}
