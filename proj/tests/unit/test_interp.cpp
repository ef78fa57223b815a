#include <gtest/gtest.h>

#include <climits>
#include <functional>

#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/lists/lists.hpp"
#include "blended/util/error.hpp"

using namespace blended;

namespace {

const ArithmeticDomain& arith() {
  static const ArithmeticDomain d;
  return d;
}

// Programs as strings with their meaning as a function of x, built bottom-up.
struct Brute {
  std::string text;
  std::function<long long(long long)> f;
};

std::vector<Brute> enumerate(int depth) {
  std::vector<Brute> out = {{"x", [](long long x) { return x; }}};
  for (long long k = 1; k <= 4; ++k) out.push_back({std::to_string(k), [k](long long) { return k; }});
  if (depth == 1) return out;
  const auto sub = enumerate(depth - 1);
  for (const auto& a : sub)
    for (const auto& b : sub) {
      out.push_back({"(* " + a.text + " " + b.text + ")", [fa = a.f, fb = b.f](long long x) { return fa(x) * fb(x); }});
      out.push_back({"(+ " + a.text + " " + b.text + ")", [fa = a.f, fb = b.f](long long x) { return fa(x) + fb(x); }});
    }
  return out;
}

std::int64_t run_arith(const std::string& text, std::int64_t x) {
  return arith().run(*parse_program(text, arith().grammar()), Value(x)).as_int();
}

}  // namespace

TEST(Eval, GoldenValues) {
  EXPECT_EQ(run_arith("(+ (* 2 x) 1)", 3), 7);
  EXPECT_EQ(run_arith("(+ (* 2 x) 1)", 5), 11);
  EXPECT_EQ(run_arith("((lambda (x) (+ x x)) 5)", 0), 10);
}

TEST(Eval, BruteForceOracleDepthThree) {
  const auto all = enumerate(3);
  ASSERT_EQ(all.size(), 6055u);
  std::size_t checked = 0;
  for (const auto& p : all) {
    const auto e = parse_program(p.text, arith().grammar());
    ASSERT_LE(e->depth(), 3);
    for (long long x = -3; x <= 3; ++x) {
      ASSERT_EQ(arith().run(*e, Value(static_cast<std::int64_t>(x))).as_int(), p.f(x)) << p.text << " x=" << x;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 6055u * 7u);
}

TEST(Eval, BetaLaw) {
  const auto& g = arith().grammar();
  Rng rng = make_rng(3, "beta");
  const Interpreter in = arith().interpreter();
  for (int i = 0; i < 500; ++i) {
    const auto body = sample_expression(g, "E", rng, 3);
    const std::int64_t v = uniform_int(rng, -5, 5);
    const std::int64_t outer = uniform_int(rng, -5, 5);
    const auto app = parse_program("((lambda (x) " + print_program(*body) + ") " + std::to_string(v) + ")", g);
    const Context c = Context().extend("x", Value(outer));
    EXPECT_EQ(in.eval(*app, c), in.eval(*body, Context().extend("x", Value(v))));
  }
}

TEST(Eval, PureAndContextUnchanged) {
  const Interpreter in = arith().interpreter();
  const auto e = parse_program("((lambda (x) (* x x)) (+ x 1))", arith().grammar());
  const Context c = Context().extend("x", Value(std::int64_t{4}));
  EXPECT_EQ(in.eval(*e, c).as_int(), 25);
  EXPECT_EQ(in.eval(*e, c).as_int(), 25);
  EXPECT_EQ(c.lookup("x").as_int(), 4);
}

TEST(Eval, ErrorsOnHolesAndUnboundAndNull) {
  const Interpreter in = arith().interpreter();
  EXPECT_THROW(in.eval(*parse_program("(+ ?E 1)", arith().grammar()), Context().extend("x", Value(1))), EvalError);
  EXPECT_THROW(in.eval(*parse_program("x", arith().grammar()), Context()), EvalError);
  EXPECT_THROW(in.eval(*parse_program("x", arith().grammar()), Context().extend("x", std::nullopt)), EvalError);
}

TEST(Context, ShadowingAndNull) {
  const Context a = Context().extend("x", Value(1));
  const Context b = a.extend("x", Value(2));
  EXPECT_EQ(a.lookup("x").as_int(), 1);
  EXPECT_EQ(b.lookup("x").as_int(), 2);
  const Context n = b.extend("y", std::nullopt);
  ASSERT_NE(n.find("y"), nullptr);
  EXPECT_FALSE(n.find("y")->has_value());
  EXPECT_EQ(n.find("z"), nullptr);
  EXPECT_THROW(n.lookup("z"), EvalError);
}

TEST(Builtins, RunAndErrors) {
  const lists::ListDomain lst;
  const Interpreter in = lst.interpreter();
  const Value a[] = {Value(6), Value(1)};
  EXPECT_EQ(in.run_builtin("+", a, Context()).as_int(), 7);
  const Value z[] = {Value(5), Value(0)};
  EXPECT_THROW(in.run_builtin("/", z, Context()), EvalError);
  EXPECT_THROW(in.run_builtin("nope", a, Context()), Error);
  const Value one[] = {Value(5)};
  EXPECT_THROW(in.run_builtin("+", one, Context()), Error);

  const auto succ = in.eval(*parse_program("(lambda (x) (+ x 1))", lst.grammar(), "F1"), Context());
  const Value m[] = {succ, Value(IntList{1, 2, 3})};
  EXPECT_EQ(in.run_builtin("map", m, Context()).as_list(), (IntList{2, 3, 4}));
}

TEST(Closures, Apply) {
  const lists::ListDomain lst;
  const Interpreter in = lst.interpreter();
  const auto dbl = in.eval(*parse_program("(lambda (x) (+ x x))", lst.grammar(), "F1"), Context()).as_closure();
  const Value five[] = {Value(5)};
  EXPECT_EQ(in.apply_closure(dbl, five).as_int(), 10);
  const auto mx = in.eval(*parse_program("(lambda (x y) (max x y))", lst.grammar(), "F2"), Context()).as_closure();
  const Value two[] = {Value(2), Value(-1)};
  EXPECT_EQ(in.apply_closure(mx, two).as_int(), 2);
  const auto id = in.eval(*parse_program("(lambda (x) x)", lst.grammar(), "F1"), Context()).as_closure();
  for (int v : {-7, 0, 13}) {
    const Value arg[] = {Value(v)};
    EXPECT_EQ(in.apply_closure(id, arg).as_int(), v);
  }
  EXPECT_THROW(in.apply_closure(dbl, two), EvalError);
}

TEST(Arithmetic, DivisionConvention) {
  EXPECT_EQ(checked_div(7, 2), 3);
  EXPECT_EQ(checked_div(-7, 2), -3);
  EXPECT_EQ(checked_div(7, -2), -3);
  EXPECT_EQ(checked_mod(-7, 2), -1);
  EXPECT_EQ(checked_mod(7, -2), 1);
  for (std::int64_t a = -20; a <= 20; ++a)
    for (std::int64_t b = -5; b <= 5; ++b)
      if (b != 0) EXPECT_EQ(checked_div(a, b) * b + checked_mod(a, b), a);
  EXPECT_THROW(checked_div(1, 0), EvalError);
  EXPECT_THROW(checked_mod(1, 0), EvalError);
}

TEST(Arithmetic, OverflowIsAnError) {
  EXPECT_THROW(checked_mul(INT64_MAX, 2), EvalError);
  EXPECT_THROW(checked_add(INT64_MAX, 1), EvalError);
  EXPECT_THROW(checked_div(INT64_MIN, -1), EvalError);
}

TEST(Range, InstrumentedEvaluation) {
  const lists::ListDomain lst;
  const Interpreter in(lst.registry(), EvalOptions{64});
  const Value big[] = {Value(9), Value(9)};
  EXPECT_THROW(in.run_builtin("*", big, Context()), RangeError);
  const Value ok[] = {Value(8), Value(8)};
  EXPECT_EQ(in.run_builtin("*", ok, Context()).as_int(), 64);
}
