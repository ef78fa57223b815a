#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/lists/lists.hpp"
#include "blended/util/error.hpp"

using namespace blended;
using namespace blended::lists;

namespace {

const ListDomain& lst() {
  static const ListDomain d;
  return d;
}

IntList run(const std::string& text, const IntList& in) {
  return lst().run(*parse_program(text, lst().grammar()), Value(in)).as_list();
}

// Second evaluator over the AST, written against the grammar only.
struct Ref {
  std::int64_t r;
  bool bad = false;

  std::int64_t chk(std::int64_t v) {
    if (v < -r || v > r) bad = true;
    return v;
  }
  std::int64_t num(const Expr& e, std::int64_t x, std::int64_t y) {
    if (bad) return 0;
    if (e.kind() == NodeKind::Constant) return e.value();
    if (e.kind() == NodeKind::Variable) return e.name() == "x" ? x : y;
    const std::int64_t a = num(e.child(0), x, y), b = num(e.child(1), x, y);
    if (bad) return 0;
    const std::string& f = e.name();
    if (f == "+") return chk(a + b);
    if (f == "*") return chk(a * b);
    if (f == "min") return std::min(a, b);
    if (f == "max") return std::max(a, b);
    if (b == 0) {
      bad = true;
      return 0;
    }
    return chk(a / b);  // C++ truncates toward zero
  }
  bool pred(const Expr& e, std::int64_t x) {
    const std::string& f = e.name();
    if (f == "or") return pred(e.child(0), x) | pred(e.child(1), x);
    if (f == "and") return pred(e.child(0), x) & pred(e.child(1), x);
    const std::int64_t a = num(e.child(0), x, 0), b = num(e.child(1), x, 0);
    if (f == ">") return a > b;
    if (b == 0) {
      bad = true;
      return false;
    }
    return a % b == 0;
  }
  IntList list(const Expr& e, const IntList& input) {
    if (e.kind() == NodeKind::Variable) return input;
    const Expr& body = e.child(0).body();
    IntList out;
    if (e.name() == "map") {
      for (auto v : list(e.child(1), input)) out.push_back(num(body, v, 0));
    } else if (e.name() == "filter") {
      for (auto v : list(e.child(1), input))
        if (pred(body, v)) out.push_back(v);
    } else {
      const IntList b = list(e.child(2), input), a = list(e.child(1), input);
      for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) out.push_back(num(body, a[i], b[i]));
    }
    return out;
  }
};

}  // namespace

TEST(Lists, Examples) {
  EXPECT_EQ(run("(map (lambda (x) (max (+ x 2) (/ x 2))) input)", {4, -4}), (IntList{6, -2}));
  EXPECT_EQ(run("(filter (lambda (x) (modzero x 3)) input)", {1, 3, 6, 7}), (IntList{3, 6}));
  const auto zw = parse_program("(zipwith (lambda (x y) (min x y)) input (map (lambda (x) (+ x 0)) input))",
                                lst().grammar());
  EXPECT_EQ(lst().run(*zw, Value(IntList{1, 5})).as_list(), (IntList{1, 5}));
}

TEST(Lists, ZipwithTruncates) {
  const Interpreter in = lst().interpreter();
  const auto f = in.eval(*parse_program("(lambda (x y) (min x y))", lst().grammar(), "F2"), Context());
  const Value args[] = {f, Value(IntList{1, 5}), Value(IntList{4, 2})};
  EXPECT_EQ(in.run_builtin("zipwith", args, Context()).as_list(), (IntList{1, 2}));
  const Value uneven[] = {f, Value(IntList{1, 5, 9}), Value(IntList{4})};
  EXPECT_EQ(in.run_builtin("zipwith", uneven, Context()).as_list(), (IntList{1}));
}

TEST(Lists, MatchesReferenceEvaluator) {
  Rng rng = make_rng(21, "ref");
  int agreed = 0, failed = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_pipeline(lst().grammar(), static_cast<int>(uniform_int(rng, 1, 3)), rng);
    IntList in(kInputLength);
    for (auto& v : in) v = uniform_int(rng, -64, 64);
    Ref ref{64};
    const IntList want = ref.list(*p, in);
    bool ok = true;
    IntList got;
    try {
      got = lst().run(*p, Value(in)).as_list();
    } catch (const EvalError&) {
      ok = false;
    }
    ASSERT_EQ(ok, !ref.bad) << print_program(*p);
    if (ok) {
      ASSERT_EQ(got, want) << print_program(*p);
      ++agreed;
    } else {
      ++failed;
    }
    EXPECT_EQ(check_intermediate_range(*p, Value(in), 64), ok);
  }
  EXPECT_GT(agreed, 1000);
  EXPECT_GT(failed, 0);
}

TEST(Lists, LengthLaws) {
  Rng rng = make_rng(4, "len");
  for (int i = 0; i < 2000; ++i) {
    IntList in(static_cast<std::size_t>(uniform_int(rng, 0, 12)));
    for (auto& v : in) v = uniform_int(rng, -8, 8);
    const auto f = sample_lambda(lst().grammar(), 1, false, rng, 2);
    const auto pr = sample_lambda(lst().grammar(), 1, true, rng, 2);
    const auto z = sample_lambda(lst().grammar(), 2, false, rng, 2);
    const std::string m = "(map " + print_program(*f) + " input)";
    const std::string fl = "(filter " + print_program(*pr) + " input)";
    const std::string zw = "(zipwith " + print_program(*z) + " input " + fl + ")";
    try {
      EXPECT_EQ(run(m, in).size(), in.size());
    } catch (const EvalError&) {
    }
    try {
      const auto kept = run(fl, in);
      EXPECT_LE(kept.size(), in.size());
      EXPECT_EQ(run(zw, in).size(), std::min(in.size(), kept.size()));
    } catch (const EvalError&) {
    }
  }
}

TEST(Lists, SampledLambdas) {
  Rng rng = make_rng(8, "lam");
  bool saw_y = false;
  for (int i = 0; i < 1000; ++i) {
    const int arity = i % 2 ? 2 : 1;
    const auto l = sample_lambda(lst().grammar(), arity, arity == 1 && i % 4 == 0, rng);
    EXPECT_LE(l->body().depth(), 3);
    const std::string type = arity == 2 ? "F2" : (i % 4 == 0 ? "P1" : "F1");
    EXPECT_NO_THROW(check_types(*l, lst().grammar(), type));
    const auto fv = free_variables(l->body());
    for (const auto& v : fv) {
      EXPECT_TRUE(v == "x" || (arity == 2 && v == "y")) << print_program(*l);
      saw_y = saw_y || v == "y";
    }
  }
  EXPECT_TRUE(saw_y);
}

TEST(Lists, IntermediateRange) {
  const auto sq = parse_program("(map (lambda (x) (* x x)) input)", lst().grammar());
  EXPECT_TRUE(check_intermediate_range(*sq, Value(IntList{8, 1}), 64));
  EXPECT_FALSE(check_intermediate_range(*sq, Value(IntList{9, 1}), 64));
  const auto dz = parse_program("(map (lambda (x) (/ x 0)) input)", lst().grammar());
  EXPECT_FALSE(check_intermediate_range(*dz, Value(IntList{1}), 64));
  // Intermediate 81 even though the output is small.
  const auto mid = parse_program("(map (lambda (x) (/ (* x x) 64)) input)", lst().grammar());
  EXPECT_FALSE(check_intermediate_range(*mid, Value(IntList{9}), 64));
}

TEST(Lists, TaskFilters) {
  std::vector<IntList> ins;
  Rng rng = make_rng(2, "filters");
  for (int i = 0; i < kExamplesPerTask; ++i) {
    IntList l(kInputLength);
    for (auto& v : l) v = uniform_int(rng, -30, 30);
    ins.push_back(l);
  }
  auto mk = [&](const std::string& t) { return make_task(parse_program(t, lst().grammar()), ins, lst()); };
  EXPECT_FALSE(mk("(map (lambda (x) (+ x 0)) (filter (lambda (x) (> 99 x)) input))"));
  EXPECT_FALSE(mk("(map (lambda (x) 0) (map (lambda (x) x) input))"));
  ins[0][0] = 35;
  EXPECT_FALSE(mk("(map (lambda (x) (+ x 1)) (map (lambda (x) (+ x x)) input))"));
  EXPECT_TRUE(mk("(map (lambda (x) (+ x 1)) (map (lambda (x) (/ x 2)) input))"));
}

TEST(Lists, GeneratedTasksSatisfyInvariants) {
  Rng rng = make_rng(13, "gen");
  for (int i = 0; i < 200; ++i) {
    const auto t = gen_task(rng, lst());
    ASSERT_EQ(t.inputs.size(), static_cast<std::size_t>(kExamplesPerTask));
    bool identity = true;
    std::set<IntList> outs;
    for (std::size_t k = 0; k < t.inputs.size(); ++k) {
      EXPECT_EQ(t.inputs[k].size(), static_cast<std::size_t>(kInputLength));
      for (auto v : t.inputs[k]) EXPECT_LE(std::abs(v), 64);
      EXPECT_EQ(lst().run(*t.program, Value(t.inputs[k])).as_list(), t.outputs[k]);
      EXPECT_TRUE(check_intermediate_range(*t.program, Value(t.inputs[k]), 64));
      identity = identity && t.inputs[k] == t.outputs[k];
      outs.insert(t.outputs[k]);
    }
    EXPECT_FALSE(identity);
    EXPECT_GT(outs.size(), 1u);
    EXPECT_TRUE(lst().check_solution(*t.program, t.spec()));
    std::function<int(const Expr&)> hofs_in = [&](const Expr& e) {
      if (e.kind() != NodeKind::Apply) return 0;
      int n = 1;
      for (std::size_t k = 1; k < e.children().size(); ++k) n += hofs_in(e.child(k));
      return n;
    };
    const int hofs = hofs_in(*t.program);
    EXPECT_GE(hofs, 2);
    EXPECT_LE(hofs, 3);
  }
}

TEST(Lists, GenerationIsReproducibleAndSplitsDisjoint) {
  const auto a = harness::gen_list_tasks(lst(), 300, 50, 9);
  const auto b = harness::gen_list_tasks(lst(), 300, 50, 9);
  std::set<std::string> test;
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    EXPECT_EQ(print_program(*a.test[i].program), print_program(*b.test[i].program));
    test.insert(print_program(*a.test[i].program));
  }
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(harness::task_to_json(a.train[i]), harness::task_to_json(b.train[i]));
    EXPECT_EQ(test.count(print_program(*a.train[i].program)), 0u);
  }
}
