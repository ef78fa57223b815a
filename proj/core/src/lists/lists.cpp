#include "blended/lists/lists.hpp"

#include <algorithm>

#include "blended/util/error.hpp"

namespace blended::lists {

const char* list_grammar_text() {
  return R"(grammar lists
root L
order right-to-left
nonterminal L list
nonterminal F1 fn
nonterminal P1 fn
nonterminal F2 fn
nonterminal I1 int
nonterminal B1 bool
nonterminal I2 int
builtin map fn list -> list
builtin filter fn list -> list
builtin zipwith fn list list -> list
builtin + int int -> int
builtin * int int -> int
builtin / int int -> int
builtin min int int -> int
builtin max int int -> int
builtin > int int -> bool
builtin or bool bool -> bool
builtin and bool bool -> bool
builtin modzero int int -> bool
rule L (map ?F1 ?L)
rule L (filter ?P1 ?L)
rule L (zipwith ?F2 ?L ?L)
rule L input
rule F1 (lambda (x) ?I1)
rule P1 (lambda (x) ?B1)
rule F2 (lambda (x y) ?I2)
rule I1 (+ ?I1 ?I1)
rule I1 (* ?I1 ?I1)
rule I1 (/ ?I1 ?I1)
rule I1 (min ?I1 ?I1)
rule I1 (max ?I1 ?I1)
rule I1 x
rule I1 -2
rule I1 -1
rule I1 0
rule I1 1
rule I1 2
rule B1 (> ?I1 ?I1)
rule B1 (or ?B1 ?B1)
rule B1 (and ?B1 ?B1)
rule B1 (modzero ?I1 ?I1)
rule I2 (+ ?I2 ?I2)
rule I2 (* ?I2 ?I2)
rule I2 (/ ?I2 ?I2)
rule I2 (min ?I2 ?I2)
rule I2 (max ?I2 ?I2)
rule I2 x
rule I2 y
rule I2 -2
rule I2 -1
rule I2 0
rule I2 1
rule I2 2
)";
}

namespace {

using Args = std::span<const Value>;

BuiltinDef scalar(std::string name, Value (*op)(std::int64_t, std::int64_t)) {
  return BuiltinDef{std::move(name), 2, {}, [op](Args a, const Context&, const Interpreter&) {
                      return op(a[0].as_int(), a[1].as_int());
                    }};
}

}  // namespace

void register_builtins(BuiltinRegistry& r) {
  r.add(BuiltinDef{"map", 2, {}, [](Args a, const Context&, const Interpreter& in) {
                     const Closure& f = a[0].as_closure();
                     IntList out;
                     out.reserve(a[1].as_list().size());
                     for (auto x : a[1].as_list()) {
                       const Value arg[] = {Value(x)};
                       const Value y = in.apply_closure(f, arg);
                       in.check_range(y);
                       out.push_back(y.as_int());
                     }
                     return Value(std::move(out));
                   }});
  r.add(BuiltinDef{"filter", 2, {}, [](Args a, const Context&, const Interpreter& in) {
                     const Closure& f = a[0].as_closure();
                     IntList out;
                     for (auto x : a[1].as_list()) {
                       const Value arg[] = {Value(x)};
                       if (in.apply_closure(f, arg).as_bool()) out.push_back(x);
                     }
                     return Value(std::move(out));
                   }});
  r.add(BuiltinDef{"zipwith", 3, {}, [](Args a, const Context&, const Interpreter& in) {
                     const Closure& f = a[0].as_closure();
                     const IntList& xs = a[1].as_list();
                     const IntList& ys = a[2].as_list();
                     const std::size_t n = std::min(xs.size(), ys.size());
                     IntList out;
                     out.reserve(n);
                     for (std::size_t i = 0; i < n; ++i) {
                       const Value args[] = {Value(xs[i]), Value(ys[i])};
                       const Value y = in.apply_closure(f, args);
                       in.check_range(y);
                       out.push_back(y.as_int());
                     }
                     return Value(std::move(out));
                   }});
  r.add(scalar("+", [](std::int64_t a, std::int64_t b) { return Value(checked_add(a, b)); }));
  r.add(scalar("*", [](std::int64_t a, std::int64_t b) { return Value(checked_mul(a, b)); }));
  r.add(scalar("/", [](std::int64_t a, std::int64_t b) { return Value(checked_div(a, b)); }));
  r.add(scalar("min", [](std::int64_t a, std::int64_t b) { return Value(std::min(a, b)); }));
  r.add(scalar("max", [](std::int64_t a, std::int64_t b) { return Value(std::max(a, b)); }));
  r.add(scalar(">", [](std::int64_t a, std::int64_t b) { return Value(a > b); }));
  r.add(scalar("modzero", [](std::int64_t a, std::int64_t b) { return Value(checked_mod(a, b) == 0); }));
  r.add(BuiltinDef{"or", 2, {}, [](Args a, const Context&, const Interpreter&) {
                     return Value(a[0].as_bool() || a[1].as_bool());
                   }});
  r.add(BuiltinDef{"and", 2, {}, [](Args a, const Context&, const Interpreter&) {
                     return Value(a[0].as_bool() && a[1].as_bool());
                   }});
}

ListDomain::ListDomain(std::int64_t range) : range_(range) {
  if (range <= 0) throw ConfigError("list range must be positive");
  grammar_ = Grammar::parse(list_grammar_text());
  register_builtins(registry_);
}

Context ListDomain::input_context(const Value& input) const { return Context().extend("input", input); }

Spec ListTask::spec() const {
  Spec s{"lists", {}};
  for (std::size_t i = 0; i < inputs.size(); ++i) s.pairs.emplace_back(Value(inputs[i]), Value(outputs[i]));
  return s;
}

ExprPtr sample_lambda(const Grammar& g, int arity, bool predicate, Rng& rng, int body_depth) {
  std::string type;
  if (arity == 1)
    type = predicate ? "P1" : "F1";
  else if (arity == 2 && !predicate)
    type = "F2";
  else
    throw ConfigError("no lambda type for arity " + std::to_string(arity));
  const auto& ids = g.rules_for(type);
  if (ids.empty()) throw ConfigError("grammar has no rules for " + type);
  const Rule& r = g.rule(ids.front());
  return Expr::lambda(type, r.params, sample_expression(g, r.slot_types[0], rng, body_depth));
}

namespace {

ExprPtr pipeline_node(const Grammar& g, int hofs, Rng& rng) {
  if (hofs == 0) return Expr::variable("L", "input");
  const auto pick = uniform_int(rng, 0, 2);
  if (pick == 0)
    return Expr::apply("L", "map", {sample_lambda(g, 1, false, rng), pipeline_node(g, hofs - 1, rng)});
  if (pick == 1)
    return Expr::apply("L", "filter", {sample_lambda(g, 1, true, rng), pipeline_node(g, hofs - 1, rng)});
  const int left = static_cast<int>(uniform_int(rng, 0, hofs - 1));
  ExprPtr f = sample_lambda(g, 2, false, rng);
  ExprPtr a = pipeline_node(g, left, rng);
  ExprPtr b = pipeline_node(g, hofs - 1 - left, rng);
  return Expr::apply("L", "zipwith", {std::move(f), std::move(a), std::move(b)});
}

}  // namespace

ExprPtr sample_pipeline(const Grammar& g, int hofs, Rng& rng) { return pipeline_node(g, hofs, rng); }

bool check_intermediate_range(const Expr& program, const Value& input, std::int64_t r) {
  BuiltinRegistry reg;
  register_builtins(reg);
  const Interpreter in(reg, EvalOptions{r});
  try {
    in.check_range(input);
    in.eval(program, Context().extend("input", input));
    return true;
  } catch (const EvalError&) {
    return false;
  }
}

std::optional<ListTask> make_task(const ExprPtr& program, const std::vector<IntList>& inputs,
                                  const ListDomain& domain) {
  const Interpreter in = domain.interpreter();
  ListTask t;
  t.program = program;
  t.inputs = inputs;
  t.range = domain.range();
  try {
    for (const auto& x : inputs) {
      in.check_range(Value(x));
      t.outputs.push_back(in.eval(*program, domain.input_context(Value(x))).as_list());
    }
  } catch (const EvalError&) {
    return std::nullopt;
  }
  bool identity = true;
  bool constant = true;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    identity = identity && t.outputs[i] == inputs[i];
    constant = constant && t.outputs[i] == t.outputs[0];
  }
  if (identity || constant) return std::nullopt;
  return t;
}

ListTask gen_task(Rng& rng, const ListDomain& domain, const GenOptions& opts) {
  if (opts.range <= 0) throw ConfigError("range must be positive");
  if (opts.range != domain.range()) throw ConfigError("GenOptions range differs from the domain range");
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const int hofs = static_cast<int>(uniform_int(rng, opts.min_hofs, opts.max_hofs));
    ExprPtr program = sample_pipeline(domain.grammar(), hofs, rng);
    std::vector<IntList> inputs(kExamplesPerTask);
    for (auto& x : inputs) {
      x.resize(kInputLength);
      for (auto& v : x) v = uniform_int(rng, -opts.range, opts.range);
    }
    if (auto t = make_task(program, inputs, domain)) return *t;
  }
  throw ConfigError("gen_task: sampling budget exhausted after " + std::to_string(opts.max_attempts) +
                    " attempts");
}

}  // namespace blended::lists
