#include "blended/interp/domain.hpp"

#include <algorithm>

namespace blended {

bool Domain::check_solution(const Expr& program, const Spec& spec) const {
  if (!program.complete()) return false;
  const Interpreter interp = interpreter();
  for (const auto& [input, expected] : spec.pairs) {
    try {
      if (!output_matches(interp.eval(program, input_context(input)), expected)) return false;
    } catch (const EvalError&) {
      return false;
    }
  }
  return true;
}

std::optional<Value> Domain::hole_context_value(const Context& c) const {
  if (const auto* slot = c.find(context_variable()); slot && slot->has_value()) return **slot;
  return std::nullopt;
}

const char* arithmetic_grammar_text() {
  return R"(grammar arithmetic
root E
order left-to-right
nonterminal E int
builtin * int int -> int
builtin + int int -> int
rule E (* ?E ?E)
rule E (+ ?E ?E)
rule E x
rule E 1
rule E 2
rule E 3
rule E 4
)";
}

namespace {

BuiltinDef binary_int(std::string name, std::int64_t (*op)(std::int64_t, std::int64_t)) {
  BuiltinDef d;
  d.name = std::move(name);
  d.arity = 2;
  d.run = [op](std::span<const Value> a, const Context&, const Interpreter&) {
    return Value(op(a[0].as_int(), a[1].as_int()));
  };
  return d;
}

}  // namespace

ArithmeticDomain::ArithmeticDomain() {
  grammar_ = Grammar::parse(arithmetic_grammar_text());
  registry_.add(binary_int("+", checked_add));
  registry_.add(binary_int("*", checked_mul));
  registry_.add(binary_int("/", checked_div));
}

Context ArithmeticDomain::input_context(const Value& input) const { return Context().extend("x", input); }


}  // namespace blended
