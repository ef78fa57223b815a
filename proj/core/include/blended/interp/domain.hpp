#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blended/interp/interpreter.hpp"
#include "blended/interp/value.hpp"
#include "blended/lang/grammar.hpp"

namespace blended {

// Task specification: input/output pairs. Tower tasks carry one pair whose
// input is the initial machine state and whose output is the target image.
struct Spec {
  std::string domain;
  std::vector<std::pair<Value, Value>> pairs;
};

// A DSL: grammar, builtin registry, and how programs meet specs.
class Domain {
 public:
  virtual ~Domain() = default;

  virtual std::string name() const = 0;
  const Grammar& grammar() const { return grammar_; }
  const BuiltinRegistry& registry() const { return registry_; }
  Interpreter interpreter() const { return Interpreter(registry_, eval_options()); }
  virtual EvalOptions eval_options() const { return {}; }

  // Evaluation context for one spec input.
  virtual Context input_context(const Value& input) const = 0;
  // Variable whose value a hole's placeholder module conditions on: the
  // machine state (towers) or the task input (lists).
  virtual std::string context_variable() const = 0;
  // Its concrete value in `c`, if bound and non-null.
  std::optional<Value> hole_context_value(const Context& c) const;

  // Runs a complete program on one input.
  Value run(const Expr& program, const Value& input) const {
    return interpreter().eval(program, input_context(input));
  }
  // Does `output` (the program's result) match the expected value?
  virtual bool output_matches(const Value& output, const Value& expected) const {
    return output == expected;
  }
  // Exact solution check; evaluation failures count as "no".
  bool check_solution(const Expr& program, const Spec& spec) const;

 protected:
  Grammar grammar_;
  BuiltinRegistry registry_;
};

// The arithmetic toy DSL: E -> E*E | E+E | x | 1 | 2 | 3 | 4.
class ArithmeticDomain : public Domain {
 public:
  ArithmeticDomain();
  std::string name() const override { return "arith"; }
  Context input_context(const Value& input) const override;
  std::string context_variable() const override { return "x"; }
};

const char* arithmetic_grammar_text();

}  // namespace blended
