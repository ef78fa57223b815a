#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blended/interp/value.hpp"
#include "blended/lang/expression.hpp"
#include "blended/util/error.hpp"

namespace blended {

class Interpreter;

// How an argument of a builtin is evaluated before the builtin runs.
//  Value:       ordinary call-by-value in the caller's context.
//  ThreadState: call-by-value in the caller's context with the registry's
//               state variable rebound to the previous argument's value.
//  Deferred:    not evaluated; passed as a closure over the state variable.
enum class ArgMode { Value, ThreadState, Deferred };

struct BuiltinDef {
  using Fn = std::function<Value(std::span<const Value>, const Context&, const Interpreter&)>;
  std::string name;
  int arity = 0;
  std::vector<ArgMode> modes;  // empty means all Value
  Fn run;

  ArgMode mode(std::size_t i) const { return modes.empty() ? ArgMode::Value : modes[i]; }
};

class BuiltinRegistry {
 public:
  void add(BuiltinDef def);
  const BuiltinDef* find(const std::string& name) const;
  const BuiltinDef& get(const std::string& name) const;
  const std::map<std::string, BuiltinDef>& all() const { return defs_; }

  // Name of the implicit machine-state variable used by ThreadState/Deferred arguments.
  const std::string& state_variable() const { return state_var_; }
  void set_state_variable(std::string name) { state_var_ = std::move(name); }

 private:
  std::map<std::string, BuiltinDef> defs_;
  std::string state_var_ = "$state";
};

// Integer range violation under range-instrumented evaluation.
class RangeError : public EvalError {
 public:
  using EvalError::EvalError;
};

struct EvalOptions {
  // When set, every builtin result whose ints fall outside [-r, r] is an error.
  std::optional<std::int64_t> int_range;
};

class Interpreter {
 public:
  explicit Interpreter(const BuiltinRegistry& registry, EvalOptions options = {});

  // Concrete semantics. Throws EvalError on holes, unbound/null variables and runtime faults.
  Value eval(const Expr& e, const Context& c) const;
  Value run_builtin(const std::string& name, std::span<const Value> args, const Context& c) const;
  Value apply_closure(const Closure& f, std::span<const Value> args) const;

  // Context in which argument `index` of a builtin is evaluated, given the
  // already-computed previous argument (only consulted for ThreadState).
  Context argument_context(const BuiltinDef& def, std::size_t index, const Context& c,
                           const Value* previous) const;
  Closure defer(const ExprPtr& arg, const Context& c) const;
  void check_range(const Value& v) const;

  const BuiltinRegistry& registry() const { return registry_; }
  const EvalOptions& options() const { return options_; }

 private:
  const BuiltinRegistry& registry_;
  EvalOptions options_;
};

// Overflow-checked integer helpers shared by the domains.
std::int64_t checked_add(std::int64_t a, std::int64_t b);
std::int64_t checked_mul(std::int64_t a, std::int64_t b);
// Truncates toward zero.
std::int64_t checked_div(std::int64_t a, std::int64_t b);
// Remainder with the sign of the dividend, matching checked_div.
std::int64_t checked_mod(std::int64_t a, std::int64_t b);

}  // namespace blended
