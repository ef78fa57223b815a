#include "blended/interp/interpreter.hpp"

#include <limits>

#include "blended/lang/syntax.hpp"

namespace blended {

void BuiltinRegistry::add(BuiltinDef def) {
  if (!def.modes.empty() && static_cast<int>(def.modes.size()) != def.arity)
    throw ConfigError("builtin " + def.name + ": argument modes do not match arity");
  const std::string name = def.name;
  defs_[name] = std::move(def);
}

const BuiltinDef* BuiltinRegistry::find(const std::string& name) const {
  auto it = defs_.find(name);
  return it == defs_.end() ? nullptr : &it->second;
}

const BuiltinDef& BuiltinRegistry::get(const std::string& name) const {
  if (const auto* d = find(name)) return *d;
  throw EvalError("unregistered builtin " + name);
}

Interpreter::Interpreter(const BuiltinRegistry& registry, EvalOptions options)
    : registry_(registry), options_(options) {}

Context Interpreter::argument_context(const BuiltinDef& def, std::size_t index, const Context& c,
                                      const Value* previous) const {
  if (def.mode(index) == ArgMode::ThreadState && index > 0 && previous)
    return c.extend(registry_.state_variable(), *previous);
  return c;
}

Closure Interpreter::defer(const ExprPtr& arg, const Context& c) const {
  return Closure{{registry_.state_variable()}, arg, c};
}

Value Interpreter::eval(const Expr& e, const Context& c) const {
  switch (e.kind()) {
    case NodeKind::Constant:
      return Value(e.value());
    case NodeKind::Variable:
      return c.lookup(e.name());
    case NodeKind::Hole:
      throw EvalError("cannot execute a hole of type " + e.type());
    case NodeKind::Lambda:
      return Value(Closure{e.params(), e.children()[0], c});
    case NodeKind::Apply:
      break;
  }
  if (e.is_call()) {
    const Value fn = eval(e.child(0), c);
    std::vector<Value> args;
    args.reserve(e.children().size() - 1);
    for (std::size_t i = 1; i < e.children().size(); ++i) args.push_back(eval(e.child(i), c));
    return apply_closure(fn.as_closure(), args);
  }
  const BuiltinDef& def = registry_.get(e.name());
  if (static_cast<int>(e.children().size()) != def.arity)
    throw EvalError("builtin " + e.name() + " expects " + std::to_string(def.arity) + " arguments");
  std::vector<Value> args;
  args.reserve(e.children().size());
  for (std::size_t i = 0; i < e.children().size(); ++i) {
    if (def.mode(i) == ArgMode::Deferred) {
      if (!e.child(i).complete()) throw EvalError("cannot execute a hole of type " + e.child(i).type());
      args.push_back(Value(defer(e.children()[i], c)));
      continue;
    }
    const Context ac = argument_context(def, i, c, i > 0 ? &args.back() : nullptr);
    args.push_back(eval(e.child(i), ac));
  }
  return run_builtin(e.name(), args, c);
}

Value Interpreter::run_builtin(const std::string& name, std::span<const Value> args, const Context& c) const {
  const BuiltinDef& def = registry_.get(name);
  if (static_cast<int>(args.size()) != def.arity)
    throw EvalError("builtin " + name + " expects " + std::to_string(def.arity) + " arguments, got " +
                    std::to_string(args.size()));
  Value out = def.run(args, c, *this);
  check_range(out);
  return out;
}

Value Interpreter::apply_closure(const Closure& f, std::span<const Value> args) const {
  if (args.size() != f.params.size())
    throw EvalError("closure expects " + std::to_string(f.params.size()) + " arguments, got " +
                    std::to_string(args.size()));
  Context c = f.env;
  for (std::size_t i = 0; i < args.size(); ++i) c = c.extend(f.params[i], args[i]);
  return eval(*f.body, c);
}

void Interpreter::check_range(const Value& v) const {
  if (!options_.int_range) return;
  const std::int64_t r = *options_.int_range;
  auto bad = [r](std::int64_t x) { return x < -r || x > r; };
  if (v.is_int() && bad(v.as_int()))
    throw RangeError("value " + std::to_string(v.as_int()) + " outside [-" + std::to_string(r) + ", " +
                     std::to_string(r) + "]");
  if (v.is_list())
    for (auto x : v.as_list())
      if (bad(x))
        throw RangeError("list element " + std::to_string(x) + " outside [-" + std::to_string(r) + ", " +
                         std::to_string(r) + "]");
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw EvalError("integer overflow in addition");
  return out;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw EvalError("integer overflow in multiplication");
  return out;
}

std::int64_t checked_div(std::int64_t a, std::int64_t b) {
  if (b == 0) throw EvalError("division by zero");
  if (a == std::numeric_limits<std::int64_t>::min() && b == -1) throw EvalError("integer overflow in division");
  return a / b;
}

std::int64_t checked_mod(std::int64_t a, std::int64_t b) {
  if (b == 0) throw EvalError("modulo by zero");
  if (b == -1) return 0;
  return a % b;
}

}  // namespace blended
