#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"
#include "blended/util/rng.hpp"

namespace blended::lists {

inline constexpr int kInputLength = 10;
inline constexpr int kExamplesPerTask = 5;

// Register map/filter/zipwith and the scalar lambda primitives.
void register_builtins(BuiltinRegistry& registry);

const char* list_grammar_text();

class ListDomain : public Domain {
 public:
  explicit ListDomain(std::int64_t range = 64);
  std::string name() const override { return "lists"; }
  std::int64_t range() const { return range_; }

  EvalOptions eval_options() const override { return EvalOptions{range_}; }
  Context input_context(const Value& input) const override;
  std::string context_variable() const override { return "input"; }

 private:
  std::int64_t range_;
};

struct ListTask {
  ExprPtr program;  // hidden target
  std::vector<IntList> inputs;
  std::vector<IntList> outputs;
  std::int64_t range = 64;

  Spec spec() const;
};

// Lambda of the requested arity (1: map/filter style, 2: zipwith) with body depth <= 3.
// `predicate` selects a boolean body (filter) for arity 1.
ExprPtr sample_lambda(const Grammar& g, int arity, bool predicate, Rng& rng, int body_depth = 3);

// A pipeline of `hofs` higher-order calls over `input`, lambdas from sample_lambda.
ExprPtr sample_pipeline(const Grammar& g, int hofs, Rng& rng);

// True iff range-instrumented evaluation never leaves [-r, r]; evaluation failures are false.
bool check_intermediate_range(const Expr& program, const Value& input, std::int64_t r);

struct GenOptions {
  std::int64_t range = 64;
  int min_hofs = 2;
  int max_hofs = 3;
  int max_attempts = 100000;
};

// Rejection-samples a task whose target stays in range on all inputs and is
// neither the identity nor a constant function over them.
ListTask gen_task(Rng& rng, const ListDomain& domain, const GenOptions& opts = {});

// Validates a candidate (program, inputs) pair against the task filters; fills outputs on success.
std::optional<ListTask> make_task(const ExprPtr& program, const std::vector<IntList>& inputs,
                                  const ListDomain& domain);

}  // namespace blended::lists
