#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blended/lang/expression.hpp"
#include "blended/lang/grammar.hpp"
#include "blended/util/rng.hpp"

namespace blended {

// Expansion of the cursor hole by a grammar rule.
struct Action {
  int rule = 0;
  int hole = 0;  // index of the cursor in pre-order hole numbering
  bool operator==(const Action&) const = default;
};

// Partial program plus its hole-filling discipline. Immutable.
class Sketch {
 public:
  Sketch() = default;
  Sketch(ExprPtr root, HoleOrder order, double log_prob = 0.0, int steps = 0);

  // "?root" for the grammar.
  static Sketch initial(const Grammar& g);

  const ExprPtr& root() const { return root_; }
  HoleOrder order() const { return order_; }
  double log_prob() const { return log_prob_; }
  int steps() const { return steps_; }
  int hole_count() const { return root_->hole_count(); }
  bool complete() const { return root_->complete(); }

  // Hole paths in fill order (left-to-right pre-order, or its reverse).
  std::vector<Path> holes_in_order() const;
  // Index (in pre-order numbering) of the next hole to fill; -1 when complete.
  int cursor_index() const;
  Path cursor_path() const;
  const Expr& cursor() const;

 private:
  ExprPtr root_;
  HoleOrder order_ = HoleOrder::LeftToRight;
  double log_prob_ = 0.0;
  int steps_ = 0;
};

// Every rule for the cursor hole's type, in declaration order.
std::vector<Action> expansions(const Sketch& s, const Grammar& g);

Sketch apply_action(const Sketch& s, const Action& a, const Grammar& g, double log_prob = 0.0);

// The action sequence that builds `program` from "?root" under `g`'s fill order.
std::vector<Action> derive_actions(const ExprPtr& program, const Grammar& g);

// Samples a hole-free program of the given type. Rules are drawn proportionally
// to weight; once the remaining depth cannot fit a rule's minimal derivation,
// only rules that fit (or, failing that, the shallowest rules) are eligible.
ExprPtr sample_expression(const Grammar& g, const std::string& type, Rng& rng, int max_depth);
ExprPtr sample_program(const Grammar& g, std::uint64_t seed, int max_depth);

}  // namespace blended
