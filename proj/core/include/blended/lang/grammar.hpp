#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blended/lang/expression.hpp"

namespace blended {

enum class HoleOrder { LeftToRight, RightToLeft };

struct BuiltinSignature {
  std::string name;
  std::vector<std::string> arg_types;  // semantic types
  std::string return_type;
  int arity() const { return static_cast<int>(arg_types.size()); }
};

// One production `lhs -> template`. Template children are always typed slots,
// so a rule contributes exactly one AST node plus `slot_types.size()` new holes.
struct Rule {
  int id = 0;
  std::string lhs;
  NodeKind kind = NodeKind::Constant;
  std::string head;                  // builtin or variable name
  std::int64_t value = 0;            // constant rules
  std::vector<std::string> params;   // lambda rules
  std::vector<std::string> slot_types;
  double weight = 1.0;
  ExprPtr tmpl;

  int slots() const { return static_cast<int>(slot_types.size()); }
  bool terminal() const { return slot_types.empty(); }
  // Does the root node of `e` come from this rule (ignoring its children)?
  bool matches(const Expr& e) const;
  std::string text() const;
};

// Cons/nil pair used for `[a b c]` bracket sugar in program text.
struct SequenceSugar {
  std::string cons;
  std::string nil;
};

class Grammar {
 public:
  // Parses the grammar definition format (see grammars/*.grammar).
  static Grammar parse(std::string_view text);

  const std::string& name() const { return name_; }
  const std::string& root_type() const { return root_; }
  HoleOrder order() const { return order_; }
  const std::vector<Rule>& rules() const { return rules_; }
  const Rule& rule(int id) const { return rules_.at(static_cast<std::size_t>(id)); }
  int rule_count() const { return static_cast<int>(rules_.size()); }

  // Rule ids for a nonterminal in declaration order. Empty for unknown types.
  const std::vector<int>& rules_for(const std::string& type) const;
  bool has_type(const std::string& type) const { return semantic_.count(type) > 0; }
  const std::string& semantic_type(const std::string& type) const;
  const std::map<std::string, std::string>& nonterminals() const { return semantic_; }
  const std::vector<std::string>& type_order() const { return type_order_; }

  const BuiltinSignature* builtin(const std::string& name) const;
  const std::map<std::string, BuiltinSignature>& builtins() const { return builtins_; }
  const std::optional<SequenceSugar>& sequence_sugar() const { return sugar_; }

  // Minimal derivation height of a hole of this type (terminal rule = 1);
  // negative when the type has no finite derivation.
  int min_height(const std::string& type) const;
  int min_height(const Rule& r) const;

  // Overrides weights from lines "<lhs> <template> : <weight>".
  void apply_weights(std::string_view text);
  void set_weight(int rule_id, double w);

  // Stable content hash (rules, types, weights).
  std::uint64_t hash() const;
  std::string to_text() const;

 private:
  void index();
  void validate() const;

  std::string name_ = "grammar";
  std::string root_;
  HoleOrder order_ = HoleOrder::LeftToRight;
  std::map<std::string, std::string> semantic_;
  std::vector<std::string> type_order_;
  std::map<std::string, BuiltinSignature> builtins_;
  std::vector<Rule> rules_;
  std::map<std::string, std::vector<int>> by_type_;
  std::map<std::string, int> heights_;
  std::optional<SequenceSugar> sugar_;
};

}  // namespace blended
