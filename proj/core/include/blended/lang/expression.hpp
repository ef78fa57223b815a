#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace blended {

enum class NodeKind { Constant, Variable, Hole, Apply, Lambda };

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Name used for an Apply node that calls a function-valued first child,
// e.g. ((lambda (x) (+ x x)) 5).
inline constexpr const char* kCallHead = "@";

// Immutable typed AST node. Subtrees are shared freely between sketches.
class Expr {
 public:
  NodeKind kind() const { return kind_; }
  const std::string& type() const { return type_; }
  std::int64_t value() const { return value_; }
  // Variable name or builtin name.
  const std::string& name() const { return name_; }
  const std::vector<std::string>& params() const { return params_; }
  const std::vector<ExprPtr>& children() const { return children_; }
  const Expr& child(std::size_t i) const { return *children_[i]; }
  const Expr& body() const { return *children_[0]; }

  int hole_count() const { return holes_; }
  bool complete() const { return holes_ == 0; }
  int size() const { return size_; }
  // Leaves have depth 1.
  int depth() const { return depth_; }

  bool is_hole() const { return kind_ == NodeKind::Hole; }
  bool is_call() const { return kind_ == NodeKind::Apply && name_ == kCallHead; }

  static ExprPtr constant(std::string type, std::int64_t value);
  static ExprPtr variable(std::string type, std::string name);
  static ExprPtr hole(std::string type);
  static ExprPtr apply(std::string type, std::string name, std::vector<ExprPtr> args);
  static ExprPtr lambda(std::string type, std::vector<std::string> params, ExprPtr body);
  static ExprPtr call(std::string type, ExprPtr fn, std::vector<ExprPtr> args);

 private:
  Expr() = default;
  void finish();

  NodeKind kind_ = NodeKind::Constant;
  std::string type_;
  std::int64_t value_ = 0;
  std::string name_;
  std::vector<std::string> params_;
  std::vector<ExprPtr> children_;
  int holes_ = 0;
  int size_ = 1;
  int depth_ = 1;
};

// Structural equality, including type tags.
bool equal(const Expr& a, const Expr& b);
std::size_t hash_expr(const Expr& e);

int count_holes(const Expr& e);

// Child-index path from the root to a node.
using Path = std::vector<int>;

// Holes in pre-order (left-to-right).
std::vector<Path> hole_paths(const Expr& e);
const Expr& node_at(const Expr& root, const Path& path);
ExprPtr replace_at(const ExprPtr& root, const Path& path, ExprPtr replacement);

// Names referenced as variables anywhere in `e` that are not bound by an enclosing lambda in `e`.
std::vector<std::string> free_variables(const Expr& e);

}  // namespace blended
