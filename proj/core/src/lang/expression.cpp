#include "blended/lang/expression.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "blended/util/error.hpp"
#include "blended/util/rng.hpp"

namespace blended {

void Expr::finish() {
  holes_ = kind_ == NodeKind::Hole ? 1 : 0;
  size_ = 1;
  int deepest = 0;
  for (const auto& c : children_) {
    holes_ += c->holes_;
    size_ += c->size_;
    deepest = std::max(deepest, c->depth_);
  }
  depth_ = deepest + 1;
}

ExprPtr Expr::constant(std::string type, std::int64_t value) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = NodeKind::Constant;
  e->type_ = std::move(type);
  e->value_ = value;
  e->finish();
  return e;
}

ExprPtr Expr::variable(std::string type, std::string name) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = NodeKind::Variable;
  e->type_ = std::move(type);
  e->name_ = std::move(name);
  e->finish();
  return e;
}

ExprPtr Expr::hole(std::string type) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = NodeKind::Hole;
  e->type_ = std::move(type);
  e->finish();
  return e;
}

ExprPtr Expr::apply(std::string type, std::string name, std::vector<ExprPtr> args) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = NodeKind::Apply;
  e->type_ = std::move(type);
  e->name_ = std::move(name);
  e->children_ = std::move(args);
  e->finish();
  return e;
}

ExprPtr Expr::lambda(std::string type, std::vector<std::string> params, ExprPtr body) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = NodeKind::Lambda;
  e->type_ = std::move(type);
  e->params_ = std::move(params);
  e->children_.push_back(std::move(body));
  e->finish();
  return e;
}

ExprPtr Expr::call(std::string type, ExprPtr fn, std::vector<ExprPtr> args) {
  args.insert(args.begin(), std::move(fn));
  return apply(std::move(type), kCallHead, std::move(args));
}

bool equal(const Expr& a, const Expr& b) {
  if (&a == &b) return true;
  if (a.kind() != b.kind() || a.type() != b.type() || a.hole_count() != b.hole_count() ||
      a.size() != b.size())
    return false;
  switch (a.kind()) {
    case NodeKind::Constant:
      return a.value() == b.value();
    case NodeKind::Variable:
      return a.name() == b.name();
    case NodeKind::Hole:
      return true;
    case NodeKind::Lambda:
      if (a.params() != b.params()) return false;
      break;
    case NodeKind::Apply:
      if (a.name() != b.name()) return false;
      break;
  }
  if (a.children().size() != b.children().size()) return false;
  for (std::size_t i = 0; i < a.children().size(); ++i)
    if (!equal(a.child(i), b.child(i))) return false;
  return true;
}

std::size_t hash_expr(const Expr& e) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(e.kind()) + 1);
  h = fnv1a(e.type(), h);
  switch (e.kind()) {
    case NodeKind::Constant:
      h = splitmix64(h ^ static_cast<std::uint64_t>(e.value()));
      break;
    case NodeKind::Variable:
    case NodeKind::Apply:
      h = fnv1a(e.name(), h);
      break;
    case NodeKind::Lambda:
      for (const auto& p : e.params()) h = fnv1a(p, h) * 31;
      break;
    case NodeKind::Hole:
      break;
  }
  for (const auto& c : e.children()) h = splitmix64(h + hash_expr(*c));
  return static_cast<std::size_t>(h);
}

int count_holes(const Expr& e) { return e.hole_count(); }

namespace {

void collect_holes(const Expr& e, Path& path, std::vector<Path>& out) {
  if (e.is_hole()) {
    out.push_back(path);
    return;
  }
  if (e.complete()) return;
  for (std::size_t i = 0; i < e.children().size(); ++i) {
    path.push_back(static_cast<int>(i));
    collect_holes(e.child(i), path, out);
    path.pop_back();
  }
}

ExprPtr rebuild(const Expr& node, std::vector<ExprPtr> children) {
  switch (node.kind()) {
    case NodeKind::Apply:
      return Expr::apply(node.type(), node.name(), std::move(children));
    case NodeKind::Lambda:
      return Expr::lambda(node.type(), node.params(), std::move(children[0]));
    default:
      throw Error("rebuild: leaf node has no children");
  }
}

}  // namespace

std::vector<Path> hole_paths(const Expr& e) {
  std::vector<Path> out;
  Path path;
  collect_holes(e, path, out);
  return out;
}

const Expr& node_at(const Expr& root, const Path& path) {
  const Expr* cur = &root;
  for (int i : path) {
    if (i < 0 || static_cast<std::size_t>(i) >= cur->children().size())
      throw Error("node_at: path out of range");
    cur = &cur->child(static_cast<std::size_t>(i));
  }
  return *cur;
}

ExprPtr replace_at(const ExprPtr& root, const Path& path, ExprPtr replacement) {
  std::function<ExprPtr(const ExprPtr&, std::size_t)> go = [&](const ExprPtr& node,
                                                               std::size_t depth) -> ExprPtr {
    if (depth == path.size()) return replacement;
    auto children = node->children();
    const auto i = static_cast<std::size_t>(path[depth]);
    if (i >= children.size()) throw Error("replace_at: path out of range");
    children[i] = go(children[i], depth + 1);
    return rebuild(*node, std::move(children));
  };
  return go(root, 0);
}

std::vector<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  std::vector<std::string> bound;
  std::function<void(const Expr&)> go = [&](const Expr& n) {
    if (n.kind() == NodeKind::Variable) {
      if (std::find(bound.begin(), bound.end(), n.name()) == bound.end()) out.insert(n.name());
      return;
    }
    if (n.kind() == NodeKind::Lambda) {
      const auto mark = bound.size();
      bound.insert(bound.end(), n.params().begin(), n.params().end());
      go(n.body());
      bound.resize(mark);
      return;
    }
    for (const auto& c : n.children()) go(*c);
  };
  go(e);
  return {out.begin(), out.end()};
}

}  // namespace blended
