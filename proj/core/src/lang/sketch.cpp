#include "blended/lang/sketch.hpp"

#include <algorithm>

#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"

namespace blended {

Sketch::Sketch(ExprPtr root, HoleOrder order, double log_prob, int steps)
    : root_(std::move(root)), order_(order), log_prob_(log_prob), steps_(steps) {}

Sketch Sketch::initial(const Grammar& g) { return Sketch(Expr::hole(g.root_type()), g.order()); }

std::vector<Path> Sketch::holes_in_order() const {
  auto paths = hole_paths(*root_);
  if (order_ == HoleOrder::RightToLeft) std::reverse(paths.begin(), paths.end());
  return paths;
}

int Sketch::cursor_index() const {
  const int n = root_->hole_count();
  if (n == 0) return -1;
  return order_ == HoleOrder::LeftToRight ? 0 : n - 1;
}

Path Sketch::cursor_path() const {
  auto paths = hole_paths(*root_);
  if (paths.empty()) throw Error("sketch has no holes");
  return order_ == HoleOrder::LeftToRight ? paths.front() : paths.back();
}

const Expr& Sketch::cursor() const { return node_at(*root_, cursor_path()); }

std::vector<Action> expansions(const Sketch& s, const Grammar& g) {
  if (s.complete()) throw Error("expansions: sketch has no holes");
  const int cursor = s.cursor_index();
  std::vector<Action> out;
  for (int id : g.rules_for(s.cursor().type())) out.push_back(Action{id, cursor});
  return out;
}

Sketch apply_action(const Sketch& s, const Action& a, const Grammar& g, double log_prob) {
  if (s.complete()) throw Error("apply_action: sketch has no holes");
  if (a.hole != s.cursor_index())
    throw Error("apply_action: action targets hole " + std::to_string(a.hole) + " but cursor is " +
                std::to_string(s.cursor_index()));
  const Path path = s.cursor_path();
  const Expr& hole = node_at(*s.root(), path);
  const Rule& r = g.rule(a.rule);
  if (r.lhs != hole.type())
    throw Error("apply_action: rule " + r.lhs + " -> " + r.text() + " does not expand ?" + hole.type());
  return Sketch(replace_at(s.root(), path, r.tmpl), s.order(), s.log_prob() + log_prob, s.steps() + 1);
}

std::vector<Action> derive_actions(const ExprPtr& program, const Grammar& g) {
  if (!program->complete()) throw Error("derive_actions: program has holes");
  std::vector<Action> out;
  Sketch s(Expr::hole(program->type()), g.order());
  while (!s.complete()) {
    const Path path = s.cursor_path();
    const Expr& target = node_at(*program, path);
    int chosen = -1;
    for (int id : g.rules_for(target.type())) {
      if (g.rule(id).matches(target)) {
        chosen = id;
        break;
      }
    }
    if (chosen < 0)
      throw Error("derive_actions: no rule derives " + print_program(target) + " : " + target.type());
    const Action a{chosen, s.cursor_index()};
    out.push_back(a);
    s = apply_action(s, a, g);
  }
  return out;
}

namespace {

ExprPtr sample_node(const Grammar& g, const std::string& type, Rng& rng, int depth, int max_depth) {
  const auto& ids = g.rules_for(type);
  if (ids.empty()) throw ConfigError("no rules for type " + type);
  if (g.min_height(type) < 0) throw ConfigError("type " + type + " has no terminating derivation");
  const int budget = max_depth - depth + 1;
  std::vector<int> eligible;
  for (int id : ids)
    if (g.min_height(g.rule(id)) >= 1 && g.min_height(g.rule(id)) <= budget) eligible.push_back(id);
  if (eligible.empty()) {
    const int best = g.min_height(type);
    for (int id : ids)
      if (g.min_height(g.rule(id)) == best) eligible.push_back(id);
  }
  double total = 0.0;
  for (int id : eligible) total += g.rule(id).weight;
  double u = uniform_real(rng) * total;
  int chosen = eligible.back();
  for (int id : eligible) {
    u -= g.rule(id).weight;
    if (u < 0.0) {
      chosen = id;
      break;
    }
  }
  const Rule& r = g.rule(chosen);
  switch (r.kind) {
    case NodeKind::Constant:
    case NodeKind::Variable:
      return r.tmpl;
    case NodeKind::Lambda:
      return Expr::lambda(r.lhs, r.params, sample_node(g, r.slot_types[0], rng, depth + 1, max_depth));
    case NodeKind::Apply: {
      if (r.terminal()) return r.tmpl;
      std::vector<ExprPtr> args;
      for (const auto& t : r.slot_types) args.push_back(sample_node(g, t, rng, depth + 1, max_depth));
      return Expr::apply(r.lhs, r.head, std::move(args));
    }
    case NodeKind::Hole:
      break;
  }
  throw Error("unreachable");
}

}  // namespace

ExprPtr sample_expression(const Grammar& g, const std::string& type, Rng& rng, int max_depth) {
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  return sample_node(g, type, rng, 1, max_depth);
}

ExprPtr sample_program(const Grammar& g, std::uint64_t seed, int max_depth) {
  Rng rng(seed);
  return sample_expression(g, g.root_type(), rng, max_depth);
}

}  // namespace blended
