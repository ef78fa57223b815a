#include "blended/search/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "blended/util/error.hpp"

namespace blended {

bool check_solution(const Domain& domain, const Expr& program, const Spec& spec) {
  return domain.check_solution(program, spec);
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Node {
  double key;
  long order;
  Sketch sketch;
};

struct Later {
  bool operator()(const Node& a, const Node& b) const {
    if (a.key != b.key) return a.key > b.key;
    return a.order > b.order;
  }
};

void finish(SearchResult& r, const Domain& domain, const Spec& spec, Clock::time_point t0) {
  r.seconds = since(t0);
  if (r.solved && !check_solution(domain, *r.solution, spec))
    throw std::logic_error("search returned a program that fails the spec");
}

SearchResult priority_search(const Domain& domain, const Spec& spec, const Policy& policy,
                             const ValueFunction* value, const SearchOptions& opts) {
  const auto t0 = Clock::now();
  const Grammar& g = domain.grammar();
  auto pol = policy.start(spec);
  std::unique_ptr<ValueSession> val = value ? value->start(spec) : nullptr;
  SearchResult r;

  std::priority_queue<Node, std::vector<Node>, Later> open;
  long counter = 0;

  // Returns false when the sketch is rejected.
  auto heuristic = [&](const Sketch& s, double& h) {
    h = 0.0;
    if (!val || s.complete()) return true;
    double v;
    try {
      v = val->value(s);
    } catch (const EvalError&) {
      ++r.infeasible;
      return false;
    }
    h = v > 0.0 ? std::clamp(-std::log(v), 0.0, opts.h_max) : opts.h_max;
    return true;
  };
  auto push = [&](Sketch s) {
    if (opts.prune && opts.prune(s)) {
      ++r.pruned;
      return;
    }
    double h;
    if (!heuristic(s, h)) return;
    const double key = -s.log_prob() + h;
    open.push(Node{key, counter++, std::move(s)});
  };

  push(Sketch::initial(g));
  double last_g = 0.0;
  while (!open.empty() && r.nodes < opts.node_budget) {
    if (opts.time_budget > 0 && since(t0) > opts.time_budget) break;
    Node n = open.top();
    open.pop();
    ++r.nodes;
    if (opts.on_pop) opts.on_pop(n.sketch, n.key);
    if (!val) {
      if (n.key < last_g) throw std::logic_error("best-first pop cost decreased");
      last_g = n.key;
    }
    const Sketch& s = n.sketch;
    if (s.complete()) {
      if (check_solution(domain, *s.root(), spec)) {
        r.solved = true;
        r.solution = s.root();
        r.solved_at = r.nodes;
        break;
      }
      continue;
    }
    if (s.steps() >= opts.max_depth) continue;
    std::vector<double> p;
    try {
      p = pol->dist(s);
    } catch (const EvalError&) {
      ++r.infeasible;
      continue;
    }
    for (const Action& a : expansions(s, g)) {
      const double pa = p[static_cast<std::size_t>(a.rule)];
      if (!(pa > 0.0)) continue;
      push(apply_action(s, a, g, std::log(pa)));
    }
  }
  finish(r, domain, spec, t0);
  return r;
}

std::size_t draw(const std::vector<double>& p, Rng& rng) {
  double u = uniform_real(rng);
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    if (u < p[i]) return i;
    u -= p[i];
  }
  return last;
}

}  // namespace

SearchResult best_first(const Domain& domain, const Spec& spec, const Policy& policy, const SearchOptions& opts) {
  return priority_search(domain, spec, policy, nullptr, opts);
}

SearchResult astar(const Domain& domain, const Spec& spec, const Policy& policy, const ValueFunction& value,
                   const SearchOptions& opts) {
  return priority_search(domain, spec, policy, &value, opts);
}

SearchResult sample_search(const Domain& domain, const Spec& spec, const Policy& policy, Rng& rng,
                           const SearchOptions& opts) {
  if (opts.time_budget <= 0 && opts.sample_budget <= 0 && opts.node_budget <= 0)
    throw ConfigError("sample_search needs a time, sample or node budget");
  const auto t0 = Clock::now();
  const Grammar& g = domain.grammar();
  auto pol = policy.start(spec);
  SearchResult r;
  auto out_of_budget = [&] {
    if (opts.sample_budget > 0 && r.samples >= opts.sample_budget) return true;
    if (opts.node_budget > 0 && r.nodes >= opts.node_budget) return true;
    return opts.time_budget > 0 && since(t0) > opts.time_budget;
  };
  while (!out_of_budget()) {
    Sketch s = Sketch::initial(g);
    bool dead = false;
    while (!s.complete() && s.steps() < opts.max_depth) {
      if (opts.node_budget > 0 && r.nodes >= opts.node_budget) break;
      std::vector<double> p;
      try {
        p = pol->dist(s);
      } catch (const EvalError&) {
        ++r.infeasible;
        dead = true;
        break;
      }
      ++r.nodes;
      const std::size_t rule = draw(p, rng);
      Action a{static_cast<int>(rule), s.cursor_index()};
      s = apply_action(s, a, g, std::log(p[rule]));
    }
    ++r.samples;
    if (dead || !s.complete()) continue;
    if (check_solution(domain, *s.root(), spec)) {
      r.solved = true;
      r.solution = s.root();
      r.solved_at = r.nodes;
      break;
    }
  }
  finish(r, domain, spec, t0);
  return r;
}

bool prune_hook(const towers::TowerDomain& domain, const Sketch& s, const Spec& spec) {
  if (spec.pairs.size() != 1) throw ConfigError("tower spec must have exactly one pair");
  return towers::abstract_prune(towers::abstract_eval(s, domain), spec.pairs[0].second.as_grid());
}

PruneFn tower_prune(const towers::TowerDomain& domain, const Spec& spec) {
  return [&domain, spec](const Sketch& s) { return prune_hook(domain, s, spec); };
}

}  // namespace blended
