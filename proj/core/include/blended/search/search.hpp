#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"
#include "blended/policy/model.hpp"
#include "blended/towers/towers.hpp"

namespace blended {

inline constexpr double kHeuristicMax = 20.0;
inline constexpr int kDefaultMaxDepth = 30;

// Returns true to reject a sketch before it is enqueued.
using PruneFn = std::function<bool(const Sketch&)>;

struct SearchOptions {
  long node_budget = 2000;
  double time_budget = 0.0;  // seconds; 0 = none
  long sample_budget = 0;    // sample_search only; 0 = none
  int max_depth = kDefaultMaxDepth;
  double h_max = kHeuristicMax;
  PruneFn prune;
  // Called at every pop with the node's priority key.
  std::function<void(const Sketch&, double key)> on_pop;
};

struct SearchResult {
  bool solved = false;
  ExprPtr solution;
  long nodes = 0;          // pops (best-first, A*) or expansions (sampling)
  long samples = 0;        // complete programs drawn by sample_search
  long pruned = 0;
  long infeasible = 0;     // sketches whose concrete part failed
  double seconds = 0.0;
  long solved_at = -1;     // node count at the solving pop

  // Per-budget solve record: solved with at most `budget` nodes.
  bool solved_within(long budget) const { return solved && solved_at <= budget; }
};

bool check_solution(const Domain& domain, const Expr& program, const Spec& spec);

// Uniform-cost search on g = -log pi(actions). Ties pop in insertion order.
SearchResult best_first(const Domain& domain, const Spec& spec, const Policy& policy, const SearchOptions& opts);

// Best-first on g + h with h = clamp(-log V(s, X), 0, h_max); h = 0 for hole-free nodes.
SearchResult astar(const Domain& domain, const Spec& spec, const Policy& policy, const ValueFunction& value,
                   const SearchOptions& opts);

// Repeated ancestral sampling of complete programs until solved or a budget runs out.
SearchResult sample_search(const Domain& domain, const Spec& spec, const Policy& policy, Rng& rng,
                           const SearchOptions& opts);

// abstract_prune(abstract_eval(s), target) for a tower spec.
bool prune_hook(const towers::TowerDomain& domain, const Sketch& s, const Spec& spec);
PruneFn tower_prune(const towers::TowerDomain& domain, const Spec& spec);

}  // namespace blended
