#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"
#include "blended/search/search.hpp"

namespace testsupport {

using namespace blended;

// E -> 1 | 2, nothing else.
class ToyDomain : public Domain {
 public:
  ToyDomain() { grammar_ = Grammar::parse("grammar toy\nroot E\nnonterminal E int\nrule E 1\nrule E 2\n"); }
  std::string name() const override { return "toy"; }
  Context input_context(const Value& input) const override { return Context().extend("x", input); }
  std::string context_variable() const override { return "x"; }
};

// Fixed rule weights, renormalized over the rules legal at the cursor.
class StaticPolicy : public Policy {
 public:
  StaticPolicy(const Grammar& g, std::vector<double> w) : g_(g), w_(std::move(w)) {}
  std::unique_ptr<PolicySession> start(const Spec&) const override {
    struct S : PolicySession {
      const StaticPolicy* p;
      std::vector<double> dist(const Sketch& s) override {
        std::vector<double> out(p->w_.size(), 0.0);
        double z = 0.0;
        for (int r : legal_rules(s, p->g_)) z += p->w_[static_cast<std::size_t>(r)];
        for (int r : legal_rules(s, p->g_)) out[static_cast<std::size_t>(r)] = p->w_[static_cast<std::size_t>(r)] / z;
        return out;
      }
    };
    auto s = std::make_unique<S>();
    s->p = this;
    return s;
  }
  double log_prob(const Expr& e) const {
    double lp = 0.0;
    for (const auto& a : derive_actions(std::shared_ptr<const Expr>(&e, [](const Expr*) {}), g_))
      lp += std::log(w_[static_cast<std::size_t>(a.rule)]);
    return lp;
  }

 private:
  const Grammar& g_;
  std::vector<double> w_;
};

inline Spec arith_spec(std::initializer_list<std::pair<int, int>> xy) {
  Spec s{"arith", {}};
  for (auto [x, y] : xy) s.pairs.emplace_back(Value(x), Value(y));
  return s;
}

}  // namespace testsupport
