#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"

namespace blended::towers {

struct TowerConfig {
  int width = 24;
  int height = 16;
};

// Highest block top over records whose half-open footprint [x, x+w) meets
// [xlow, xhigh); 0 (ground) when none does.
int top_y(const std::vector<Block>& history, int xlow, int xhigh);

// Execution failures (hand or block leaving the grid) throw EvalError.
TowerState place_block(const TowerState& s, int w, int h, const TowerConfig& cfg);
TowerState move_hand(const TowerState& s, std::int64_t dist, const TowerConfig& cfg);
TowerState reverse_hand(const TowerState& s);

ImageGrid render(const TowerState& s, const TowerConfig& cfg);
std::vector<int> column_heights(const TowerState& s, const TowerConfig& cfg);
std::vector<int> column_heights(const ImageGrid& g);

// '#' occupied, '.' empty, top row first.
std::string ascii(const ImageGrid& g);
// Alternating run lengths over the row-major cells, starting with a run of zeros.
std::vector<int> rle_encode(const ImageGrid& g);
ImageGrid rle_decode(int width, int height, const std::vector<int>& runs);

const char* tower_grammar_text();

class TowerDomain : public Domain {
 public:
  explicit TowerDomain(TowerConfig cfg = {});
  std::string name() const override { return "towers"; }
  const TowerConfig& config() const { return cfg_; }

  Context input_context(const Value& input) const override;
  std::string context_variable() const override { return registry_.state_variable(); }
  // Rendered occupancy must equal the target grid.
  bool output_matches(const Value& output, const Value& expected) const override;

  static TowerState initial_state() { return TowerState{0, 1, {}}; }
  // Spec for a target image: one pair (initial state, target).
  Spec spec_for(const ImageGrid& target) const;

  TowerState execute(const Expr& program, const TowerState& start) const;
  TowerState execute(const Expr& program) const { return execute(program, initial_state()); }
  // Runs one statement (type S) from `s`.
  TowerState step(const TowerState& s, const Expr& statement) const;

 private:
  TowerConfig cfg_;
};

// Sound over-approximation of every successful completion of a tower sketch.
struct AbstractTowerState {
  int hand_lo = 0;
  int hand_hi = 0;
  bool left = false;   // orientation -1 possible
  bool right = true;   // orientation +1 possible
  std::vector<int> min_height;
  // No completion executes successfully.
  bool bottom = false;
  // Known concrete state (only while no hole has been crossed).
  std::optional<TowerState> exact;

  bool hand_is_point() const { return hand_lo == hand_hi; }
};

AbstractTowerState abstract_top(const TowerConfig& cfg);
AbstractTowerState abstract_of(const TowerState& s, const TowerConfig& cfg);
AbstractTowerState abstract_join(const AbstractTowerState& a, const AbstractTowerState& b);

// Abstract execution of a P-typed tower sketch from the initial state.
AbstractTowerState abstract_eval(const Expr& sketch, const TowerDomain& domain);
AbstractTowerState abstract_eval(const Sketch& sketch, const TowerDomain& domain);
AbstractTowerState abstract_eval_from(const Expr& program, const AbstractTowerState& start,
                                      const TowerDomain& domain);

// True when no completion can render to `target` (some guaranteed column
// height exceeds the target's, or no completion executes at all).
bool abstract_prune(const AbstractTowerState& a, const ImageGrid& target);

}  // namespace blended::towers
