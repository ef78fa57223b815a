#include "blended/towers/towers.hpp"

#include <algorithm>
#include <limits>

#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"

namespace blended::towers {

int top_y(const std::vector<Block>& history, int xlow, int xhigh) {
  int top = 0;
  for (const auto& b : history)
    if (b.x < xhigh && xlow < b.x + b.w) top = std::max(top, b.y + b.h);
  return top;
}

TowerState place_block(const TowerState& s, int w, int h, const TowerConfig& cfg) {
  const int x = s.hand;
  if (x + w > cfg.width) throw EvalError("block at column " + std::to_string(x) + " leaves the grid");
  const int y = top_y(s.history, x, x + w);
  if (y + h > cfg.height) throw EvalError("block stacked above the grid");
  TowerState out = s;
  out.history.push_back(Block{x, y, w, h});
  return out;
}

TowerState move_hand(const TowerState& s, std::int64_t dist, const TowerConfig& cfg) {
  const std::int64_t loc = s.hand + s.orientation * dist;
  if (loc < 0 || loc >= cfg.width) throw EvalError("hand moved outside the grid to " + std::to_string(loc));
  TowerState out = s;
  out.hand = static_cast<int>(loc);
  return out;
}

TowerState reverse_hand(const TowerState& s) {
  TowerState out = s;
  out.orientation = -s.orientation;
  return out;
}

ImageGrid render(const TowerState& s, const TowerConfig& cfg) {
  ImageGrid g(cfg.width, cfg.height);
  for (const auto& b : s.history)
    for (int y = std::max(0, b.y); y < std::min(cfg.height, b.y + b.h); ++y)
      for (int x = std::max(0, b.x); x < std::min(cfg.width, b.x + b.w); ++x) g.set(x, y);
  return g;
}

std::vector<int> column_heights(const TowerState& s, const TowerConfig& cfg) {
  std::vector<int> out(static_cast<std::size_t>(cfg.width), 0);
  for (const auto& b : s.history)
    for (int x = std::max(0, b.x); x < std::min(cfg.width, b.x + b.w); ++x)
      out[static_cast<std::size_t>(x)] = std::max(out[static_cast<std::size_t>(x)], b.y + b.h);
  return out;
}

std::vector<int> column_heights(const ImageGrid& g) {
  std::vector<int> out(static_cast<std::size_t>(g.width));
  for (int x = 0; x < g.width; ++x) out[static_cast<std::size_t>(x)] = g.column_height(x);
  return out;
}

std::string ascii(const ImageGrid& g) {
  std::string out;
  for (int y = g.height - 1; y >= 0; --y) {
    for (int x = 0; x < g.width; ++x) out += g.at(x, y) ? '#' : '.';
    out += '\n';
  }
  return out;
}

std::vector<int> rle_encode(const ImageGrid& g) {
  std::vector<int> runs;
  std::uint8_t cur = 0;
  int len = 0;
  for (auto c : g.cells) {
    const std::uint8_t v = c ? 1 : 0;
    if (v != cur) {
      runs.push_back(len);
      cur = v;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

ImageGrid rle_decode(int width, int height, const std::vector<int>& runs) {
  ImageGrid g(width, height);
  std::size_t pos = 0;
  bool on = false;
  for (int r : runs) {
    if (r < 0 || pos + static_cast<std::size_t>(r) > g.cells.size())
      throw ConfigError("run-length data does not fit a " + std::to_string(width) + "x" +
                        std::to_string(height) + " grid");
    for (int i = 0; i < r; ++i) g.cells[pos++] = on ? 1 : 0;
    on = !on;
  }
  if (pos != g.cells.size()) throw ConfigError("run-length data is shorter than the grid");
  return g;
}

const char* tower_grammar_text() {
  return R"(grammar towers
root P
order left-to-right
nonterminal P prog
nonterminal S prog
nonterminal n int
builtin seq prog prog -> prog
builtin done -> prog
builtin embed prog -> prog
builtin moveHand int -> prog
builtin reverseHand -> prog
builtin loop int prog -> prog
builtin placeHorizontalBlock -> prog
builtin placeVerticalBlock -> prog
sequence seq done
rule P (seq ?S ?P)
rule P (done)
rule S (embed ?P)
rule S (moveHand ?n)
rule S (reverseHand)
rule S (loop ?n ?P)
rule S (placeHorizontalBlock)
rule S (placeVerticalBlock)
rule n 1
rule n 2
rule n 3
rule n 4
rule n 5
rule n 6
rule n 7
rule n 8
)";
}

TowerDomain::TowerDomain(TowerConfig cfg) : cfg_(cfg) {
  grammar_ = Grammar::parse(tower_grammar_text());
  const std::string sv = registry_.state_variable();
  auto state = [sv](const Context& c) -> const TowerState& { return c.lookup(sv).as_tower(); };
  const TowerConfig conf = cfg_;

  registry_.add(BuiltinDef{"seq", 2, {ArgMode::Value, ArgMode::ThreadState},
                           [](std::span<const Value> a, const Context&, const Interpreter&) {
                             a[0].as_tower();
                             return a[1];
                           }});
  registry_.add(BuiltinDef{"done", 0, {},
                           [state](std::span<const Value>, const Context& c, const Interpreter&) {
                             return Value(state(c));
                           }});
  registry_.add(BuiltinDef{"embed", 1, {},
                           [state](std::span<const Value> a, const Context& c, const Interpreter&) {
                             const TowerState& before = state(c);
                             TowerState out = a[0].as_tower();
                             out.hand = before.hand;
                             out.orientation = before.orientation;
                             return Value(std::move(out));
                           }});
  registry_.add(BuiltinDef{"moveHand", 1, {},
                           [state, conf](std::span<const Value> a, const Context& c, const Interpreter&) {
                             return Value(move_hand(state(c), a[0].as_int(), conf));
                           }});
  registry_.add(BuiltinDef{"reverseHand", 0, {},
                           [state](std::span<const Value>, const Context& c, const Interpreter&) {
                             return Value(reverse_hand(state(c)));
                           }});
  registry_.add(BuiltinDef{"loop", 2, {ArgMode::Value, ArgMode::Deferred},
                           [state](std::span<const Value> a, const Context& c, const Interpreter& in) {
                             const std::int64_t n = a[0].as_int();
                             const Closure& body = a[1].as_closure();
                             Value cur(state(c));
                             for (std::int64_t i = 0; i < n; ++i) {
                               const Value arg[] = {cur};
                               cur = in.apply_closure(body, arg);
                             }
                             return cur;
                           }});
  registry_.add(BuiltinDef{"placeHorizontalBlock", 0, {},
                           [state, conf](std::span<const Value>, const Context& c, const Interpreter&) {
                             return Value(place_block(state(c), 3, 1, conf));
                           }});
  registry_.add(BuiltinDef{"placeVerticalBlock", 0, {},
                           [state, conf](std::span<const Value>, const Context& c, const Interpreter&) {
                             return Value(place_block(state(c), 1, 3, conf));
                           }});
}

Context TowerDomain::input_context(const Value& input) const {
  return Context().extend(registry_.state_variable(), input.is_tower() ? input : Value(initial_state()));
}


bool TowerDomain::output_matches(const Value& output, const Value& expected) const {
  const ImageGrid got = render(output.as_tower(), cfg_);
  if (expected.is_grid()) return got == expected.as_grid();
  return got == render(expected.as_tower(), cfg_);
}

Spec TowerDomain::spec_for(const ImageGrid& target) const {
  return Spec{name(), {{Value(initial_state()), Value(target)}}};
}

TowerState TowerDomain::execute(const Expr& program, const TowerState& start) const {
  return interpreter().eval(program, input_context(Value(start))).as_tower();
}

TowerState TowerDomain::step(const TowerState& s, const Expr& statement) const { return execute(statement, s); }

// ---------------------------------------------------------------------------
// Abstract interpretation

AbstractTowerState abstract_top(const TowerConfig& cfg) {
  AbstractTowerState a;
  a.hand_lo = 0;
  a.hand_hi = cfg.width - 1;
  a.left = a.right = true;
  a.min_height.assign(static_cast<std::size_t>(cfg.width), 0);
  return a;
}

AbstractTowerState abstract_of(const TowerState& s, const TowerConfig& cfg) {
  AbstractTowerState a;
  a.hand_lo = a.hand_hi = s.hand;
  a.left = s.orientation < 0;
  a.right = s.orientation > 0;
  a.min_height = column_heights(s, cfg);
  a.exact = s;
  return a;
}

AbstractTowerState abstract_join(const AbstractTowerState& a, const AbstractTowerState& b) {
  if (a.bottom) return b;
  if (b.bottom) return a;
  AbstractTowerState out;
  out.hand_lo = std::min(a.hand_lo, b.hand_lo);
  out.hand_hi = std::max(a.hand_hi, b.hand_hi);
  out.left = a.left || b.left;
  out.right = a.right || b.right;
  out.min_height.resize(a.min_height.size());
  for (std::size_t i = 0; i < a.min_height.size(); ++i)
    out.min_height[i] = std::min(a.min_height[i], b.min_height[i]);
  if (a.exact && b.exact && *a.exact == *b.exact) out.exact = a.exact;
  return out;
}

namespace {

AbstractTowerState make_bottom(const AbstractTowerState& like) {
  AbstractTowerState out = like;
  out.bottom = true;
  out.exact.reset();
  return out;
}

class AbstractRunner {
 public:
  explicit AbstractRunner(const TowerDomain& d) : d_(d), cfg_(d.config()) {}

  AbstractTowerState run(const Expr& e, const AbstractTowerState& a) const {
    if (a.bottom) return a;
    if (a.exact && e.complete()) {
      try {
        return abstract_of(d_.execute(e, *a.exact), cfg_);
      } catch (const EvalError&) {
        return make_bottom(a);
      }
    }
    if (e.is_hole()) return havoc(a);
    if (e.kind() != NodeKind::Apply) throw Error("abstract_eval: unexpected node " + print_program(e));
    const std::string& f = e.name();
    if (f == "done") return a;
    if (f == "seq") return run(e.child(1), run(e.child(0), a));
    if (f == "placeHorizontalBlock") return place(a, 3, 1);
    if (f == "placeVerticalBlock") return place(a, 1, 3);
    if (f == "reverseHand") {
      AbstractTowerState out = a;
      std::swap(out.left, out.right);
      if (out.exact) out.exact = reverse_hand(*out.exact);
      return out;
    }
    if (f == "moveHand") return move(a, counts(e.child(0)));
    if (f == "embed") {
      const AbstractTowerState inner = run(e.child(0), a);
      if (inner.bottom) return inner;
      AbstractTowerState out = a;
      out.min_height = inner.min_height;
      out.exact.reset();
      if (a.exact && inner.exact) {
        TowerState s = *inner.exact;
        s.hand = a.exact->hand;
        s.orientation = a.exact->orientation;
        out.exact = s;
      }
      return out;
    }
    if (f == "loop") {
      const std::vector<std::int64_t> ns = counts(e.child(0));
      const std::int64_t most = *std::max_element(ns.begin(), ns.end());
      std::optional<AbstractTowerState> acc;
      auto take = [&](const AbstractTowerState& s) { acc = acc ? abstract_join(*acc, s) : s; };
      if (std::find_if(ns.begin(), ns.end(), [](std::int64_t n) { return n <= 0; }) != ns.end()) take(a);
      AbstractTowerState cur = a;
      for (std::int64_t k = 1; k <= most; ++k) {
        cur = run(e.child(1), cur);
        if (std::find(ns.begin(), ns.end(), k) != ns.end()) take(cur);
        if (cur.bottom) break;
      }
      return acc ? *acc : make_bottom(a);
    }
    throw Error("abstract_eval: not a tower statement: " + f);
  }

 private:
  // Possible integer values of an `n` argument.
  std::vector<std::int64_t> counts(const Expr& n) const {
    if (n.kind() == NodeKind::Constant) return {n.value()};
    std::vector<std::int64_t> out;
    for (int id : d_.grammar().rules_for(n.type()))
      if (d_.grammar().rule(id).kind == NodeKind::Constant) out.push_back(d_.grammar().rule(id).value);
    return out;
  }

  AbstractTowerState havoc(const AbstractTowerState& a) const {
    AbstractTowerState out = a;
    out.hand_lo = 0;
    out.hand_hi = cfg_.width - 1;
    out.left = out.right = true;
    out.exact.reset();
    return out;
  }

  AbstractTowerState move(const AbstractTowerState& a, const std::vector<std::int64_t>& dists) const {
    if (a.exact && dists.size() == 1) {
      try {
        return abstract_of(move_hand(*a.exact, dists[0], cfg_), cfg_);
      } catch (const EvalError&) {
        return make_bottom(a);
      }
    }
    AbstractTowerState out = a;
    out.exact.reset();
    bool any = false;
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (int o : {-1, 1}) {
      if ((o < 0 && !a.left) || (o > 0 && !a.right)) continue;
      for (std::int64_t d : dists) {
        const std::int64_t l = std::max<std::int64_t>(a.hand_lo + o * d, 0);
        const std::int64_t h = std::min<std::int64_t>(a.hand_hi + o * d, cfg_.width - 1);
        if (l > h) continue;
        any = true;
        lo = std::min(lo, static_cast<int>(l));
        hi = std::max(hi, static_cast<int>(h));
      }
    }
    if (!any) return make_bottom(a);
    out.hand_lo = lo;
    out.hand_hi = hi;
    return out;
  }

  AbstractTowerState place(const AbstractTowerState& a, int w, int h) const {
    if (a.exact) {
      try {
        return abstract_of(place_block(*a.exact, w, h, cfg_), cfg_);
      } catch (const EvalError&) {
        return make_bottom(a);
      }
    }
    const int lo = a.hand_lo;
    const int hi = std::min(a.hand_hi, cfg_.width - w);
    if (lo > hi) return make_bottom(a);
    // Lowest possible landing height over every feasible hand position.
    int landing = std::numeric_limits<int>::max();
    for (int x = lo; x <= hi; ++x) {
      int top = 0;
      for (int c = x; c < x + w; ++c) top = std::max(top, a.min_height[static_cast<std::size_t>(c)]);
      landing = std::min(landing, top);
    }
    if (landing + h > cfg_.height) return make_bottom(a);
    AbstractTowerState out = a;
    out.hand_hi = hi;
    for (int c = hi; c < lo + w; ++c) {
      auto& m = out.min_height[static_cast<std::size_t>(c)];
      m = std::max(m, landing + h);
    }
    return out;
  }

  const TowerDomain& d_;
  const TowerConfig& cfg_;
};

}  // namespace

AbstractTowerState abstract_eval_from(const Expr& program, const AbstractTowerState& start,
                                      const TowerDomain& domain) {
  return AbstractRunner(domain).run(program, start);
}

AbstractTowerState abstract_eval(const Expr& sketch, const TowerDomain& domain) {
  return abstract_eval_from(sketch, abstract_of(TowerDomain::initial_state(), domain.config()), domain);
}

AbstractTowerState abstract_eval(const Sketch& sketch, const TowerDomain& domain) {
  return abstract_eval(*sketch.root(), domain);
}

bool abstract_prune(const AbstractTowerState& a, const ImageGrid& target) {
  if (a.bottom) return true;
  for (int x = 0; x < target.width && static_cast<std::size_t>(x) < a.min_height.size(); ++x)
    if (a.min_height[static_cast<std::size_t>(x)] > target.column_height(x)) return true;
  return false;
}

}  // namespace blended::towers
