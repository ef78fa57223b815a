#include "blended/lang/grammar.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"
#include "blended/util/rng.hpp"

namespace blended {

namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

double parse_weight(std::string_view s) {
  try {
    std::size_t used = 0;
    const double w = std::stod(std::string(s), &used);
    if (used != s.size()) throw ConfigError("bad weight '" + std::string(s) + "'");
    return w;
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad weight '" + std::string(s) + "'");
  }
}

// Splits "<template> : <weight>" where the weight part is optional.
std::pair<std::string_view, std::optional<double>> split_weight(std::string_view rest) {
  const auto colon = rest.rfind(" : ");
  if (colon == std::string_view::npos) return {trim(rest), std::nullopt};
  return {trim(rest.substr(0, colon)), parse_weight(trim(rest.substr(colon + 3)))};
}

Rule rule_from_template(const std::string& lhs, std::string_view text) {
  const SExpr s = read_sexpr(text);
  Rule r;
  r.lhs = lhs;
  auto slot = [&](const SExpr& item) {
    if (!item.is_atom || item.atom.size() < 2 || item.atom[0] != '?')
      throw ConfigError("rule " + lhs + ": template children must be typed slots, got '" +
                        std::string(text) + "'");
    return item.atom.substr(1);
  };
  if (s.is_atom) {
    if (!s.atom.empty() && s.atom[0] == '?')
      throw ConfigError("rule " + lhs + ": unit productions are not supported");
    std::int64_t v = 0;
    if (parse_int(s.atom, v)) {
      r.kind = NodeKind::Constant;
      r.value = v;
      r.tmpl = Expr::constant(lhs, v);
    } else {
      r.kind = NodeKind::Variable;
      r.head = s.atom;
      r.tmpl = Expr::variable(lhs, s.atom);
    }
    return r;
  }
  if (s.bracket || s.items.empty() || !s.items[0].is_atom)
    throw ConfigError("rule " + lhs + ": malformed template '" + std::string(text) + "'");
  if (s.items[0].atom == "lambda") {
    if (s.items.size() != 3 || s.items[1].is_atom)
      throw ConfigError("rule " + lhs + ": lambda template must be (lambda (params) ?T)");
    r.kind = NodeKind::Lambda;
    for (const auto& p : s.items[1].items) {
      if (!p.is_atom) throw ConfigError("rule " + lhs + ": bad lambda parameter");
      r.params.push_back(p.atom);
    }
    r.slot_types.push_back(slot(s.items[2]));
    r.tmpl = Expr::lambda(lhs, r.params, Expr::hole(r.slot_types[0]));
    return r;
  }
  r.kind = NodeKind::Apply;
  r.head = s.items[0].atom;
  std::vector<ExprPtr> args;
  for (std::size_t i = 1; i < s.items.size(); ++i) {
    r.slot_types.push_back(slot(s.items[i]));
    args.push_back(Expr::hole(r.slot_types.back()));
  }
  r.tmpl = Expr::apply(lhs, r.head, std::move(args));
  return r;
}

}  // namespace

bool Rule::matches(const Expr& e) const {
  if (e.kind() != kind || e.type() != lhs) return false;
  switch (kind) {
    case NodeKind::Constant:
      return e.value() == value;
    case NodeKind::Variable:
      return e.name() == head;
    case NodeKind::Lambda:
      if (e.params() != params) return false;
      return e.body().type() == slot_types[0];
    case NodeKind::Apply:
      if (e.name() != head || e.children().size() != slot_types.size()) return false;
      for (std::size_t i = 0; i < slot_types.size(); ++i)
        if (e.child(i).type() != slot_types[i]) return false;
      return true;
    case NodeKind::Hole:
      return false;
  }
  return false;
}

std::string Rule::text() const { return print_program(*tmpl); }

Grammar Grammar::parse(std::string_view text) {
  Grammar g;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto toks = split_ws(line);
    const std::string& kw = toks[0];
    auto need = [&](std::size_t n) {
      if (toks.size() < n)
        throw ConfigError("grammar line " + std::to_string(line_no) + ": expected " +
                          std::to_string(n - 1) + " fields after '" + kw + "'");
    };
    if (kw == "grammar") {
      need(2);
      g.name_ = toks[1];
    } else if (kw == "root") {
      need(2);
      g.root_ = toks[1];
    } else if (kw == "order") {
      need(2);
      if (toks[1] == "left-to-right")
        g.order_ = HoleOrder::LeftToRight;
      else if (toks[1] == "right-to-left")
        g.order_ = HoleOrder::RightToLeft;
      else
        throw ConfigError("grammar line " + std::to_string(line_no) + ": unknown order " + toks[1]);
    } else if (kw == "nonterminal") {
      need(3);
      if (!g.semantic_.emplace(toks[1], toks[2]).second)
        throw ConfigError("duplicate nonterminal " + toks[1]);
      g.type_order_.push_back(toks[1]);
    } else if (kw == "builtin") {
      need(3);
      BuiltinSignature sig;
      sig.name = toks[1];
      std::size_t i = 2;
      for (; i < toks.size() && toks[i] != "->"; ++i) sig.arg_types.push_back(toks[i]);
      if (i + 2 != toks.size())
        throw ConfigError("grammar line " + std::to_string(line_no) + ": builtin needs '-> type'");
      sig.return_type = toks[i + 1];
      g.builtins_[sig.name] = sig;
    } else if (kw == "sequence") {
      need(3);
      g.sugar_ = SequenceSugar{toks[1], toks[2]};
    } else if (kw == "rule") {
      need(3);
      std::string_view rest = line.substr(line.find(toks[1], 4) + toks[1].size());
      auto [tmpl, weight] = split_weight(rest);
      Rule r = rule_from_template(toks[1], tmpl);
      r.id = static_cast<int>(g.rules_.size());
      if (weight) r.weight = *weight;
      g.rules_.push_back(std::move(r));
    } else {
      throw ConfigError("grammar line " + std::to_string(line_no) + ": unknown keyword " + kw);
    }
  }
  g.index();
  g.validate();
  return g;
}

void Grammar::index() {
  by_type_.clear();
  for (const auto& r : rules_) by_type_[r.lhs].push_back(r.id);
  // Fixpoint for minimal derivation heights.
  heights_.clear();
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : rules_) {
      int h = 1;
      bool finite = true;
      for (const auto& t : r.slot_types) {
        auto it = heights_.find(t);
        if (it == heights_.end()) {
          finite = false;
          break;
        }
        h = std::max(h, it->second + 1);
      }
      if (!finite) continue;
      auto it = heights_.find(r.lhs);
      if (it == heights_.end() || h < it->second) {
        heights_[r.lhs] = h;
        changed = true;
      }
    }
  }
}

void Grammar::validate() const {
  if (root_.empty()) throw ConfigError("grammar " + name_ + ": no root type");
  if (!has_type(root_)) throw ConfigError("grammar " + name_ + ": root type " + root_ + " undeclared");
  for (const auto& r : rules_) {
    if (!has_type(r.lhs)) throw ConfigError("rule lhs " + r.lhs + " is not a declared nonterminal");
    if (!(r.weight > 0.0) || !std::isfinite(r.weight))
      throw ConfigError("rule " + r.text() + ": weight must be positive and finite");
    for (const auto& t : r.slot_types)
      if (!has_type(t)) throw ConfigError("rule " + r.text() + ": slot type " + t + " undeclared");
    const std::string& sem = semantic_type(r.lhs);
    switch (r.kind) {
      case NodeKind::Constant:
        if (sem != "int") throw ConfigError("rule " + r.text() + ": integer constant under " + sem);
        break;
      case NodeKind::Lambda:
        if (sem != "fn") throw ConfigError("rule " + r.text() + ": lambda under non-fn type " + sem);
        break;
      case NodeKind::Apply: {
        const auto* sig = builtin(r.head);
        if (!sig) throw ConfigError("rule " + r.text() + ": undeclared builtin " + r.head);
        if (sig->arity() != r.slots())
          throw ConfigError("rule " + r.text() + ": arity differs from builtin signature");
        if (sig->return_type != sem)
          throw ConfigError("rule " + r.text() + ": builtin returns " + sig->return_type +
                            " but nonterminal is " + sem);
        for (int i = 0; i < r.slots(); ++i)
          if (semantic_type(r.slot_types[static_cast<std::size_t>(i)]) !=
              sig->arg_types[static_cast<std::size_t>(i)])
            throw ConfigError("rule " + r.text() + ": slot " + std::to_string(i) +
                              " has the wrong semantic type");
        break;
      }
      default:
        break;
    }
  }
  for (const auto& [type, sem] : semantic_)
    if (!heights_.count(type)) throw ConfigError("nonterminal " + type + " derives no finite expression");
  if (sugar_) {
    if (!builtin(sugar_->cons) || builtin(sugar_->cons)->arity() != 2)
      throw ConfigError("sequence cons " + sugar_->cons + " must be a binary builtin");
    if (!builtin(sugar_->nil) || builtin(sugar_->nil)->arity() != 0)
      throw ConfigError("sequence nil " + sugar_->nil + " must be a nullary builtin");
  }
}

const std::vector<int>& Grammar::rules_for(const std::string& type) const {
  static const std::vector<int> empty;
  auto it = by_type_.find(type);
  return it == by_type_.end() ? empty : it->second;
}

const std::string& Grammar::semantic_type(const std::string& type) const {
  auto it = semantic_.find(type);
  if (it == semantic_.end()) throw ConfigError("unknown nonterminal " + type);
  return it->second;
}

const BuiltinSignature* Grammar::builtin(const std::string& name) const {
  auto it = builtins_.find(name);
  return it == builtins_.end() ? nullptr : &it->second;
}

int Grammar::min_height(const std::string& type) const {
  auto it = heights_.find(type);
  return it == heights_.end() ? -1 : it->second;
}

int Grammar::min_height(const Rule& r) const {
  int h = 1;
  for (const auto& t : r.slot_types) {
    const int ht = min_height(t);
    if (ht < 0) return -1;
    h = std::max(h, ht + 1);
  }
  return h;
}

void Grammar::set_weight(int rule_id, double w) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw ConfigError("weight must be positive and finite");
  rules_.at(static_cast<std::size_t>(rule_id)).weight = w;
}

void Grammar::apply_weights(std::string_view text) {
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos) throw ConfigError("weight line needs '<lhs> <template> : w'");
    const std::string lhs(line.substr(0, sp));
    auto [tmpl, weight] = split_weight(line.substr(sp));
    if (!weight) throw ConfigError("weight line missing ': <weight>'");
    const std::string want = print_program(*rule_from_template(lhs, tmpl).tmpl);
    bool found = false;
    for (int id : rules_for(lhs)) {
      if (rules_[static_cast<std::size_t>(id)].text() == want) {
        set_weight(id, *weight);
        found = true;
      }
    }
    if (!found) throw ConfigError("weight file: no rule " + lhs + " -> " + want);
  }
}

std::string Grammar::to_text() const {
  std::ostringstream out;
  out << "grammar " << name_ << "\n";
  out << "root " << root_ << "\n";
  out << "order " << (order_ == HoleOrder::LeftToRight ? "left-to-right" : "right-to-left") << "\n";
  for (const auto& t : type_order_) out << "nonterminal " << t << " " << semantic_.at(t) << "\n";
  for (const auto& [name, sig] : builtins_) {
    out << "builtin " << name;
    for (const auto& a : sig.arg_types) out << " " << a;
    out << " -> " << sig.return_type << "\n";
  }
  if (sugar_) out << "sequence " << sugar_->cons << " " << sugar_->nil << "\n";
  for (const auto& r : rules_) {
    out << "rule " << r.lhs << " " << r.text();
    if (r.weight != 1.0) out << " : " << r.weight;
    out << "\n";
  }
  return out.str();
}

std::uint64_t Grammar::hash() const { return fnv1a(to_text()); }

}  // namespace blended
