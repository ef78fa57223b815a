#include "blended/lang/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <optional>

#include "blended/util/error.hpp"

namespace blended {

namespace {

using PE = ParseError;

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  SExpr read_top() {
    skip_ws();
    if (pos_ >= text_.size()) throw PE(PE::Kind::Syntax, pos_, "empty program text");
    SExpr e = read();
    skip_ws();
    if (pos_ != text_.size()) throw PE(PE::Kind::Syntax, pos_, "trailing characters after expression");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  SExpr read() {
    skip_ws();
    if (pos_ >= text_.size()) throw PE(PE::Kind::Syntax, pos_, "unexpected end of input");
    const char c = text_[pos_];
    if (c == '(' || c == '[') {
      const char close = c == '(' ? ')' : ']';
      SExpr list;
      list.is_atom = false;
      list.bracket = c == '[';
      list.pos = pos_++;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size())
          throw PE(PE::Kind::Syntax, list.pos, std::string("unclosed '") + c + "'");
        if (text_[pos_] == close) {
          ++pos_;
          return list;
        }
        if (text_[pos_] == ')' || text_[pos_] == ']')
          throw PE(PE::Kind::Syntax, pos_, std::string("mismatched '") + text_[pos_] + "'");
        list.items.push_back(read());
      }
    }
    if (c == ')' || c == ']') throw PE(PE::Kind::Syntax, pos_, std::string("unexpected '") + c + "'");
    SExpr atom;
    atom.pos = pos_;
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')' || d == '[' || d == ']')
        break;
      ++pos_;
    }
    atom.atom = std::string(text_.substr(atom.pos, pos_ - atom.pos));
    return atom;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

bool as_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

struct Scope {
  std::vector<std::string> names;
  bool has(const std::string& n) const {
    return std::find(names.begin(), names.end(), n) != names.end();
  }
};

class ProgramParser {
 public:
  explicit ProgramParser(const Grammar& g) : g_(g) {}

  ExprPtr parse(const SExpr& s, const std::string& type, Scope& scope) {
    if (!g_.has_type(type)) throw PE(PE::Kind::UnknownSymbol, s.pos, "unknown nonterminal " + type);
    if (s.is_atom) return parse_atom(s, type, scope);
    if (s.bracket) return parse(desugar(s, 0), type, scope);
    if (s.items.empty()) throw PE(PE::Kind::Syntax, s.pos, "empty list");
    const SExpr& head = s.items[0];
    if (!head.is_atom) return parse_call(s, type, scope);
    if (head.atom == "lambda") return parse_lambda(s, type, scope);
    return parse_apply(s, type, scope);
  }

 private:
  SExpr desugar(const SExpr& s, std::size_t from) {
    if (!g_.sequence_sugar())
      throw PE(PE::Kind::Syntax, s.pos, "bracket lists are not defined for grammar " + g_.name());
    const auto& sugar = *g_.sequence_sugar();
    SExpr out;
    out.is_atom = false;
    out.pos = from < s.items.size() ? s.items[from].pos : s.pos;
    SExpr head;
    head.pos = out.pos;
    if (from >= s.items.size()) {
      head.atom = sugar.nil;
      out.items.push_back(head);
      return out;
    }
    head.atom = sugar.cons;
    out.items.push_back(head);
    out.items.push_back(s.items[from]);
    out.items.push_back(desugar(s, from + 1));
    return out;
  }

  bool symbol_known_elsewhere(const std::function<bool(const Rule&)>& pred) const {
    return std::any_of(g_.rules().begin(), g_.rules().end(), pred);
  }

  ExprPtr parse_atom(const SExpr& s, const std::string& type, const Scope& scope) {
    const std::string& a = s.atom;
    if (a.size() > 1 && a[0] == '?') {
      const std::string t = a.substr(1);
      if (!g_.has_type(t)) throw PE(PE::Kind::UnknownSymbol, s.pos, "unknown hole type " + t);
      if (t != type) throw PE(PE::Kind::TypeMismatch, s.pos, "hole ?" + t + " where " + type + " expected");
      return Expr::hole(t);
    }
    std::int64_t v = 0;
    if (as_int(a, v)) {
      for (int id : g_.rules_for(type)) {
        const Rule& r = g_.rule(id);
        if (r.kind == NodeKind::Constant && r.value == v) return r.tmpl;
      }
      if (g_.semantic_type(type) == "int") return Expr::constant(type, v);
      if (symbol_known_elsewhere([&](const Rule& r) { return r.kind == NodeKind::Constant && r.value == v; }))
        throw PE(PE::Kind::TypeMismatch, s.pos, "constant " + a + " where " + type + " expected");
      throw PE(PE::Kind::UnknownSymbol, s.pos, "constant " + a + " not in grammar");
    }
    for (int id : g_.rules_for(type)) {
      const Rule& r = g_.rule(id);
      if (r.kind == NodeKind::Variable && r.head == a) return r.tmpl;
    }
    if (scope.has(a)) return Expr::variable(type, a);
    if (symbol_known_elsewhere([&](const Rule& r) { return r.kind == NodeKind::Variable && r.head == a; }))
      throw PE(PE::Kind::TypeMismatch, s.pos, "variable " + a + " where " + type + " expected");
    if (g_.builtin(a)) throw PE(PE::Kind::Syntax, s.pos, "builtin " + a + " must be applied: (" + a + " ...)");
    throw PE(PE::Kind::UnknownSymbol, s.pos, "unknown symbol " + a);
  }

  std::vector<std::string> read_params(const SExpr& s) {
    if (s.is_atom || s.bracket) throw PE(PE::Kind::Syntax, s.pos, "lambda parameters must be a list");
    std::vector<std::string> out;
    for (const auto& p : s.items) {
      if (!p.is_atom) throw PE(PE::Kind::Syntax, p.pos, "lambda parameter must be a symbol");
      out.push_back(p.atom);
    }
    return out;
  }

  ExprPtr parse_lambda(const SExpr& s, const std::string& type, Scope& scope) {
    if (s.items.size() != 3) throw PE(PE::Kind::Syntax, s.pos, "lambda needs (lambda (params) body)");
    const auto params = read_params(s.items[1]);
    std::optional<PE> first_error;
    bool any_lambda = false;
    for (int id : g_.rules_for(type)) {
      const Rule& r = g_.rule(id);
      if (r.kind != NodeKind::Lambda) continue;
      any_lambda = true;
      if (r.params != params) continue;
      const auto mark = scope.names.size();
      try {
        scope.names.insert(scope.names.end(), params.begin(), params.end());
        ExprPtr body = parse(s.items[2], r.slot_types[0], scope);
        scope.names.resize(mark);
        return Expr::lambda(type, params, std::move(body));
      } catch (const PE& e) {
        scope.names.resize(mark);
        if (!first_error) first_error = e;
      }
    }
    if (first_error) throw *first_error;
    if (any_lambda)
      throw PE(PE::Kind::ArityMismatch, s.pos, "no lambda with these parameters for type " + type);
    throw PE(PE::Kind::TypeMismatch, s.pos, "lambda where " + type + " expected");
  }

  ExprPtr parse_call(const SExpr& s, const std::string& type, Scope& scope) {
    const SExpr& fn = s.items[0];
    if (fn.is_atom || fn.bracket || fn.items.size() != 3 || !fn.items[0].is_atom ||
        fn.items[0].atom != "lambda")
      throw PE(PE::Kind::Syntax, fn.pos, "only lambda literals can be applied");
    const auto params = read_params(fn.items[1]);
    if (params.size() != s.items.size() - 1)
      throw PE(PE::Kind::ArityMismatch, s.pos,
               "lambda takes " + std::to_string(params.size()) + " arguments, given " +
                   std::to_string(s.items.size() - 1));
    std::vector<ExprPtr> args;
    for (std::size_t i = 1; i < s.items.size(); ++i) args.push_back(parse(s.items[i], type, scope));
    const auto mark = scope.names.size();
    scope.names.insert(scope.names.end(), params.begin(), params.end());
    ExprPtr body = parse(fn.items[2], type, scope);
    scope.names.resize(mark);
    return Expr::call(type, Expr::lambda(type, params, std::move(body)), std::move(args));
  }

  ExprPtr parse_apply(const SExpr& s, const std::string& type, Scope& scope) {
    const std::string& head = s.items[0].atom;
    const int nargs = static_cast<int>(s.items.size()) - 1;
    std::vector<const Rule*> candidates;
    bool any_head = false;
    for (int id : g_.rules_for(type)) {
      const Rule& r = g_.rule(id);
      if (r.kind != NodeKind::Apply || r.head != head) continue;
      any_head = true;
      if (r.slots() == nargs) candidates.push_back(&r);
    }
    if (candidates.empty()) {
      if (any_head)
        throw PE(PE::Kind::ArityMismatch, s.pos, head + " given " + std::to_string(nargs) + " arguments");
      if (const auto* sig = g_.builtin(head)) {
        if (sig->arity() != nargs)
          throw PE(PE::Kind::ArityMismatch, s.pos, head + " given " + std::to_string(nargs) + " arguments");
        throw PE(PE::Kind::TypeMismatch, s.pos, head + " where " + type + " expected");
      }
      throw PE(PE::Kind::UnknownSymbol, s.items[0].pos, "unknown symbol " + head);
    }
    std::optional<PE> first_error;
    for (const Rule* r : candidates) {
      try {
        std::vector<ExprPtr> args;
        for (int i = 0; i < nargs; ++i)
          args.push_back(parse(s.items[static_cast<std::size_t>(i) + 1],
                               r->slot_types[static_cast<std::size_t>(i)], scope));
        if (nargs == 0) return r->tmpl;
        return Expr::apply(type, head, std::move(args));
      } catch (const PE& e) {
        if (!first_error) first_error = e;
      }
    }
    throw *first_error;
  }

  const Grammar& g_;
};

void print_into(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::Constant:
      out += std::to_string(e.value());
      return;
    case NodeKind::Variable:
      out += e.name();
      return;
    case NodeKind::Hole:
      out += '?';
      out += e.type();
      return;
    case NodeKind::Lambda:
      out += "(lambda (";
      for (std::size_t i = 0; i < e.params().size(); ++i) {
        if (i) out += ' ';
        out += e.params()[i];
      }
      out += ") ";
      print_into(e.body(), out);
      out += ')';
      return;
    case NodeKind::Apply:
      out += '(';
      if (e.is_call()) {
        for (std::size_t i = 0; i < e.children().size(); ++i) {
          if (i) out += ' ';
          print_into(e.child(i), out);
        }
      } else {
        out += e.name();
        for (const auto& c : e.children()) {
          out += ' ';
          print_into(*c, out);
        }
      }
      out += ')';
      return;
  }
}

}  // namespace

SExpr read_sexpr(std::string_view text) { return Reader(text).read_top(); }

ExprPtr parse_program(std::string_view text, const Grammar& g) {
  return parse_program(text, g, g.root_type());
}

ExprPtr parse_program(std::string_view text, const Grammar& g, const std::string& type) {
  const SExpr s = read_sexpr(text);
  Scope scope;
  return ProgramParser(g).parse(s, type, scope);
}

std::string print_program(const Expr& e) {
  std::string out;
  print_into(e, out);
  return out;
}

std::vector<std::string> program_tokens(const Expr& e) {
  const std::string text = print_program(e);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ') {
      ++i;
    } else if (c == '(' || c == ')') {
      out.emplace_back(1, c);
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '(' && text[j] != ')') ++j;
      out.push_back(text.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

void check_types(const Expr& e, const Grammar& g, const std::string& type) {
  std::vector<std::string> scope;
  std::function<void(const Expr&, const std::string&)> go = [&](const Expr& n, const std::string& want) {
    if (n.type() != want)
      throw ConfigError("node " + print_program(n) + " has type " + n.type() + ", expected " + want);
    if (n.is_hole()) return;
    if (n.is_call()) {
      const Expr& fn = n.child(0);
      if (fn.kind() != NodeKind::Lambda || fn.params().size() + 1 != n.children().size())
        throw ConfigError("bad application " + print_program(n));
      for (std::size_t i = 1; i < n.children().size(); ++i) go(n.child(i), want);
      const auto mark = scope.size();
      scope.insert(scope.end(), fn.params().begin(), fn.params().end());
      go(fn.body(), want);
      scope.resize(mark);
      return;
    }
    for (int id : g.rules_for(want)) {
      const Rule& r = g.rule(id);
      if (!r.matches(n)) continue;
      if (r.kind == NodeKind::Lambda) {
        const auto mark = scope.size();
        scope.insert(scope.end(), r.params.begin(), r.params.end());
        go(n.body(), r.slot_types[0]);
        scope.resize(mark);
      } else {
        for (std::size_t i = 0; i < n.children().size(); ++i) go(n.child(i), r.slot_types[i]);
      }
      return;
    }
    if (n.kind() == NodeKind::Constant && g.semantic_type(want) == "int") return;
    if (n.kind() == NodeKind::Variable && std::find(scope.begin(), scope.end(), n.name()) != scope.end())
      return;
    throw ConfigError("node " + print_program(n) + " is not derivable from " + want);
  };
  go(e, type);
}

bool well_typed(const Expr& e, const Grammar& g) {
  try {
    check_types(e, g, g.root_type());
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

}  // namespace blended
