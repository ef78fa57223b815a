#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "blended/lang/expression.hpp"
#include "blended/lang/grammar.hpp"

namespace blended {

// Untyped s-expression. `bracket` marks `[...]` lists.
struct SExpr {
  bool is_atom = true;
  bool bracket = false;
  std::string atom;
  std::vector<SExpr> items;
  std::size_t pos = 0;
};

SExpr read_sexpr(std::string_view text);

// Grammar-directed parse: every node is typed by the production that derives it.
// `?T` is a hole of type T. Integer literals are also accepted wherever the
// nonterminal's semantic type is `int`, and ((lambda (x) body) args) is accepted
// with parameters and arguments sharing the expected type.
ExprPtr parse_program(std::string_view text, const Grammar& g);
ExprPtr parse_program(std::string_view text, const Grammar& g, const std::string& type);

// Canonical single-line form. Never uses bracket sugar.
std::string print_program(const Expr& e);

// Tokens of the canonical printed form: "(", ")", atoms.
std::vector<std::string> program_tokens(const Expr& e);

// Throws ConfigError when `e` is not derivable under `g` from `type`
// (same acceptance rules as parse_program).
void check_types(const Expr& e, const Grammar& g, const std::string& type);
bool well_typed(const Expr& e, const Grammar& g);

}  // namespace blended
