#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blended/lang/expression.hpp"

namespace blended {

using IntList = std::vector<std::int64_t>;

// One placed block: lower-left corner (x, y), footprint [x, x+w) x [y, y+h).
struct Block {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool operator==(const Block&) const = default;
};

struct TowerState {
  int hand = 0;
  int orientation = 1;
  std::vector<Block> history;
  bool operator==(const TowerState&) const = default;
};

// Binary occupancy grid, row-major with row 0 at the bottom.
struct ImageGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  ImageGrid() = default;
  ImageGrid(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w * h), 0) {}

  bool at(int x, int y) const { return cells[static_cast<std::size_t>(y * width + x)] != 0; }
  void set(int x, int y, bool v = true) { cells[static_cast<std::size_t>(y * width + x)] = v ? 1 : 0; }
  // Highest occupied row + 1 in column x (0 for an empty column).
  int column_height(int x) const;
  bool operator==(const ImageGrid&) const = default;
};

class Value;
struct Binding;

// Persistent variable environment. Extending never mutates the original.
class Context {
 public:
  Context() = default;

  // Binds `name` to `value`; std::nullopt marks a lambda parameter whose value is unknown.
  Context extend(std::string name, std::optional<Value> value) const;

  bool bound(const std::string& name) const;
  // Throws EvalError when unbound or bound to null.
  const Value& lookup(const std::string& name) const;
  // nullptr when unbound; an empty optional when bound to null.
  const std::optional<Value>* find(const std::string& name) const;
  const Binding* head() const { return head_.get(); }

 private:
  explicit Context(std::shared_ptr<const Binding> head) : head_(std::move(head)) {}
  std::shared_ptr<const Binding> head_;
};

struct Closure {
  std::vector<std::string> params;
  ExprPtr body;
  Context env;
};

class Value {
 public:
  using Storage = std::variant<std::int64_t, bool, IntList, TowerState, ImageGrid, Closure>;

  Value() : v_(std::int64_t{0}) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(std::int64_t{i}) {}
  Value(bool b) : v_(b) {}
  Value(IntList l) : v_(std::move(l)) {}
  Value(TowerState s) : v_(std::move(s)) {}
  Value(ImageGrid g) : v_(std::move(g)) {}
  Value(Closure c) : v_(std::move(c)) {}

  bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_list() const { return std::holds_alternative<IntList>(v_); }
  bool is_tower() const { return std::holds_alternative<TowerState>(v_); }
  bool is_grid() const { return std::holds_alternative<ImageGrid>(v_); }
  bool is_closure() const { return std::holds_alternative<Closure>(v_); }

  // Accessors throw EvalError on a kind mismatch.
  std::int64_t as_int() const;
  bool as_bool() const;
  const IntList& as_list() const;
  const TowerState& as_tower() const;
  const ImageGrid& as_grid() const;
  const Closure& as_closure() const;

  const Storage& storage() const { return v_; }
  std::string kind_name() const;
  std::string to_string() const;

  friend bool operator==(const Value& a, const Value& b);

 private:
  Storage v_;
};

std::size_t hash_value(const Value& v);

struct ValueHash {
  std::size_t operator()(const Value& v) const { return hash_value(v); }
};

struct Binding {
  std::string name;
  std::optional<Value> value;
  std::shared_ptr<const Binding> next;
};

}  // namespace blended
