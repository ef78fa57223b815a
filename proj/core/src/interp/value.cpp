#include "blended/interp/value.hpp"

#include <sstream>

#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"
#include "blended/util/rng.hpp"

namespace blended {

int ImageGrid::column_height(int x) const {
  for (int y = height - 1; y >= 0; --y)
    if (at(x, y)) return y + 1;
  return 0;
}

Context Context::extend(std::string name, std::optional<Value> value) const {
  return Context(std::make_shared<const Binding>(Binding{std::move(name), std::move(value), head_}));
}

const std::optional<Value>* Context::find(const std::string& name) const {
  for (const Binding* b = head_.get(); b; b = b->next.get())
    if (b->name == name) return &b->value;
  return nullptr;
}

bool Context::bound(const std::string& name) const { return find(name) != nullptr; }

const Value& Context::lookup(const std::string& name) const {
  const auto* slot = find(name);
  if (!slot) throw EvalError("unbound variable " + name);
  if (!slot->has_value()) throw EvalError("variable " + name + " is bound to null");
  return **slot;
}

namespace {

template <typename T>
const T& get_or_throw(const Value::Storage& v, const char* want, const Value& self) {
  if (const T* p = std::get_if<T>(&v)) return *p;
  throw EvalError(std::string("expected ") + want + ", got " + self.kind_name());
}

}  // namespace

std::int64_t Value::as_int() const { return get_or_throw<std::int64_t>(v_, "int", *this); }
bool Value::as_bool() const { return get_or_throw<bool>(v_, "bool", *this); }
const IntList& Value::as_list() const { return get_or_throw<IntList>(v_, "list", *this); }
const TowerState& Value::as_tower() const { return get_or_throw<TowerState>(v_, "tower state", *this); }
const ImageGrid& Value::as_grid() const { return get_or_throw<ImageGrid>(v_, "image grid", *this); }
const Closure& Value::as_closure() const { return get_or_throw<Closure>(v_, "closure", *this); }

std::string Value::kind_name() const {
  static const char* names[] = {"int", "bool", "list", "tower state", "image grid", "closure"};
  return names[v_.index()];
}

std::string Value::to_string() const {
  std::ostringstream out;
  switch (v_.index()) {
    case 0:
      out << as_int();
      break;
    case 1:
      out << (as_bool() ? "true" : "false");
      break;
    case 2: {
      out << '[';
      const auto& l = as_list();
      for (std::size_t i = 0; i < l.size(); ++i) out << (i ? "," : "") << l[i];
      out << ']';
      break;
    }
    case 3: {
      const auto& s = as_tower();
      out << "(hand=" << s.hand << ", orientation=" << s.orientation << ", blocks=" << s.history.size() << ")";
      break;
    }
    case 4:
      out << "<grid " << as_grid().width << "x" << as_grid().height << ">";
      break;
    case 5: {
      const auto& c = as_closure();
      out << "<closure (";
      for (std::size_t i = 0; i < c.params.size(); ++i) out << (i ? " " : "") << c.params[i];
      out << ") " << print_program(*c.body) << ">";
      break;
    }
  }
  return out.str();
}

bool operator==(const Value& a, const Value& b) {
  if (a.v_.index() != b.v_.index()) return false;
  if (a.is_closure()) {
    const auto& x = a.as_closure();
    const auto& y = b.as_closure();
    return x.params == y.params && equal(*x.body, *y.body) && x.env.head() == y.env.head();
  }
  return a.v_ == b.v_;
}

std::size_t hash_value(const Value& v) {
  std::uint64_t h = splitmix64(v.storage().index() + 17);
  switch (v.storage().index()) {
    case 0:
      return splitmix64(h ^ static_cast<std::uint64_t>(v.as_int()));
    case 1:
      return splitmix64(h ^ (v.as_bool() ? 1 : 2));
    case 2:
      for (auto x : v.as_list()) h = splitmix64(h ^ static_cast<std::uint64_t>(x));
      return h;
    case 3: {
      const auto& s = v.as_tower();
      h = splitmix64(h ^ static_cast<std::uint64_t>(s.hand * 4 + s.orientation + 1));
      for (const auto& b : s.history)
        h = splitmix64(h ^ static_cast<std::uint64_t>(((b.x * 131 + b.y) * 7 + b.w) * 7 + b.h));
      return h;
    }
    case 4: {
      const auto& g = v.as_grid();
      for (auto c : g.cells) h = h * 3 + c;
      return splitmix64(h);
    }
    default: {
      const auto& c = v.as_closure();
      return splitmix64(h ^ hash_expr(*c.body) ^ reinterpret_cast<std::uintptr_t>(c.env.head()));
    }
  }
}

}  // namespace blended
