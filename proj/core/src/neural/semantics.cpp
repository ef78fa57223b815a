#include "blended/neural/semantics.hpp"

#include <set>

#include "blended/lang/syntax.hpp"
#include "blended/towers/towers.hpp"
#include "blended/util/error.hpp"

namespace blended {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::Blended:
      return "blended";
    case EncoderKind::Neural:
      return "neural";
    case EncoderKind::Sequence:
      return "sequence";
  }
  return "?";
}

EncoderKind parse_encoder(const std::string& name) {
  if (name == "blended") return EncoderKind::Blended;
  if (name == "neural") return EncoderKind::Neural;
  if (name == "sequence" || name == "rnn") return EncoderKind::Sequence;
  throw ConfigError("unknown encoder '" + name + "' (expected blended, neural or sequence)");
}

namespace {

const towers::TowerDomain* as_towers(const Domain& d) { return dynamic_cast<const towers::TowerDomain*>(&d); }

}  // namespace

Embedders::Embedders(const Domain& domain, ad::ParamStore& ps, int d, Rng& rng, const std::string& prefix)
    : domain_(&domain), d_(d) {
  if (d <= 0) throw ConfigError("embedding dimension must be positive");
  const Grammar& g = domain.grammar();
  const std::string p = prefix + ".";

  digit_table = ps.add(p + "digits", d, 11, rng);
  int_gru = ad::make_bigru(ps, p + "int", d, d, d, rng);
  list_gru = ad::make_bigru(ps, p + "list", d, d, d, rng);
  bool_table = ps.add(p + "bools", d, 2, rng);
  if (const auto* t = as_towers(domain)) {
    const int in = t->config().width * t->config().height + t->config().width + 2;
    grid_w1 = ps.add(p + "grid.w1", d, in, rng);
    grid_b1 = ps.add(p + "grid.b1", d, 1, rng, ad::Init::Zero);
    grid_w2 = ps.add(p + "grid.w2", d, d, rng);
    grid_b2 = ps.add(p + "grid.b2", d, 1, rng, ad::Init::Zero);
  }

  std::set<std::string> params;
  for (const Rule& r : g.rules())
    for (const auto& x : r.params) params.insert(x);
  for (const auto& x : params) names[x] = ps.add(p + "name." + x, d, 1, rng);

  for (const auto& [name, def] : domain.registry().all()) {
    Module m;
    m.arity = def.arity;
    if (def.arity == 0) {
      m.b = ps.add(p + "fn." + name + ".b", d, 1, rng);
    } else {
      m.w = ps.add(p + "fn." + name + ".w", d, d * def.arity, rng);
      m.b = ps.add(p + "fn." + name + ".b", d, 1, rng, ad::Init::Zero);
    }
    builtins[name] = m;
  }

  for (const auto& type : g.type_order()) {
    Module m;
    m.arity = 1;
    m.w = ps.add(p + "hole." + type + ".w", d, d, rng);
    m.b = ps.add(p + "hole." + type + ".b", d, 1, rng, ad::Init::Zero);
    hole_modules[type] = m;
    hole_vectors[type] = ps.add(p + "hole." + type + ".v", d, 1, rng);
  }

  std::set<std::string> toks{"(", ")", "lambda", kCallHead};
  for (const auto& [name, sig] : g.builtins()) toks.insert(name);
  for (const Rule& r : g.rules()) {
    if (r.kind == NodeKind::Variable) toks.insert(r.head);
    if (r.kind == NodeKind::Constant) toks.insert(std::to_string(r.value));
    for (const auto& x : r.params) toks.insert(x);
  }
  for (const auto& type : g.type_order()) toks.insert("?" + type);
  int next = 0;
  for (const auto& t : toks) vocab_[t] = next++;
  token_table = ps.add(p + "tokens", d, next, rng);
  seq_gru = ad::make_bigru(ps, p + "seq", d, d, d, rng);
  seq_fuse_w = ps.add(p + "seq.fuse_w", d, 2 * d, rng);
  seq_fuse_b = ps.add(p + "seq.fuse_b", d, 1, rng, ad::Init::Zero);
}

int Embedders::token_id(const std::string& tok) const {
  auto it = vocab_.find(tok);
  if (it == vocab_.end()) throw ConfigError("unknown program token '" + tok + "'");
  return it->second;
}

const ad::Vec* EmbedCache::find(const Value& v) const {
  auto it = map_.find(v);
  return it == map_.end() ? nullptr : &it->second;
}

void EmbedCache::put(const Value& v, ad::Vec e) { map_.emplace(v, std::move(e)); }

// ---------------------------------------------------------------------------

struct Encoder::Env {
  std::string name;
  std::optional<BlendedValue> value;  // nullopt: bound to null
  EnvPtr next;
};

Encoder::Encoder(const Embedders& emb, ad::Tape& tape, EmbedCache* frozen)
    : emb_(emb),
      domain_(emb.domain()),
      interp_(domain_.registry(), domain_.eval_options()),
      tape_(tape),
      frozen_(frozen) {}

Encoder::EnvPtr Encoder::bind(const EnvPtr& env, const std::string& name, std::optional<BlendedValue> v) {
  return std::make_shared<const Env>(Env{name, std::move(v), env});
}

Encoder::EnvPtr Encoder::from_context(const Context& c) {
  std::vector<const Binding*> chain;
  for (const Binding* b = c.head(); b; b = b->next.get()) chain.push_back(b);
  EnvPtr env;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const Binding* b = *it;
    env = bind(env, b->name,
               b->value ? std::optional<BlendedValue>(BlendedValue::of(*b->value)) : std::nullopt);
  }
  return env;
}

Context Encoder::to_context(const EnvPtr& env) {
  std::set<std::string> seen;
  std::vector<const Env*> keep;
  for (const Env* e = env.get(); e; e = e->next.get()) {
    if (!seen.insert(e->name).second) continue;
    if (e->value && e->value->is_concrete()) keep.push_back(e);
  }
  Context c;
  for (auto it = keep.rbegin(); it != keep.rend(); ++it) c = c.extend((*it)->name, *(*it)->value->concrete);
  return c;
}

const Encoder::Env* Encoder::lookup(const EnvPtr& env, const std::string& name) {
  for (const Env* e = env.get(); e; e = e->next.get())
    if (e->name == name) return e;
  return nullptr;
}

ad::Var Encoder::module(const Embedders::Module& m, const std::vector<ad::Var>& args) {
  if (static_cast<int>(args.size()) != m.arity) throw ShapeError("neural module arity mismatch");
  if (m.arity == 0) return tape_.param(m.b);
  const ad::Var in = args.size() == 1 ? args[0] : tape_.concat(args);
  return tape_.relu(tape_.linear(m.w, m.b, in));
}

ad::Var Encoder::embed_int(std::int64_t v) {
  const std::string digits = std::to_string(v);
  std::vector<ad::Var> seq;
  seq.reserve(digits.size());
  for (char ch : digits) seq.push_back(tape_.param(emb_.digit_table, ch == '-' ? 10 : ch - '0'));
  return ad::bi_gru_encode(tape_, emb_.int_gru, seq);
}

ad::Var Encoder::embed_grid(const ImageGrid& g, const TowerState* state) {
  if (emb_.grid_w1 < 0) throw ConfigError("this domain has no image embedder");
  const auto* t = as_towers(domain_);
  const int W = t->config().width, H = t->config().height;
  if (g.width != W || g.height != H) throw ShapeError("image grid does not match the tower configuration");
  ad::Vec x = ad::Vec::Zero(W * H + W + 2);
  for (std::size_t i = 0; i < g.cells.size(); ++i) x(static_cast<Eigen::Index>(i)) = g.cells[i] ? 1.0 : 0.0;
  if (state) {
    if (state->hand >= 0 && state->hand < W) x(W * H + state->hand) = 1.0;
    x(W * H + W + (state->orientation < 0 ? 0 : 1)) = 1.0;
  }
  const ad::Var h = tape_.relu(tape_.linear(emb_.grid_w1, emb_.grid_b1, tape_.constant(std::move(x))));
  return tape_.relu(tape_.linear(emb_.grid_w2, emb_.grid_b2, h));
}

ad::Var Encoder::embed_closure(const Closure& f) {
  const std::string& sv = domain_.registry().state_variable();
  if (f.params.size() == 1 && f.params[0] == sv) {
    // Deferred statement: represent it by its effect on the captured state.
    const Value arg[] = {f.env.lookup(sv)};
    return embed_value(interp_.apply_closure(f, arg));
  }
  EnvPtr env = from_context(f.env);
  for (const auto& x : f.params) env = bind(env, x, std::nullopt);
  return embed(eval(*f.body, env, true, true));
}

ad::Var Encoder::embed_value(const Value& v) {
  if (v.is_closure()) return embed_closure(v.as_closure());
  if (auto it = memo_.find(v); it != memo_.end()) return it->second;
  if (frozen_) {
    if (const ad::Vec* e = frozen_->find(v)) {
      const ad::Var out = tape_.constant(*e);
      memo_.emplace(v, out);
      return out;
    }
  }
  ad::Var out;
  if (v.is_int()) {
    out = embed_int(v.as_int());
  } else if (v.is_bool()) {
    out = tape_.param(emb_.bool_table, v.as_bool() ? 1 : 0);
  } else if (v.is_list()) {
    std::vector<ad::Var> seq;
    seq.reserve(v.as_list().size());
    for (auto x : v.as_list()) seq.push_back(embed_value(Value(x)));
    out = ad::bi_gru_encode(tape_, emb_.list_gru, seq);
  } else if (v.is_tower()) {
    const auto* t = as_towers(domain_);
    if (!t) throw ConfigError("tower state outside the tower domain");
    out = embed_grid(towers::render(v.as_tower(), t->config()), &v.as_tower());
  } else if (v.is_grid()) {
    out = embed_grid(v.as_grid(), nullptr);
  } else {
    throw ConfigError("cannot embed a " + v.kind_name());
  }
  memo_.emplace(v, out);
  if (frozen_) frozen_->put(v, tape_.value(out));
  return out;
}

ad::Var Encoder::embed(const BlendedValue& b) { return b.is_concrete() ? embed_value(*b.concrete) : b.vec; }

ad::Var Encoder::encode_hole(const std::string& type, const std::optional<BlendedValue>& context) {
  auto vit = emb_.hole_vectors.find(type);
  if (vit == emb_.hole_vectors.end()) throw ConfigError("no placeholder for hole type " + type);
  if (!context) return tape_.param(vit->second);
  return module(emb_.hole_modules.at(type), {embed(*context)});
}

BlendedValue Encoder::eval(const Expr& e, const EnvPtr& env, bool blended, bool in_lambda) {
  switch (e.kind()) {
    case NodeKind::Constant: {
      Value k(e.value());
      if (blended) return BlendedValue::of(std::move(k));
      return BlendedValue::abstract(embed_value(k));
    }
    case NodeKind::Variable: {
      const Env* b = lookup(env, e.name());
      if (!b) throw EvalError("unbound variable " + e.name());
      if (!b->value) {
        auto it = emb_.names.find(e.name());
        if (it == emb_.names.end()) throw ConfigError("no embedding for variable " + e.name());
        return BlendedValue::abstract(tape_.param(it->second));
      }
      if (blended || !b->value->is_concrete()) return *b->value;
      return BlendedValue::abstract(embed_value(*b->value->concrete));
    }
    case NodeKind::Hole: {
      std::optional<BlendedValue> ctx;
      if (!in_lambda)
        if (const Env* b = lookup(env, domain_.context_variable()); b && b->value) ctx = *b->value;
      return BlendedValue::abstract(encode_hole(e.type(), ctx));
    }
    case NodeKind::Lambda: {
      if (blended && e.complete()) return BlendedValue::of(Value(Closure{e.params(), e.children()[0], to_context(env)}));
      EnvPtr inner = env;
      for (const auto& x : e.params()) inner = bind(inner, x, std::nullopt);
      return BlendedValue::abstract(embed(eval(e.body(), inner, blended, true)));
    }
    case NodeKind::Apply:
      return apply(e, env, blended, in_lambda);
  }
  throw Error("unreachable");
}

BlendedValue Encoder::apply(const Expr& e, const EnvPtr& env, bool blended, bool in_lambda) {
  if (e.is_call()) {
    const Expr& fn = e.child(0);
    std::vector<BlendedValue> args;
    for (std::size_t i = 1; i < e.children().size(); ++i) args.push_back(eval(e.child(i), env, blended, in_lambda));
    if (fn.kind() != NodeKind::Lambda || fn.params().size() != args.size())
      throw EvalError("only lambda expressions can be applied");
    EnvPtr inner = env;
    for (std::size_t i = 0; i < args.size(); ++i) inner = bind(inner, fn.params()[i], args[i]);
    return eval(fn.body(), inner, blended, in_lambda);
  }

  const BuiltinDef& def = domain_.registry().get(e.name());
  if (static_cast<int>(e.children().size()) != def.arity)
    throw EvalError("builtin " + e.name() + " expects " + std::to_string(def.arity) + " arguments");
  const std::string& sv = domain_.registry().state_variable();
  const Env* state = lookup(env, sv);
  const bool state_known = !state || (state->value && state->value->is_concrete());

  std::vector<BlendedValue> args;
  args.reserve(e.children().size());
  bool all_concrete = true;
  for (std::size_t i = 0; i < e.children().size(); ++i) {
    const Expr& a = e.child(i);
    BlendedValue v;
    if (def.mode(i) == ArgMode::Deferred) {
      if (blended && a.complete() && state_known)
        v = BlendedValue::of(Value(interp_.defer(e.children()[i], to_context(env))));
      else
        v = BlendedValue::abstract(embed(eval(a, env, blended, in_lambda)));
    } else if (def.mode(i) == ArgMode::ThreadState && i > 0) {
      v = eval(a, bind(env, sv, args.back()), blended, in_lambda);
    } else {
      v = eval(a, env, blended, in_lambda);
    }
    all_concrete = all_concrete && v.is_concrete();
    args.push_back(std::move(v));
  }

  if (blended && all_concrete && state_known) {
    std::vector<Value> vals;
    vals.reserve(args.size());
    for (auto& a : args) vals.push_back(std::move(*a.concrete));
    return BlendedValue::of(interp_.run_builtin(e.name(), vals, to_context(env)));
  }
  std::vector<ad::Var> vecs;
  vecs.reserve(args.size());
  for (const auto& a : args) vecs.push_back(embed(a));
  return BlendedValue::abstract(module(emb_.builtins.at(e.name()), vecs));
}

ad::Var Encoder::eval_neural(const Expr& e, const Context& c) { return embed(eval(e, from_context(c), false, false)); }

BlendedValue Encoder::eval_blended(const Expr& e, const Context& c) { return eval(e, from_context(c), true, false); }

ad::Var Encoder::encode_sequence(const Expr& e) {
  if (auto it = seq_memo_.find(&e); it != seq_memo_.end()) return it->second;
  std::vector<ad::Var> seq;
  for (const auto& tok : program_tokens(e)) seq.push_back(tape_.param(emb_.token_table, emb_.token_id(tok)));
  const ad::Var out = ad::bi_gru_encode(tape_, emb_.seq_gru, seq);
  seq_memo_.emplace(&e, out);
  return out;
}

ad::Var Encoder::encode(EncoderKind kind, const Expr& sketch, const Value& input) {
  switch (kind) {
    case EncoderKind::Blended:
      return embed(eval_blended(sketch, domain_.input_context(input)));
    case EncoderKind::Neural:
      return eval_neural(sketch, domain_.input_context(input));
    case EncoderKind::Sequence: {
      const ad::Var s = encode_sequence(sketch);
      return tape_.relu(tape_.linear(emb_.seq_fuse_w, emb_.seq_fuse_b, tape_.concat({s, embed_value(input)})));
    }
  }
  throw Error("unreachable");
}

}  // namespace blended
