#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "blended/autodiff/autodiff.hpp"
#include "blended/interp/domain.hpp"
#include "blended/lang/expression.hpp"

namespace blended {

enum class EncoderKind { Blended, Neural, Sequence };

std::string to_string(EncoderKind k);
EncoderKind parse_encoder(const std::string& name);

// Result of blended evaluation: a concrete value or a d-vector on a tape.
struct BlendedValue {
  std::optional<Value> concrete;
  ad::Var vec = -1;

  bool is_concrete() const { return concrete.has_value(); }
  static BlendedValue of(Value v) { return BlendedValue{std::move(v), -1}; }
  static BlendedValue abstract(ad::Var v) { return BlendedValue{std::nullopt, v}; }
};

// Parameters of every state embedder and neural module for one domain.
class Embedders {
 public:
  Embedders(const Domain& domain, ad::ParamStore& ps, int d, Rng& rng, const std::string& prefix = "sem");

  int d() const { return d_; }
  const Domain& domain() const { return *domain_; }

  // Token ids for the sequence encoder (printed-program vocabulary).
  int token_id(const std::string& tok) const;
  const std::map<std::string, int>& vocabulary() const { return vocab_; }

  struct Module {
    int w = -1;  // d x (d * arity); -1 for nullary builtins
    int b = -1;
    int arity = 0;
  };

  // Digits 0-9 then '-'.
  int digit_table = -1;
  ad::BiGru int_gru;
  ad::BiGru list_gru;
  int bool_table = -1;
  int grid_w1 = -1, grid_b1 = -1, grid_w2 = -1, grid_b2 = -1;
  std::map<std::string, int> names;           // null-bound variables
  std::map<std::string, Module> builtins;     // f^nn
  std::map<std::string, Module> hole_modules; // h_T(Embed(context))
  std::map<std::string, int> hole_vectors;    // holes without usable context
  int token_table = -1;
  ad::BiGru seq_gru;
  int seq_fuse_w = -1, seq_fuse_b = -1;

 private:
  const Domain* domain_;
  int d_;
  std::map<std::string, int> vocab_;
};

// Frozen embeddings of concrete values, reused across tapes at inference time.
class EmbedCache {
 public:
  const ad::Vec* find(const Value& v) const;
  void put(const Value& v, ad::Vec e);
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<Value, ad::Vec, ValueHash> map_;
};

// Evaluator bound to one tape. Memoizes embeddings of concrete values.
// Concrete execution failures inside blended evaluation throw EvalError:
// the sketch cannot be completed.
class Encoder {
 public:
  Encoder(const Embedders& emb, ad::Tape& tape, EmbedCache* frozen = nullptr);

  ad::Var embed_value(const Value& v);
  ad::Var embed(const BlendedValue& b);
  // Placeholder vector for a hole; `context` is the value (or vector) of the
  // domain's context variable, absent inside lambdas.
  ad::Var encode_hole(const std::string& type, const std::optional<BlendedValue>& context);

  ad::Var eval_neural(const Expr& e, const Context& c);
  BlendedValue eval_blended(const Expr& e, const Context& c);
  ad::Var encode_sequence(const Expr& e);

  // Program half of rep's per-example input under the chosen encoder.
  ad::Var encode(EncoderKind kind, const Expr& sketch, const Value& input);

  ad::Tape& tape() { return tape_; }

 private:
  struct Env;
  using EnvPtr = std::shared_ptr<const Env>;

  BlendedValue eval(const Expr& e, const EnvPtr& env, bool blended, bool in_lambda);
  BlendedValue apply(const Expr& e, const EnvPtr& env, bool blended, bool in_lambda);
  ad::Var module(const Embedders::Module& m, const std::vector<ad::Var>& args);
  ad::Var embed_closure(const Closure& f);
  ad::Var embed_grid(const ImageGrid& g, const TowerState* state);
  ad::Var embed_int(std::int64_t v);

  static EnvPtr bind(const EnvPtr& env, const std::string& name, std::optional<BlendedValue> v);
  static EnvPtr from_context(const Context& c);
  static Context to_context(const EnvPtr& env);
  static const Env* lookup(const EnvPtr& env, const std::string& name);

  const Embedders& emb_;
  const Domain& domain_;
  Interpreter interp_;
  ad::Tape& tape_;
  EmbedCache* frozen_;
  std::unordered_map<Value, ad::Var, ValueHash> memo_;
  std::unordered_map<const Expr*, ad::Var> seq_memo_;
};

}  // namespace blended
