#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blended/util/rng.hpp"

namespace blended::ad {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;
  Mat v;
  Mat vhat;
};

enum class Init { Uniform, Zero };

class ParamStore {
 public:
  // Uniform(-1/sqrt(cols), 1/sqrt(cols)) unless Init::Zero. Names are unique.
  int add(const std::string& name, int rows, int cols, Rng& rng, Init init = Init::Uniform);
  int find(const std::string& name) const;  // -1 when absent
  int id(const std::string& name) const;    // throws when absent
  bool has(const std::string& name) const { return find(name) >= 0; }

  Param& at(int id) { return params_[static_cast<std::size_t>(id)]; }
  const Param& at(int id) const { return params_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(params_.size()); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Copies values (not optimizer state) for every name present in both stores.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<Param> params_;
  std::map<std::string, int> index_;
};

struct AmsGrad {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One AMSGrad update over every parameter, then zeroes gradients.
// Throws NonFiniteError (node = parameter id) and leaves values untouched if any gradient is non-finite.
void amsgrad_step(ParamStore& ps, const AmsGrad& opt = {});

using Var = int;

enum class Op {
  Const,
  ParamCol,
  Affine,
  Add,
  Mul,
  OneMinus,
  Scale,
  Relu,
  Sigmoid,
  Tanh,
  Softmax,
  Concat,
  Mean,
  Sum,
  MaskedNll,
  BceLogits,
};

// Reverse-mode tape over dense vectors. Parameters are read from a store that
// must outlive the tape; backward accumulates into that store's gradients.
class Tape {
 public:
  explicit Tape(const ParamStore& ps) : ps_(&ps) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Vec v);
  // Column `col` of parameter `pid` (a d x 1 parameter is col 0).
  Var param(int pid, int col = 0);
  // sum_k W_k x_k + b; b = -1 for no bias.
  Var affine(const std::vector<std::pair<int, Var>>& terms, int bias = -1);
  Var linear(int w, int b, Var x) { return affine({{w, x}}, b); }
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var one_minus(Var a);
  Var scale(Var a, double c);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softmax(Var a);
  Var concat(const std::vector<Var>& xs);
  Var mean(const std::vector<Var>& xs);
  Var sum(Var a);
  // -log softmax(logits restricted to `legal`)[target]. Scalar.
  Var masked_nll(Var logits, const std::vector<int>& legal, int target);
  // Binary cross-entropy of sigmoid(z) against `label`, z one-dimensional. Scalar.
  Var bce_logits(Var z, double label);

  const Vec& value(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }
  double scalar(Var v) const { return value(v)(0); }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Accumulates d(seed * out)/d(param) into `ps`, which must be the store the tape reads.
  void backward(Var out, ParamStore& ps, double seed = 1.0);
  bool consumed() const { return consumed_; }

  // Hash of every ReLU pre-activation sign pattern recorded so far.
  std::uint64_t kink_signature() const { return kinks_; }

 private:
  struct Node {
    Op op = Op::Const;
    Vec value;
    std::vector<Var> in;
    std::vector<int> pids;
    std::vector<int> aux;
    double c = 0.0;
  };
  Var push(Node n);
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v)]; }

  const ParamStore* ps_;
  std::vector<Node> nodes_;
  std::uint64_t kinks_ = 0xcbf29ce484222325ULL;
  bool consumed_ = false;
};

// Masked softmax outside any tape; illegal entries get exactly 0.
Vec masked_softmax(const Vec& logits, const std::vector<int>& legal);

struct GruParams {
  int wz, uz, bz, wr, ur, br, wn, un, bn, bun;
  int hidden = 0;
};

GruParams make_gru(ParamStore& ps, const std::string& prefix, int input, int hidden, Rng& rng);
Var gru_cell(Tape& t, const GruParams& p, Var x, Var h);

// Forward and backward GRUs; final states concatenated then projected to `out`.
struct BiGru {
  GruParams fwd, bwd;
  int proj_w = -1, proj_b = -1;
  int empty = -1;  // learned vector for the empty sequence
  int out = 0;
};

BiGru make_bigru(ParamStore& ps, const std::string& prefix, int input, int hidden, int out, Rng& rng);
Var bi_gru_encode(Tape& t, const BiGru& p, const std::vector<Var>& seq);

struct GradCheckOptions {
  double eps = 1e-4;
  // Coordinates sampled per parameter; 0 checks all.
  int per_param = 0;
  std::uint64_t seed = 1;
  // Restrict to these parameter ids (empty = all).
  std::vector<int> only;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped_kinks = 0;
  std::string worst;  // "name[r,c]"
};

// `loss` builds a scalar on a fresh tape. Central differences per coordinate;
// coordinates whose perturbation flips a ReLU sign pattern are skipped.
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(ParamStore& ps, const std::function<Var(Tape&)>& loss,
                           const GradCheckOptions& opt = {});

struct CheckpointHeader {
  std::uint32_t version = 1;
  std::uint32_t d = 0;
  std::uint64_t grammar_hash = 0;
  std::string meta;  // JSON text
};

void save_checkpoint(const std::string& path, const ParamStore& ps, const CheckpointHeader& h);
// Loads values into an existing store with identical names and shapes.
CheckpointHeader load_checkpoint(const std::string& path, ParamStore& ps);
CheckpointHeader read_checkpoint_header(const std::string& path);

}  // namespace blended::ad
