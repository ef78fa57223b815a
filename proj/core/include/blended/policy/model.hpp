#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "blended/autodiff/autodiff.hpp"
#include "blended/interp/domain.hpp"
#include "blended/lang/sketch.hpp"
#include "blended/neural/semantics.hpp"

namespace blended {

struct TaskRecord {
  std::string id;
  Spec spec;
  ExprPtr program;  // hidden target; may be null
};

// Per-task inference handles. dist/value throw EvalError when the sketch is
// provably infeasible (a concrete part fails to execute).
class PolicySession {
 public:
  virtual ~PolicySession() = default;
  // One probability per grammar rule; zero for rules illegal at the cursor.
  virtual std::vector<double> dist(const Sketch& s) = 0;
};

class ValueSession {
 public:
  virtual ~ValueSession() = default;
  virtual double value(const Sketch& s) = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::unique_ptr<PolicySession> start(const Spec& spec) const = 0;
};

class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual std::unique_ptr<ValueSession> start(const Spec& spec) const = 0;
};

// Rule ids legal at the cursor hole.
std::vector<int> legal_rules(const Sketch& s, const Grammar& g);

class UniformPolicy : public Policy {
 public:
  explicit UniformPolicy(const Grammar& g) : g_(&g) {}
  std::unique_ptr<PolicySession> start(const Spec& spec) const override;

 private:
  const Grammar* g_;
};

class ConstantValue : public ValueFunction {
 public:
  explicit ConstantValue(double v) : v_(v) {}
  std::unique_ptr<ValueSession> start(const Spec& spec) const override;

 private:
  double v_;
};

struct ModelOptions {
  EncoderKind encoder = EncoderKind::Blended;
  int d = 64;
  std::uint64_t seed = 1;
};

// Encoders, rep(s, X), and the policy and value heads in one parameter store.
class Model : public Policy {
 public:
  Model(const Domain& domain, ModelOptions opts);
  Model(const Model& other);
  Model& operator=(const Model&) = delete;

  const Domain& domain() const { return *domain_; }
  const ModelOptions& options() const { return opts_; }
  EncoderKind encoder() const { return opts_.encoder; }
  int d() const { return opts_.d; }
  ad::ParamStore& params() { return ps_; }
  const ad::ParamStore& params() const { return ps_; }
  const Embedders& embedders() const { return *emb_; }

  // (1/n) sum_i ReLU(W [encode(s, x_i); Embed(y_i)] + b)
  ad::Var rep(Encoder& enc, const Sketch& s, const Spec& spec) const;
  ad::Var policy_logits(ad::Tape& t, ad::Var rep) const;
  ad::Var value_logit(ad::Tape& t, ad::Var rep) const;

  std::vector<double> policy_dist(const Sketch& s, const Spec& spec, EmbedCache* cache = nullptr) const;
  double value_of(const Sketch& s, const Spec& spec, EmbedCache* cache = nullptr) const;

  std::unique_ptr<PolicySession> start(const Spec& spec) const override;
  std::unique_ptr<ValueSession> start_value(const Spec& spec) const;

  // Checkpoints carry the grammar hash; load refuses a mismatch.
  void save(const std::string& path, const std::string& meta_json = "{}") const;
  ad::CheckpointHeader load(const std::string& path);

  int w_rep = -1, b_rep = -1;
  int pol_w1 = -1, pol_b1 = -1, pol_w2 = -1, pol_b2 = -1;
  int val_w1 = -1, val_b1 = -1, val_w2 = -1, val_b2 = -1;

 private:
  void build();

  const Domain* domain_;
  ModelOptions opts_;
  ad::ParamStore ps_;
  std::unique_ptr<Embedders> emb_;
};

// View of a model as a value function (avoids ambiguity with Policy::start).
class ModelValue : public ValueFunction {
 public:
  explicit ModelValue(const Model& m) : m_(&m) {}
  std::unique_ptr<ValueSession> start(const Spec& spec) const override { return m_->start_value(spec); }

 private:
  const Model* m_;
};

// Spec-only baseline: one static rule distribution per task from the averaged
// I/O embeddings through a tanh hidden layer of 64 units.
class SpecOnlyModel : public Policy {
 public:
  SpecOnlyModel(const Domain& domain, int d, std::uint64_t seed, int hidden = 64);
  SpecOnlyModel(const SpecOnlyModel& other);

  const Domain& domain() const { return *domain_; }
  ad::ParamStore& params() { return ps_; }
  const ad::ParamStore& params() const { return ps_; }
  int d() const { return d_; }
  const Embedders& embedders() const { return *emb_; }

  ad::Var logits(Encoder& enc, const Spec& spec) const;
  // Static distribution over all rules (each nonterminal's rules normalized separately).
  std::vector<double> rule_dist(const Spec& spec) const;
  std::unique_ptr<PolicySession> start(const Spec& spec) const override;

  void save(const std::string& path, const std::string& meta_json = "{}") const;
  ad::CheckpointHeader load(const std::string& path);

  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

 private:
  const Domain* domain_;
  int d_;
  int hidden_;
  std::uint64_t seed_;
  ad::ParamStore ps_;
  std::unique_ptr<Embedders> emb_;
};

// ---------------------------------------------------------------------------
// Data and training

struct Trace {
  int task = 0;
  std::vector<Sketch> sketches;  // s_0 .. s_{T-1}
  std::vector<Action> actions;   // a_i expands sketches[i]
};

struct ImitationDataset {
  std::vector<TaskRecord> tasks;
  std::vector<Trace> traces;
  std::size_t triplets() const;
};

// One trace per task with a program: every (prefix sketch, action) of its construction.
ImitationDataset make_imitation_dataset(const Grammar& g, std::vector<TaskRecord> tasks);
// Samples tasks with `gen` (index -> task) until n are collected.
ImitationDataset make_imitation_dataset(const Grammar& g, int n_programs,
                                        const std::function<TaskRecord(int)>& gen);

// Mean over triplets of log |legal actions|: the loss of a uniform policy.
double uniform_policy_loss(const ImitationDataset& data, const Grammar& g);

struct EpochLog {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainConfig {
  int epochs = 10;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  // Stop after the first epoch whose mean loss is at or below (1 - f) * initial; 0 disables.
  double stop_fraction = 0.0;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  double initial_loss = 0.0;
  std::vector<EpochLog> epochs;
  std::size_t skipped = 0;  // examples whose sketch could not be encoded
  double final_loss() const { return epochs.empty() ? initial_loss : epochs.back().loss; }
};

// Imitation learning: minimizes -log pi(a | s, X).
TrainResult train_policy(Model& model, const ImitationDataset& data, const TrainConfig& cfg);
TrainResult train_spec_only(SpecOnlyModel& model, const ImitationDataset& data, const TrainConfig& cfg);
double policy_loss(const Model& model, const ImitationDataset& data);

struct Rollout {
  int task = 0;
  std::vector<Sketch> sketches;  // s_0 .. s_T
  double reward = 0.0;
  // The last sketch failed blended evaluation.
  bool infeasible = false;
};

std::vector<Rollout> collect_rollouts(const Policy& policy, const Domain& domain,
                                      const std::vector<TaskRecord>& tasks, int k_per_task, int max_steps,
                                      std::uint64_t seed);

// Logistic loss of V(s_t, X) against the rollout reward over every prefix.
TrainResult train_value(Model& model, const std::vector<TaskRecord>& tasks, const std::vector<Rollout>& rollouts,
                        const TrainConfig& cfg);
double value_loss(const Model& model, const std::vector<TaskRecord>& tasks, const std::vector<Rollout>& rollouts);

}  // namespace blended
