#include "blended/policy/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "blended/util/error.hpp"

namespace blended {

std::vector<int> legal_rules(const Sketch& s, const Grammar& g) {
  if (s.complete()) throw ConfigError("no cursor hole in a complete program");
  const auto& ids = g.rules_for(s.cursor().type());
  if (ids.empty()) throw ConfigError("no rules for hole type " + s.cursor().type());
  return ids;
}

namespace {

class UniformSession : public PolicySession {
 public:
  explicit UniformSession(const Grammar& g) : g_(g) {}
  std::vector<double> dist(const Sketch& s) override {
    std::vector<double> p(static_cast<std::size_t>(g_.rule_count()), 0.0);
    const auto legal = legal_rules(s, g_);
    for (int r : legal) p[static_cast<std::size_t>(r)] = 1.0 / static_cast<double>(legal.size());
    return p;
  }

 private:
  const Grammar& g_;
};

class ConstantSession : public ValueSession {
 public:
  explicit ConstantSession(double v) : v_(v) {}
  double value(const Sketch&) override { return v_; }

 private:
  double v_;
};

class ModelPolicySession : public PolicySession {
 public:
  ModelPolicySession(const Model& m, Spec spec) : m_(m), spec_(std::move(spec)) {}
  std::vector<double> dist(const Sketch& s) override { return m_.policy_dist(s, spec_, &cache_); }

 private:
  const Model& m_;
  Spec spec_;
  EmbedCache cache_;
};

class ModelValueSession : public ValueSession {
 public:
  ModelValueSession(const Model& m, Spec spec) : m_(m), spec_(std::move(spec)) {}
  double value(const Sketch& s) override { return m_.value_of(s, spec_, &cache_); }

 private:
  const Model& m_;
  Spec spec_;
  EmbedCache cache_;
};

class StaticSession : public PolicySession {
 public:
  StaticSession(const Grammar& g, std::vector<double> p) : g_(g), p_(std::move(p)) {}
  std::vector<double> dist(const Sketch& s) override {
    std::vector<double> out(p_.size(), 0.0);
    double z = 0.0;
    const auto legal = legal_rules(s, g_);
    for (int r : legal) z += p_[static_cast<std::size_t>(r)];
    for (int r : legal) out[static_cast<std::size_t>(r)] = p_[static_cast<std::size_t>(r)] / z;
    return out;
  }

 private:
  const Grammar& g_;
  std::vector<double> p_;
};

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::string checkpoint_meta(const std::string& kind, const Domain& domain, const std::string& extra,
                            nlohmann::json fields) {
  fields["kind"] = kind;
  fields["domain"] = domain.name();
  fields["extra"] = nlohmann::json::parse(extra.empty() ? "{}" : extra);
  return fields.dump();
}

void check_header(const ad::CheckpointHeader& h, const Domain& domain, int d, const std::string& path) {
  if (h.grammar_hash != domain.grammar().hash())
    throw ConfigError(path + ": checkpoint was trained on a different grammar");
  if (static_cast<int>(h.d) != d) throw ConfigError(path + ": checkpoint has d=" + std::to_string(h.d));
}

}  // namespace

std::unique_ptr<PolicySession> UniformPolicy::start(const Spec&) const { return std::make_unique<UniformSession>(*g_); }

std::unique_ptr<ValueSession> ConstantValue::start(const Spec&) const { return std::make_unique<ConstantSession>(v_); }

// ---------------------------------------------------------------------------

Model::Model(const Domain& domain, ModelOptions opts) : domain_(&domain), opts_(opts) { build(); }

Model::Model(const Model& other)
    : Policy(),
      w_rep(other.w_rep),
      b_rep(other.b_rep),
      pol_w1(other.pol_w1),
      pol_b1(other.pol_b1),
      pol_w2(other.pol_w2),
      pol_b2(other.pol_b2),
      val_w1(other.val_w1),
      val_b1(other.val_b1),
      val_w2(other.val_w2),
      val_b2(other.val_b2),
      domain_(other.domain_),
      opts_(other.opts_),
      ps_(other.ps_),
      emb_(std::make_unique<Embedders>(*other.emb_)) {}

void Model::build() {
  Rng rng = make_rng(opts_.seed, "model");
  const int d = opts_.d;
  const int R = domain_->grammar().rule_count();
  emb_ = std::make_unique<Embedders>(*domain_, ps_, d, rng);
  w_rep = ps_.add("rep.w", d, 2 * d, rng);
  b_rep = ps_.add("rep.b", d, 1, rng, ad::Init::Zero);
  pol_w1 = ps_.add("policy.w1", d, d, rng);
  pol_b1 = ps_.add("policy.b1", d, 1, rng, ad::Init::Zero);
  pol_w2 = ps_.add("policy.w2", R, d, rng, ad::Init::Zero);
  pol_b2 = ps_.add("policy.b2", R, 1, rng, ad::Init::Zero);
  val_w1 = ps_.add("value.w1", d, d, rng);
  val_b1 = ps_.add("value.b1", d, 1, rng, ad::Init::Zero);
  val_w2 = ps_.add("value.w2", 1, d, rng, ad::Init::Zero);
  val_b2 = ps_.add("value.b2", 1, 1, rng, ad::Init::Zero);
}

ad::Var Model::rep(Encoder& enc, const Sketch& s, const Spec& spec) const {
  if (spec.pairs.empty()) throw ConfigError("empty spec");
  ad::Tape& t = enc.tape();
  std::vector<ad::Var> terms;
  terms.reserve(spec.pairs.size());
  for (const auto& [x, y] : spec.pairs) {
    const ad::Var e = enc.encode(opts_.encoder, *s.root(), x);
    const ad::Var ey = enc.embed_value(y);
    terms.push_back(t.relu(t.linear(w_rep, b_rep, t.concat({e, ey}))));
  }
  return terms.size() == 1 ? terms[0] : t.mean(terms);
}

ad::Var Model::policy_logits(ad::Tape& t, ad::Var rep) const {
  return t.linear(pol_w2, pol_b2, t.relu(t.linear(pol_w1, pol_b1, rep)));
}

ad::Var Model::value_logit(ad::Tape& t, ad::Var rep) const {
  return t.linear(val_w2, val_b2, t.relu(t.linear(val_w1, val_b1, rep)));
}

std::vector<double> Model::policy_dist(const Sketch& s, const Spec& spec, EmbedCache* cache) const {
  const auto legal = legal_rules(s, domain_->grammar());
  ad::Tape t(ps_);
  Encoder enc(*emb_, t, cache);
  const ad::Var logits = policy_logits(t, rep(enc, s, spec));
  const ad::Vec p = ad::masked_softmax(t.value(logits), legal);
  return std::vector<double>(p.data(), p.data() + p.size());
}

double Model::value_of(const Sketch& s, const Spec& spec, EmbedCache* cache) const {
  ad::Tape t(ps_);
  Encoder enc(*emb_, t, cache);
  return sigmoid(t.scalar(value_logit(t, rep(enc, s, spec))));
}

std::unique_ptr<PolicySession> Model::start(const Spec& spec) const {
  return std::make_unique<ModelPolicySession>(*this, spec);
}

std::unique_ptr<ValueSession> Model::start_value(const Spec& spec) const {
  return std::make_unique<ModelValueSession>(*this, spec);
}

void Model::save(const std::string& path, const std::string& meta_json) const {
  ad::CheckpointHeader h;
  h.d = static_cast<std::uint32_t>(opts_.d);
  h.grammar_hash = domain_->grammar().hash();
  h.meta = checkpoint_meta("model", *domain_, meta_json,
                           {{"encoder", to_string(opts_.encoder)}, {"seed", opts_.seed}});
  ad::save_checkpoint(path, ps_, h);
}

ad::CheckpointHeader Model::load(const std::string& path) {
  const ad::CheckpointHeader h = ad::read_checkpoint_header(path);
  check_header(h, *domain_, opts_.d, path);
  const auto meta = nlohmann::json::parse(h.meta);
  if (meta.value("kind", "") != "model" || meta.value("encoder", "") != to_string(opts_.encoder))
    throw ConfigError(path + ": not a " + to_string(opts_.encoder) + " model checkpoint");
  return ad::load_checkpoint(path, ps_);
}

// ---------------------------------------------------------------------------

SpecOnlyModel::SpecOnlyModel(const Domain& domain, int d, std::uint64_t seed, int hidden)
    : domain_(&domain), d_(d), hidden_(hidden), seed_(seed) {
  Rng rng = make_rng(seed, "spec-only");
  emb_ = std::make_unique<Embedders>(domain, ps_, d, rng);
  const int R = domain.grammar().rule_count();
  w1 = ps_.add("spec.w1", hidden, 2 * d, rng);
  b1 = ps_.add("spec.b1", hidden, 1, rng, ad::Init::Zero);
  w2 = ps_.add("spec.w2", R, hidden, rng, ad::Init::Zero);
  b2 = ps_.add("spec.b2", R, 1, rng, ad::Init::Zero);
}

SpecOnlyModel::SpecOnlyModel(const SpecOnlyModel& other)
    : Policy(),
      w1(other.w1),
      b1(other.b1),
      w2(other.w2),
      b2(other.b2),
      domain_(other.domain_),
      d_(other.d_),
      hidden_(other.hidden_),
      seed_(other.seed_),
      ps_(other.ps_),
      emb_(std::make_unique<Embedders>(*other.emb_)) {}

ad::Var SpecOnlyModel::logits(Encoder& enc, const Spec& spec) const {
  if (spec.pairs.empty()) throw ConfigError("empty spec");
  ad::Tape& t = enc.tape();
  std::vector<ad::Var> io;
  for (const auto& [x, y] : spec.pairs) io.push_back(t.concat({enc.embed_value(x), enc.embed_value(y)}));
  const ad::Var m = io.size() == 1 ? io[0] : t.mean(io);
  return t.linear(w2, b2, t.tanh(t.linear(w1, b1, m)));
}

std::vector<double> SpecOnlyModel::rule_dist(const Spec& spec) const {
  ad::Tape t(ps_);
  Encoder enc(*emb_, t);
  const ad::Vec z = t.value(logits(enc, spec));
  std::vector<double> out(static_cast<std::size_t>(z.size()), 0.0);
  for (const auto& type : domain_->grammar().type_order()) {
    const auto& ids = domain_->grammar().rules_for(type);
    const ad::Vec p = ad::masked_softmax(z, ids);
    for (int r : ids) out[static_cast<std::size_t>(r)] = p(r);
  }
  return out;
}

std::unique_ptr<PolicySession> SpecOnlyModel::start(const Spec& spec) const {
  return std::make_unique<StaticSession>(domain_->grammar(), rule_dist(spec));
}

void SpecOnlyModel::save(const std::string& path, const std::string& meta_json) const {
  ad::CheckpointHeader h;
  h.d = static_cast<std::uint32_t>(d_);
  h.grammar_hash = domain_->grammar().hash();
  h.meta = checkpoint_meta("spec_only", *domain_, meta_json, {{"hidden", hidden_}, {"seed", seed_}});
  ad::save_checkpoint(path, ps_, h);
}

ad::CheckpointHeader SpecOnlyModel::load(const std::string& path) {
  const ad::CheckpointHeader h = ad::read_checkpoint_header(path);
  check_header(h, *domain_, d_, path);
  if (nlohmann::json::parse(h.meta).value("kind", "") != "spec_only")
    throw ConfigError(path + ": not a spec-only checkpoint");
  return ad::load_checkpoint(path, ps_);
}

// ---------------------------------------------------------------------------

std::size_t ImitationDataset::triplets() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.actions.size();
  return n;
}

ImitationDataset make_imitation_dataset(const Grammar& g, std::vector<TaskRecord> tasks) {
  ImitationDataset data;
  data.tasks = std::move(tasks);
  for (std::size_t i = 0; i < data.tasks.size(); ++i) {
    const auto& task = data.tasks[i];
    if (!task.program) continue;
    Trace tr;
    tr.task = static_cast<int>(i);
    tr.actions = derive_actions(task.program, g);
    Sketch s = Sketch::initial(g);
    for (const auto& a : tr.actions) {
      tr.sketches.push_back(s);
      s = apply_action(s, a, g);
    }
    if (!equal(*s.root(), *task.program)) throw Error("imitation trace does not rebuild " + task.id);
    data.traces.push_back(std::move(tr));
  }
  return data;
}

ImitationDataset make_imitation_dataset(const Grammar& g, int n_programs, const std::function<TaskRecord(int)>& gen) {
  std::vector<TaskRecord> tasks;
  tasks.reserve(static_cast<std::size_t>(n_programs));
  for (int i = 0; i < n_programs; ++i) tasks.push_back(gen(i));
  return make_imitation_dataset(g, std::move(tasks));
}

double uniform_policy_loss(const ImitationDataset& data, const Grammar& g) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& tr : data.traces)
    for (const auto& s : tr.sketches) {
      total += std::log(static_cast<double>(legal_rules(s, g).size()));
      ++n;
    }
  return n ? total / static_cast<double>(n) : 0.0;
}

namespace {

using LossFn = std::function<ad::Var(Encoder&, int group, int item)>;

// Minibatches walk the (per-epoch shuffled) groups in order so examples of
// one task share embeddings within a tape.
TrainResult run_training(ad::ParamStore& ps, const Embedders& emb, const std::vector<int>& group_sizes,
                         const LossFn& loss, const TrainConfig& cfg, double initial, const std::string& split) {
  if (cfg.batch <= 0 || cfg.epochs < 0) throw ConfigError("batch size must be positive");
  TrainResult res;
  res.initial_loss = initial;
  ad::AmsGrad opt;
  opt.lr = cfg.lr;
  std::vector<int> order(group_sizes.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
    std::vector<std::pair<int, int>> items;
    for (int gi : order)
      for (int k = 0; k < group_sizes[static_cast<std::size_t>(gi)]; ++k) items.emplace_back(gi, k);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < items.size(); b += static_cast<std::size_t>(cfg.batch)) {
      ad::Tape t(ps);
      Encoder enc(emb, t);
      std::vector<ad::Var> losses;
      const std::size_t end = std::min(items.size(), b + static_cast<std::size_t>(cfg.batch));
      for (std::size_t j = b; j < end; ++j) {
        try {
          losses.push_back(loss(enc, items[j].first, items[j].second));
        } catch (const EvalError&) {
          if (epoch == 1) ++res.skipped;
        }
      }
      if (losses.empty()) continue;
      const ad::Var l = losses.size() == 1 ? losses[0] : t.mean(losses);
      total += t.scalar(l) * static_cast<double>(losses.size());
      count += losses.size();
      t.backward(l, ps);
      ad::amsgrad_step(ps, opt);
    }
    EpochLog log;
    log.epoch = epoch;
    log.split = split;
    log.loss = count ? total / static_cast<double>(count) : 0.0;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.epochs.push_back(log);
    if (cfg.on_epoch) cfg.on_epoch(log);
    if (cfg.stop_fraction > 0 && log.loss <= (1.0 - cfg.stop_fraction) * initial) break;
  }
  return res;
}

std::vector<int> trace_sizes(const ImitationDataset& data) {
  std::vector<int> sizes;
  for (const auto& tr : data.traces) sizes.push_back(static_cast<int>(tr.actions.size()));
  return sizes;
}

}  // namespace

TrainResult train_policy(Model& model, const ImitationDataset& data, const TrainConfig& cfg) {
  if (data.triplets() == 0) throw ConfigError("empty imitation dataset");
  const Grammar& g = model.domain().grammar();
  LossFn loss = [&](Encoder& enc, int gi, int k) {
    const Trace& tr = data.traces[static_cast<std::size_t>(gi)];
    const Sketch& s = tr.sketches[static_cast<std::size_t>(k)];
    const Spec& spec = data.tasks[static_cast<std::size_t>(tr.task)].spec;
    ad::Tape& t = enc.tape();
    const ad::Var logits = model.policy_logits(t, model.rep(enc, s, spec));
    return t.masked_nll(logits, legal_rules(s, g), tr.actions[static_cast<std::size_t>(k)].rule);
  };
  return run_training(model.params(), model.embedders(), trace_sizes(data), loss, cfg, uniform_policy_loss(data, g),
                      "train");
}

TrainResult train_spec_only(SpecOnlyModel& model, const ImitationDataset& data, const TrainConfig& cfg) {
  if (data.triplets() == 0) throw ConfigError("empty imitation dataset");
  const Grammar& g = model.domain().grammar();
  LossFn loss = [&](Encoder& enc, int gi, int k) {
    const Trace& tr = data.traces[static_cast<std::size_t>(gi)];
    const Sketch& s = tr.sketches[static_cast<std::size_t>(k)];
    const Spec& spec = data.tasks[static_cast<std::size_t>(tr.task)].spec;
    return enc.tape().masked_nll(model.logits(enc, spec), legal_rules(s, g),
                                 tr.actions[static_cast<std::size_t>(k)].rule);
  };
  return run_training(model.params(), model.embedders(), trace_sizes(data), loss, cfg, uniform_policy_loss(data, g),
                      "train");
}

double policy_loss(const Model& model, const ImitationDataset& data) {
  const Grammar& g = model.domain().grammar();
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& tr : data.traces) {
    ad::Tape t(model.params());
    Encoder enc(model.embedders(), t);
    const Spec& spec = data.tasks[static_cast<std::size_t>(tr.task)].spec;
    for (std::size_t k = 0; k < tr.sketches.size(); ++k) {
      try {
        const ad::Var logits = model.policy_logits(t, model.rep(enc, tr.sketches[k], spec));
        total += t.scalar(t.masked_nll(logits, legal_rules(tr.sketches[k], g), tr.actions[k].rule));
        ++n;
      } catch (const EvalError&) {
      }
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------

std::vector<Rollout> collect_rollouts(const Policy& policy, const Domain& domain, const std::vector<TaskRecord>& tasks,
                                      int k_per_task, int max_steps, std::uint64_t seed) {
  const Grammar& g = domain.grammar();
  std::vector<Rollout> out;
  out.reserve(tasks.size() * static_cast<std::size_t>(std::max(k_per_task, 0)));
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    auto session = policy.start(tasks[ti].spec);
    for (int j = 0; j < k_per_task; ++j) {
      Rng rng = make_rng(seed, "rollout", ti * static_cast<std::size_t>(k_per_task) + static_cast<std::size_t>(j));
      Rollout r;
      r.task = static_cast<int>(ti);
      Sketch s = Sketch::initial(g);
      r.sketches.push_back(s);
      for (int step = 0; step < max_steps && !s.complete(); ++step) {
        std::vector<double> p;
        try {
          p = session->dist(s);
        } catch (const EvalError&) {
          r.infeasible = true;
          break;
        }
        const double u = uniform_real(rng);
        double acc = 0.0;
        int pick = -1;
        for (int rid : legal_rules(s, g)) {
          pick = rid;
          acc += p[static_cast<std::size_t>(rid)];
          if (u < acc) break;
        }
        const double lp = std::log(std::max(p[static_cast<std::size_t>(pick)], 1e-300));
        s = apply_action(s, Action{pick, s.cursor_index()}, g, lp);
        r.sketches.push_back(s);
      }
      if (s.complete() && domain.check_solution(*s.root(), tasks[ti].spec)) r.reward = 1.0;
      out.push_back(std::move(r));
    }
  }
  return out;
}

TrainResult train_value(Model& model, const std::vector<TaskRecord>& tasks, const std::vector<Rollout>& rollouts,
                        const TrainConfig& cfg) {
  if (rollouts.empty()) throw ConfigError("no rollouts to train on");
  std::vector<int> sizes;
  for (const auto& r : rollouts) sizes.push_back(static_cast<int>(r.sketches.size()));
  LossFn loss = [&](Encoder& enc, int gi, int k) {
    const Rollout& r = rollouts[static_cast<std::size_t>(gi)];
    const Spec& spec = tasks[static_cast<std::size_t>(r.task)].spec;
    ad::Tape& t = enc.tape();
    return t.bce_logits(model.value_logit(t, model.rep(enc, r.sketches[static_cast<std::size_t>(k)], spec)), r.reward);
  };
  return run_training(model.params(), model.embedders(), sizes, loss, cfg, value_loss(model, tasks, rollouts),
                      "value");
}

double value_loss(const Model& model, const std::vector<TaskRecord>& tasks, const std::vector<Rollout>& rollouts) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rollouts) {
    ad::Tape t(model.params());
    Encoder enc(model.embedders(), t);
    const Spec& spec = tasks[static_cast<std::size_t>(r.task)].spec;
    for (const auto& s : r.sketches) {
      try {
        total += t.scalar(t.bce_logits(model.value_logit(t, model.rep(enc, s, spec)), r.reward));
        ++n;
      } catch (const EvalError&) {
      }
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

}  // namespace blended
