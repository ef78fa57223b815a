#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/lists/lists.hpp"
#include "blended/policy/model.hpp"
#include "blended/towers/towers.hpp"
#include "blended/util/error.hpp"

using namespace blended;

namespace {

const lists::ListDomain& lst() {
  static const lists::ListDomain d;
  return d;
}
const towers::TowerDomain& tow() {
  static const towers::TowerDomain d;
  return d;
}

std::vector<TaskRecord> list_tasks(int n, std::uint64_t seed) {
  Rng rng = make_rng(seed, "policy-test");
  std::vector<TaskRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(harness::list_record("t" + std::to_string(i), lists::gen_task(rng, lst())));
  return out;
}

// Sketch midway through a task's derivation.
Sketch prefix(const TaskRecord& t, const Grammar& g, std::size_t steps) {
  Sketch s = Sketch::initial(g);
  const auto acts = derive_actions(t.program, g);
  for (std::size_t i = 0; i < std::min(steps, acts.size()); ++i) s = apply_action(s, acts[i], g);
  return s;
}

}  // namespace

TEST(Model, UntrainedIsUniformWithHalfValue) {
  const auto tasks = list_tasks(3, 1);
  for (auto enc : {EncoderKind::Blended, EncoderKind::Neural, EncoderKind::Sequence}) {
    const Model m(lst(), ModelOptions{enc, 16, 3});
    for (const auto& t : tasks)
      for (std::size_t k : {0u, 2u, 5u}) {
        const Sketch s = prefix(t, lst().grammar(), k);
        const auto p = m.policy_dist(s, t.spec);
        const auto legal = legal_rules(s, lst().grammar());
        double sum = 0.0;
        for (std::size_t r = 0; r < p.size(); ++r) {
          const bool ok = std::find(legal.begin(), legal.end(), static_cast<int>(r)) != legal.end();
          if (ok)
            EXPECT_NEAR(p[r], 1.0 / static_cast<double>(legal.size()), 1e-12);
          else
            EXPECT_EQ(p[r], 0.0);
          sum += p[r];
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_NEAR(m.value_of(s, t.spec), 0.5, 1e-12);
      }
  }
}

// rep = mean_i ReLU(W [enc(s, x_i); Embed(y_i)] + b), recomputed outside the model.
TEST(Model, RepMatchesFormula) {
  const auto tasks = list_tasks(2, 2);
  const Model m(lst(), ModelOptions{EncoderKind::Blended, 16, 4});
  for (const auto& t : tasks) {
    const Sketch s = prefix(t, lst().grammar(), 3);
    ad::Tape tape(m.params());
    Encoder enc(m.embedders(), tape);
    const ad::Vec rep = tape.value(m.rep(enc, s, t.spec));

    const ad::Mat& W = m.params().at(m.w_rep).value;
    const ad::Vec b = m.params().at(m.b_rep).value.col(0);
    ad::Vec want = ad::Vec::Zero(16);
    for (const auto& [x, y] : t.spec.pairs) {
      ad::Tape t2(m.params());
      Encoder e2(m.embedders(), t2);
      ad::Vec in(32);
      in << t2.value(e2.encode(EncoderKind::Blended, *s.root(), x)), t2.value(e2.embed_value(y));
      want += (W * in + b).cwiseMax(0.0);
    }
    want /= static_cast<double>(t.spec.pairs.size());
    EXPECT_LE((rep - want).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(rep.minCoeff(), 0.0);
  }
}

TEST(Model, ValueIsPermutationInvariant) {
  auto tasks = list_tasks(2, 5);
  Model m(lst(), ModelOptions{EncoderKind::Blended, 16, 6});
  Rng rng = make_rng(1, "perturb");
  for (int i = 0; i < m.params().size(); ++i)
    for (Eigen::Index k = 0; k < m.params().at(i).value.size(); ++k)
      m.params().at(i).value.data()[k] += 0.2 * (uniform_real(rng) - 0.5);
  for (auto& t : tasks) {
    const Sketch s = prefix(t, lst().grammar(), 2);
    const double v = m.value_of(s, t.spec);
    const auto p = m.policy_dist(s, t.spec);
    std::reverse(t.spec.pairs.begin(), t.spec.pairs.end());
    EXPECT_NEAR(m.value_of(s, t.spec), v, 1e-12);
    const auto q = m.policy_dist(s, t.spec);
    for (std::size_t r = 0; r < p.size(); ++r) EXPECT_NEAR(p[r], q[r], 1e-12);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Dataset, TripletsReplayTheirPrograms) {
  const auto data = make_imitation_dataset(lst().grammar(), list_tasks(20, 7));
  std::size_t n = 0;
  for (const auto& tr : data.traces) {
    const auto& prog = data.tasks[static_cast<std::size_t>(tr.task)].program;
    EXPECT_EQ(tr.actions.size(), static_cast<std::size_t>(prog->size()));
    Sketch s = Sketch::initial(lst().grammar());
    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
      EXPECT_TRUE(equal(*tr.sketches[i].root(), *s.root()));
      const auto ex = expansions(s, lst().grammar());
      EXPECT_NE(std::find(ex.begin(), ex.end(), tr.actions[i]), ex.end());
      s = apply_action(s, tr.actions[i], lst().grammar());
    }
    EXPECT_TRUE(equal(*s.root(), *prog));
    n += tr.actions.size();
  }
  EXPECT_EQ(data.triplets(), n);
}

TEST(Training, InitialLossIsUniformLoss) {
  const auto data = make_imitation_dataset(lst().grammar(), list_tasks(10, 8));
  double want = 0.0;
  std::size_t n = 0;
  for (const auto& tr : data.traces)
    for (const auto& s : tr.sketches) {
      want += std::log(static_cast<double>(legal_rules(s, lst().grammar()).size()));
      ++n;
    }
  want /= static_cast<double>(n);
  EXPECT_NEAR(uniform_policy_loss(data, lst().grammar()), want, 1e-12);
  const Model m(lst(), ModelOptions{EncoderKind::Blended, 16, 1});
  EXPECT_NEAR(policy_loss(m, data), want, 1e-9);
}

TEST(Training, OverfitsSingleTriplet) {
  auto tasks = list_tasks(1, 9);
  ImitationDataset data;
  data.tasks = tasks;
  const Sketch s = prefix(tasks[0], lst().grammar(), 4);
  const auto acts = derive_actions(tasks[0].program, lst().grammar());
  data.traces.push_back(Trace{0, {s}, {acts[4]}});
  Model m(lst(), ModelOptions{EncoderKind::Blended, 32, 2});
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch = 1;
  const auto r = train_policy(m, data, cfg);
  EXPECT_NEAR(r.initial_loss, std::log(static_cast<double>(legal_rules(s, lst().grammar()).size())), 1e-9);
  EXPECT_LT(policy_loss(m, data), 0.01);
}

TEST(Training, DeterministicPerSeed) {
  const auto data = make_imitation_dataset(lst().grammar(), list_tasks(6, 10));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 4;
  cfg.seed = 3;
  Model a(lst(), ModelOptions{EncoderKind::Neural, 8, 1}), b(lst(), ModelOptions{EncoderKind::Neural, 8, 1});
  const auto ra = train_policy(a, data, cfg);
  const auto rb = train_policy(b, data, cfg);
  EXPECT_EQ(ra.final_loss(), rb.final_loss());
  for (int i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params().at(i).value, b.params().at(i).value);
  EXPECT_LT(ra.final_loss(), ra.initial_loss);
}

TEST(Rollouts, RewardsAndDeterminism) {
  const auto tasks = list_tasks(5, 11);
  const UniformPolicy pol(lst().grammar());
  const auto a = collect_rollouts(pol, lst(), tasks, 4, 30, 5);
  const auto b = collect_rollouts(pol, lst(), tasks, 4, 30, 5);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].sketches.size(), b[i].sketches.size());
    EXPECT_TRUE(equal(*a[i].sketches.back().root(), *b[i].sketches.back().root()));
    EXPECT_EQ(a[i].reward, b[i].reward);
    const auto& last = a[i].sketches.back();
    if (a[i].reward == 1.0) {
      EXPECT_TRUE(last.complete());
      EXPECT_TRUE(lst().check_solution(*last.root(), tasks[static_cast<std::size_t>(a[i].task)].spec));
    }
    for (std::size_t k = 1; k < a[i].sketches.size(); ++k) EXPECT_EQ(a[i].sketches[k].steps(), a[i].sketches[k - 1].steps() + 1);
  }
}

TEST(Value, InitialBceIsLn2AndTrainingHelps) {
  const auto tasks = list_tasks(8, 12);
  const UniformPolicy pol(lst().grammar());
  auto rollouts = collect_rollouts(pol, lst(), tasks, 3, 30, 1);
  // Fake balanced labels: the value model only has to separate tasks.
  for (auto& r : rollouts) r.reward = r.task % 2 ? 1.0 : 0.0;
  Model m(lst(), ModelOptions{EncoderKind::Blended, 16, 1});
  EXPECT_NEAR(value_loss(m, tasks, rollouts), std::log(2.0), 1e-12);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch = 8;
  train_value(m, tasks, rollouts, cfg);
  EXPECT_LT(value_loss(m, tasks, rollouts), std::log(2.0));
}

TEST(Checkpoint, ModelRoundTripAndGrammarGuard) {
  const auto tasks = list_tasks(1, 13);
  Model m(lst(), ModelOptions{EncoderKind::Blended, 8, 1});
  Rng rng = make_rng(2, "jitter");
  for (int i = 0; i < m.params().size(); ++i) m.params().at(i).value.array() += uniform_real(rng) * 0.1;
  const auto path = (std::filesystem::temp_directory_path() / "blended-model-test.ckpt").string();
  m.save(path, R"({"x":1})");
  Model n(lst(), ModelOptions{EncoderKind::Blended, 8, 99});
  n.load(path);
  const Sketch s = prefix(tasks[0], lst().grammar(), 3);
  EXPECT_EQ(m.policy_dist(s, tasks[0].spec), n.policy_dist(s, tasks[0].spec));
  Model wrong(tow(), ModelOptions{EncoderKind::Blended, 8, 1});
  EXPECT_THROW(wrong.load(path), Error);
  Model wrong_d(lst(), ModelOptions{EncoderKind::Blended, 16, 1});
  EXPECT_THROW(wrong_d.load(path), Error);
  std::filesystem::remove(path);
}

TEST(SpecOnly, StaticDistribution) {
  const auto tasks = list_tasks(2, 14);
  SpecOnlyModel m(lst(), 8, 1);
  const auto& g = lst().grammar();
  const auto dist = m.rule_dist(tasks[0].spec);
  for (const auto& [type, sem] : g.nonterminals()) {
    double sum = 0.0;
    for (int r : g.rules_for(type)) sum += dist[static_cast<std::size_t>(r)];
    EXPECT_NEAR(sum, 1.0, 1e-9) << type;
  }
  auto sess = m.start(tasks[0].spec);
  const auto a = sess->dist(Sketch::initial(g));
  const auto b = sess->dist(Sketch(parse_program("(map (lambda (x) x) ?L)", g), g.order()));
  EXPECT_EQ(a, b);
}
