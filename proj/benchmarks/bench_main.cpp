#include <benchmark/benchmark.h>

#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/neural/semantics.hpp"

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

const TaskRecord& list_task() {
  static const TaskRecord t = [] {
    Rng rng = make_rng(1, "bench");
    return harness::list_record("b0", lists::gen_task(rng, lst()));
  }();
  return t;
}

Sketch halfway(const TaskRecord& t, const Grammar& g) {
  Sketch s = Sketch::initial(g);
  const auto acts = derive_actions(t.program, g);
  for (std::size_t i = 0; i < acts.size() / 2; ++i) s = apply_action(s, acts[i], g);
  return s;
}

}  // namespace

static void BM_EvalList(benchmark::State& state) {
  const auto& t = list_task();
  const Value in(t.spec.pairs[0].first);
  for (auto _ : state) benchmark::DoNotOptimize(lst().run(*t.program, in));
}
BENCHMARK(BM_EvalList);

static void BM_ExecuteTower(benchmark::State& state) {
  const auto p = parse_program(
      "[(loop 4 [(placeVerticalBlock) (moveHand 2)]) (embed [(placeHorizontalBlock) (moveHand 1)]) "
      "(reverseHand) (moveHand 3) (placeHorizontalBlock)]",
      tow().grammar());
  for (auto _ : state) benchmark::DoNotOptimize(towers::render(tow().execute(*p), tow().config()));
}
BENCHMARK(BM_ExecuteTower);

static void BM_AbstractEval(benchmark::State& state) {
  const auto p = parse_program("[(loop 4 [(placeVerticalBlock) ?S]) (moveHand ?n) ?S]", tow().grammar());
  const Sketch s(p, tow().grammar().order());
  for (auto _ : state) benchmark::DoNotOptimize(towers::abstract_eval(s, tow()));
}
BENCHMARK(BM_AbstractEval);

static void BM_Encode(benchmark::State& state) {
  const auto kind = static_cast<EncoderKind>(state.range(0));
  const Model m(lst(), ModelOptions{kind, 64, 1});
  const auto& t = list_task();
  const Sketch s = halfway(t, lst().grammar());
  for (auto _ : state) {
    ad::Tape tape(m.params());
    Encoder enc(m.embedders(), tape);
    benchmark::DoNotOptimize(tape.value(enc.encode(kind, *s.root(), t.spec.pairs[0].first)));
  }
}
BENCHMARK(BM_Encode)
    ->Arg(static_cast<int>(EncoderKind::Blended))
    ->Arg(static_cast<int>(EncoderKind::Neural))
    ->Arg(static_cast<int>(EncoderKind::Sequence));

static void BM_PolicyStep(benchmark::State& state) {
  const Model m(lst(), ModelOptions{EncoderKind::Blended, static_cast<int>(state.range(0)), 1});
  const auto& t = list_task();
  const Sketch s = halfway(t, lst().grammar());
  for (auto _ : state) benchmark::DoNotOptimize(m.policy_dist(s, t.spec));
}
BENCHMARK(BM_PolicyStep)->Arg(32)->Arg(64);

static void BM_TrainStep(benchmark::State& state) {
  Model m(lst(), ModelOptions{EncoderKind::Blended, 64, 1});
  const auto data = make_imitation_dataset(lst().grammar(), {list_task()});
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 32;
  for (auto _ : state) benchmark::DoNotOptimize(train_policy(m, data, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.triplets()));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

static void BM_BestFirstUniform(benchmark::State& state) {
  const UniformPolicy uni(tow().grammar());
  const auto p = parse_program("[(placeVerticalBlock) (moveHand 3) (placeHorizontalBlock)]", tow().grammar());
  const Spec spec = tow().spec_for(towers::render(tow().execute(*p), tow().config()));
  SearchOptions o;
  o.node_budget = state.range(0);
  long nodes = 0;
  for (auto _ : state) nodes += best_first(tow(), spec, uni, o).nodes;
  state.SetItemsProcessed(nodes);
}
BENCHMARK(BM_BestFirstUniform)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_BestFirstBlended(benchmark::State& state) {
  const Model m(lst(), ModelOptions{EncoderKind::Blended, 64, 1});
  SearchOptions o;
  o.node_budget = state.range(0);
  long nodes = 0;
  for (auto _ : state) nodes += best_first(lst(), list_task().spec, m, o).nodes;
  state.SetItemsProcessed(nodes);
}
BENCHMARK(BM_BestFirstBlended)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
