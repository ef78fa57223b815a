#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"

using namespace blended;
using namespace blended::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) n += !l.empty();
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("blended-test-" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

RunConfig tiny(const std::string& domain, const TempDir& dir) {
  RunConfig c;
  c.domain = domain;
  c.encoders = {"blended"};
  c.d = 8;
  c.train_tasks = 40;
  c.test_tasks = 6;
  c.motif_pool = 12;
  c.epochs = 1;
  c.value_tasks = 10;
  c.rollouts_per_task = 2;
  c.value_epochs = 1;
  c.node_budget = 60;
  c.algorithms = {"best_first", "astar"};
  c.data_dir = dir / "data";
  c.run_dir = dir / "run";
  return c;
}

}  // namespace

TEST(Config, StrictParsingAndRoundTrip) {
  const json j = {{"domain", "towers"}, {"d", 32}, {"encoders", {"neural"}}, {"node_budget", 500}};
  const auto c = RunConfig::from_json(j);
  EXPECT_EQ(c.domain, "towers");
  EXPECT_EQ(c.d, 32);
  EXPECT_EQ(c.encoders, std::vector<std::string>{"neural"});
  EXPECT_EQ(RunConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(RunConfig::from_json(json{{"domian", "towers"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(json{{"d", "big"}}), ConfigError);
  RunConfig bad;
  bad.encoders = {"cnn"};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = RunConfig();
  bad.domain = "strings";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Config, HashesTrackTheRightFields) {
  RunConfig a, b;
  b.epochs = 3;
  EXPECT_EQ(a.data_hash(), b.data_hash());
  EXPECT_NE(a.model_hash(), b.model_hash());
  b.seed = 2;
  EXPECT_NE(a.data_hash(), b.data_hash());
  RunConfig c;
  c.node_budget = 10;
  EXPECT_EQ(a.model_hash(), c.model_hash());
}

TEST(Json, ValuesAndTasksRoundTrip) {
  const towers::TowerDomain tow;
  const auto prog = parse_program("[(placeVerticalBlock) (moveHand 2) (placeHorizontalBlock)]", tow.grammar());
  const std::vector<Value> vals = {Value(std::int64_t{-5}), Value(true), Value(IntList{1, -2, 3}),
                                   Value(tow.execute(*prog)), Value(towers::render(tow.execute(*prog), tow.config()))};
  for (const auto& v : vals) EXPECT_EQ(value_from_json(value_to_json(v)), v) << v.to_string();
  const auto t = tower_record("t0", tow, prog);
  const auto back = task_from_json(task_to_json(t), tow);
  EXPECT_EQ(back.id, "t0");
  EXPECT_TRUE(equal(*back.program, *prog));
  EXPECT_EQ(back.spec.pairs, t.spec.pairs);
}

TEST(Towers, TestTasksUseHeldOutMotifCombinations) {
  const towers::TowerDomain tow;
  TowerGenOptions o;
  o.motif_pool = 16;
  const auto set = gen_tower_tasks(tow, 200, 30, 4, o);
  ASSERT_EQ(set.train.size(), 200u);
  ASSERT_EQ(set.test.size(), 30u);
  auto key = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  std::set<std::vector<int>> train_sets;
  std::set<std::string> train_progs;
  for (std::size_t i = 0; i < set.train.size(); ++i) {
    train_sets.insert(key(set.train_parts[i]));
    train_progs.insert(print_program(*set.train[i].program));
    EXPECT_TRUE(tow.check_solution(*set.train[i].program, set.train[i].spec));
  }
  for (std::size_t i = 0; i < set.test.size(); ++i) {
    EXPECT_GE(set.test_parts[i].size(), 2u);
    EXPECT_EQ(train_sets.count(key(set.test_parts[i])), 0u);
    EXPECT_EQ(train_progs.count(print_program(*set.test[i].program)), 0u);
    EXPECT_TRUE(tow.check_solution(*set.test[i].program, set.test[i].spec));
  }
}

TEST(PR, PointsAndCurve) {
  const std::vector<double> s = {0.9, 0.8, 0.4, 0.3, 0.1};
  const std::vector<int> y = {1, 0, 1, 0, 0};
  const auto p = pr_point(s, y, 0.5);
  EXPECT_EQ(p.tp, 1);
  EXPECT_EQ(p.fp, 1);
  EXPECT_EQ(p.fn, 1);
  EXPECT_EQ(p.tn, 2);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 0.5);
  const auto z = pr_point(s, y, 0.0);
  EXPECT_DOUBLE_EQ(z.recall, 1.0);
  EXPECT_DOUBLE_EQ(z.precision, 0.4);
  std::vector<double> th;
  for (int i = 0; i <= 20; ++i) th.push_back(i / 20.0);
  const auto curve = pr_curve(s, y, th);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].recall, curve[i - 1].recall);
  for (const auto& q : curve) EXPECT_EQ(q.tp + q.fp + q.fn + q.tn, 5);
  const auto best = best_precision_at_recall(s, y, 1.0);
  ASSERT_TRUE(best);
  EXPECT_DOUBLE_EQ(best->precision, 2.0 / 3.0);
  // No positives: recall is 1 by convention; nothing predicted: precision is 1.
  EXPECT_DOUBLE_EQ(pr_point(s, {0, 0, 0, 0, 0}, 0.5).recall, 1.0);
  EXPECT_DOUBLE_EQ(pr_point(s, y, 2.0).precision, 1.0);
  EXPECT_FALSE(best_precision_at_recall({}, {}, 0.5));
}

TEST(Curves, MonotoneAndEndAtSolveRate) {
  std::vector<ResultRecord> rs;
  for (long k : {5L, 50L, 120L, -1L, 900L, -1L}) {
    ResultRecord r;
    r.solved = k >= 0;
    r.solved_at = k;
    r.node_budget = 1000;
    rs.push_back(r);
  }
  const auto budgets = default_budgets(1000, 20);
  EXPECT_EQ(budgets.back(), 1000);
  const auto c = solve_curve(rs, budgets);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i].fraction, c[i - 1].fraction);
  EXPECT_DOUBLE_EQ(c.back().fraction, 4.0 / 6.0);
  const std::string csv = curves_csv({Condition{"a", rs}}, budgets);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "condition,budget,fraction_solved");
  EXPECT_NE(curves_svg({Condition{"a", rs}}, budgets).find("<svg"), std::string::npos);
}

TEST(Commands, GenDataIsDeterministicWithMatchingManifest) {
  for (const std::string domain : {"lists", "towers"}) {
    TempDir d1("gen1-" + domain), d2("gen2-" + domain);
    auto c1 = tiny(domain, d1), c2 = tiny(domain, d2);
    const json m = cmd_gen_data(c1);
    cmd_gen_data(c2);
    const Paths p1 = paths_for(c1), p2 = paths_for(c2);
    for (auto f : {&Paths::train, &Paths::test, &Paths::triplets}) EXPECT_EQ(slurp(p1.*f), slurp(p2.*f));
    EXPECT_EQ(slurp(p1.manifest), slurp(p2.manifest));
    EXPECT_EQ(m["counts"]["train"].get<std::size_t>(), lines(p1.train));
    EXPECT_EQ(m["counts"]["test"].get<std::size_t>(), lines(p1.test));
    EXPECT_EQ(m["counts"]["triplets"].get<std::size_t>(), lines(p1.triplets));
    EXPECT_EQ(m["seed"].get<std::uint64_t>(), c1.seed);
    std::set<std::string> test;
    for (const auto& j : read_jsonl(p1.test)) {
      EXPECT_EQ(j["config_hash"], m["config_hash"]);
      test.insert(j["program"].get<std::string>());
    }
    for (const auto& j : read_jsonl(p1.train)) EXPECT_EQ(test.count(j["program"].get<std::string>()), 0u);
  }
}

TEST(Commands, PipelineEndToEnd) {
  TempDir dir("pipeline");
  auto cfg = tiny("towers", dir);
  cmd_gen_data(cfg);
  const json trained = cmd_train(cfg);
  EXPECT_TRUE(fs::exists(paths_for(cfg).policy("blended")));
  EXPECT_TRUE(fs::exists(paths_for(cfg).value("blended")));
  // A second train with the same config reuses its checkpoints.
  const auto stamp = fs::last_write_time(paths_for(cfg).policy("blended"));
  cmd_train(cfg);
  EXPECT_EQ(fs::last_write_time(paths_for(cfg).policy("blended")), stamp);

  const json summary = cmd_synthesize(cfg);
  const auto domain = make_domain(cfg);
  const auto tasks = read_tasks(paths_for(cfg).test, *domain);
  std::map<std::string, const TaskRecord*> by_id;
  for (const auto& t : tasks) by_id[t.id] = &t;
  std::vector<std::string> files;
  for (const std::string alg : {"best_first", "astar"}) {
    const std::string f = paths_for(cfg).results(alg, "blended");
    files.push_back(f);
    int solved = 0;
    for (const auto& j : read_jsonl(f)) {
      const auto r = result_from_json(j);
      EXPECT_LE(r.nodes, cfg.node_budget);
      if (r.solved) {
        ++solved;
        EXPECT_TRUE(check_solution(*domain, *parse_program(r.solution, domain->grammar()), by_id.at(r.task)->spec));
      }
    }
    EXPECT_EQ(summary["conditions"][alg + "/blended"]["solved"].get<int>(), solved);
  }
  const std::string csv = cmd_curve(files, dir / "curve.csv", dir / "curve.svg", 5);
  EXPECT_TRUE(fs::exists(dir / "curve.svg"));
  EXPECT_EQ(slurp(dir / "curve.csv"), csv);

  // Results from another dataset are refused.
  TempDir other("pipeline-other");
  auto cfg2 = tiny("towers", other);
  cfg2.seed = 5;
  cfg2.algorithms = {"best_first"};
  cmd_gen_data(cfg2);
  cmd_train(cfg2);
  cmd_synthesize(cfg2);
  EXPECT_THROW(cmd_curve({files[0], paths_for(cfg2).results("best_first", "blended")}, ""), ConfigError);

  // Checkpoints from a different configuration are refused.
  cfg.d = 16;
  EXPECT_THROW(cmd_synthesize(cfg), ConfigError);
}

TEST(Commands, SelftestPasses) {
  for (const auto& c : selftest()) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
}
