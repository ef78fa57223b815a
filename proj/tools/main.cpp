#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "blended/harness/harness.hpp"
#include "blended/util/error.hpp"

using namespace blended;
using harness::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string domain;
  std::vector<std::string> encoders;
  std::vector<std::string> algorithms;
  std::optional<long> node_budget;
  std::optional<int> train_tasks;
  std::optional<int> test_tasks;
  std::optional<int> epochs;
  std::optional<int> d;
  std::string data_dir;
  std::string run_dir;
  bool prune = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Run configuration (JSON)");
  app->add_option("--seed", c.seed, "Override the run seed");
  app->add_option("--domain", c.domain, "lists or towers")->check(CLI::IsMember({"lists", "towers"}));
  app->add_option("--encoder", c.encoders, "blended, neural or sequence (repeatable)");
  app->add_option("--algorithm", c.algorithms, "best_first, astar or sample (repeatable)");
  app->add_option("--node-budget", c.node_budget, "Search node budget");
  app->add_option("--train-tasks", c.train_tasks);
  app->add_option("--test-tasks", c.test_tasks);
  app->add_option("--epochs", c.epochs);
  app->add_option("--d", c.d, "Embedding width");
  app->add_option("--data-dir", c.data_dir);
  app->add_option("--run-dir", c.run_dir);
  app->add_flag("--prune", c.prune, "Prune with the tower abstraction during search");
}

harness::RunConfig resolve(const Common& c) {
  json j = c.config.empty() ? json::object() : harness::read_json(c.config);
  if (c.seed) j["seed"] = *c.seed;
  if (!c.domain.empty()) j["domain"] = c.domain;
  if (!c.encoders.empty()) j["encoders"] = c.encoders;
  if (!c.algorithms.empty()) j["algorithms"] = c.algorithms;
  if (c.node_budget) j["node_budget"] = *c.node_budget;
  if (c.train_tasks) j["train_tasks"] = *c.train_tasks;
  if (c.test_tasks) j["test_tasks"] = *c.test_tasks;
  if (c.epochs) j["epochs"] = *c.epochs;
  if (c.d) j["d"] = *c.d;
  if (!c.data_dir.empty()) j["data_dir"] = c.data_dir;
  if (!c.run_dir.empty()) j["run_dir"] = c.run_dir;
  if (c.prune) j["prune"] = true;
  return harness::RunConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Program synthesis with blended abstract semantics"};
  app.require_subcommand(1);

  Common gen, train, synth, pr, gc;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate tasks, imitation triplets and a manifest");
  add_common(gen_cmd, gen);
  auto* train_cmd = app.add_subcommand("train", "Train policy, collect rollouts, train value");
  add_common(train_cmd, train);
  auto* synth_cmd = app.add_subcommand("synthesize", "Search for programs on a task file");
  add_common(synth_cmd, synth);
  std::string tasks_path;
  synth_cmd->add_option("--tasks", tasks_path, "Task file (defaults to the test split)");

  auto* curve_cmd = app.add_subcommand("curve", "Solve-rate curves from result files");
  std::vector<std::string> result_files;
  std::string csv_out, svg_out;
  int points = 20;
  curve_cmd->add_option("results", result_files, "Result JSONL files")->required()->check(CLI::ExistingFile);
  curve_cmd->add_option("-o,--out", csv_out, "CSV output (stdout when omitted)");
  curve_cmd->add_option("--svg", svg_out, "SVG output");
  curve_cmd->add_option("--points", points, "Budget grid size");

  auto* pr_cmd = app.add_subcommand("pr-experiment", "Value function vs abstraction precision/recall");
  add_common(pr_cmd, pr);
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of the rep/policy/value graphs");
  add_common(gc_cmd, gc);
  double tolerance = 1e-4;
  gc_cmd->add_option("--tolerance", tolerance);
  auto* self_cmd = app.add_subcommand("selftest", "Run invariant self-checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      std::cout << harness::cmd_gen_data(resolve(gen)).dump(2) << "\n";
    } else if (*train_cmd) {
      std::cout << harness::cmd_train(resolve(train)).dump(2) << "\n";
    } else if (*synth_cmd) {
      std::cout << harness::cmd_synthesize(resolve(synth), tasks_path).dump(2) << "\n";
    } else if (*curve_cmd) {
      const std::string csv = harness::cmd_curve(result_files, csv_out, svg_out, points);
      if (csv_out.empty()) std::cout << csv;
    } else if (*pr_cmd) {
      std::cout << harness::cmd_pr_experiment(resolve(pr)).dump(2) << "\n";
    } else if (*gc_cmd) {
      const json r = harness::cmd_grad_check(resolve(gc));
      std::cout << r.dump(2) << "\n";
      return r["max_rel_error"].get<double>() <= tolerance ? 0 : 1;
    } else if (*self_cmd) {
      bool ok = true;
      for (const auto& c : harness::selftest()) {
        std::cout << (c.pass ? "ok   " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
        ok = ok && c.pass;
      }
      return ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
