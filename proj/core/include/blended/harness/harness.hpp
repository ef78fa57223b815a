#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blended/interp/domain.hpp"
#include "blended/lists/lists.hpp"
#include "blended/policy/model.hpp"
#include "blended/search/search.hpp"
#include "blended/towers/towers.hpp"

namespace blended::harness {

using json = nlohmann::json;

struct RunConfig {
  std::string domain = "lists";
  std::vector<std::string> encoders = {"blended", "neural", "sequence"};
  int d = 64;
  std::uint64_t seed = 1;

  // data
  int train_tasks = 20000;
  int test_tasks = 100;
  std::int64_t list_range = 64;
  int grid_width = 24;
  int grid_height = 16;
  int motif_pool = 48;
  int motif_max_actions = 9;

  // policy training
  int epochs = 10;
  int batch = 32;
  double lr = 1e-3;
  double stop_fraction = 0.0;

  // value training
  int value_tasks = 1000;
  int rollouts_per_task = 4;
  int value_epochs = 3;
  double value_holdout = 0.2;
  bool spec_only = false;

  // search
  std::vector<std::string> algorithms = {"best_first"};
  long node_budget = 2000;
  double time_budget = 0.0;
  int max_depth = kDefaultMaxDepth;
  bool prune = false;

  // precision/recall experiment
  int pr_k = 15;
  int pr_tasks = 50;
  std::vector<double> thresholds;

  std::string data_dir = "data";
  std::string run_dir = "run";

  static RunConfig from_json(const json& j);
  static RunConfig load(const std::string& path);
  json to_json() const;

  // Hash of the fields that determine the dataset.
  std::uint64_t data_hash() const;
  // Data hash plus the fields that determine trained checkpoints.
  std::uint64_t model_hash() const;
  void validate() const;
};

std::string hex(std::uint64_t h);

std::unique_ptr<Domain> make_domain(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Task generation

struct TowerGenOptions {
  int motif_pool = 48;
  int motif_max_actions = 9;
  int max_actions = kDefaultMaxDepth;
};

struct TowerTaskSet {
  std::vector<ExprPtr> motifs;
  std::vector<TaskRecord> train;
  std::vector<TaskRecord> test;
  // Motif ids per task, parallel to train/test.
  std::vector<std::vector<int>> train_parts;
  std::vector<std::vector<int>> test_parts;
};

// Motifs are PCFG samples; tasks place 1-3 motifs side by side with
// (embed M) and moveHand. Test tasks use motif sets no training task uses.
TowerTaskSet gen_tower_tasks(const towers::TowerDomain& domain, int n_train, int n_test, std::uint64_t seed,
                             const TowerGenOptions& opts = {});

struct ListTaskSet {
  std::vector<TaskRecord> train;
  std::vector<TaskRecord> test;
};

ListTaskSet gen_list_tasks(const lists::ListDomain& domain, int n_train, int n_test, std::uint64_t seed);

TaskRecord list_record(const std::string& id, const lists::ListTask& t);
TaskRecord tower_record(const std::string& id, const towers::TowerDomain& domain, const ExprPtr& program);

// ---------------------------------------------------------------------------
// Serialization (JSON lines)

json value_to_json(const Value& v);
Value value_from_json(const json& j);
json task_to_json(const TaskRecord& t);
TaskRecord task_from_json(const json& j, const Domain& domain);

void write_jsonl(const std::string& path, const std::vector<json>& rows);
std::vector<json> read_jsonl(const std::string& path);
std::vector<TaskRecord> read_tasks(const std::string& path, const Domain& domain);
json read_json(const std::string& path);
void write_json(const std::string& path, const json& j);
// Writes through a temporary file and renames.
void write_text(const std::string& path, const std::string& text);

// ---------------------------------------------------------------------------
// Results and curves

struct ResultRecord {
  std::string task;
  std::string algorithm;
  std::string encoder;
  bool solved = false;
  long nodes = 0;
  long solved_at = -1;
  double seconds = 0.0;
  std::string solution;
  long node_budget = 0;
};

json result_to_json(const ResultRecord& r, const RunConfig& cfg);
ResultRecord result_from_json(const json& j);

struct CurvePoint {
  long budget = 0;
  double fraction = 0.0;
};

// Fraction of records solved within each budget.
std::vector<CurvePoint> solve_curve(const std::vector<ResultRecord>& records, const std::vector<long>& budgets);
std::vector<long> default_budgets(long max_budget, int points = 20);

struct Condition {
  std::string name;
  std::vector<ResultRecord> records;
};

std::string curves_csv(const std::vector<Condition>& conds, const std::vector<long>& budgets);
std::string curves_svg(const std::vector<Condition>& conds, const std::vector<long>& budgets);

// ---------------------------------------------------------------------------
// Precision/recall

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

// Positive class: "good" (label 1). Predicted good iff score >= threshold.
PRPoint pr_point(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);
std::vector<PRPoint> pr_curve(const std::vector<double>& scores, const std::vector<int>& labels,
                              const std::vector<double>& thresholds);
// Best precision over every distinct operating point with recall >= min_recall.
std::optional<PRPoint> best_precision_at_recall(const std::vector<double>& scores, const std::vector<int>& labels,
                                                double min_recall);

// Recall tolerance when comparing the value classifier with the abstraction.
inline constexpr double kRecallMatchTolerance = 0.05;

// ---------------------------------------------------------------------------
// Commands

struct Paths {
  std::string train, test, triplets, manifest;
  std::string policy(const std::string& enc) const;
  std::string value(const std::string& enc) const;
  std::string spec_only() const;
  std::string train_log(const std::string& enc) const;
  std::string results(const std::string& alg, const std::string& enc) const;
  std::string summary() const;
  std::string pr_table() const;
  std::string run_dir;
};

Paths paths_for(const RunConfig& cfg);

// Worker threads for task-parallel commands (BLENDED_WORKERS, default 1).
int worker_count();

void log_line(const std::string& msg);

json cmd_gen_data(const RunConfig& cfg);
json cmd_train(const RunConfig& cfg);
json cmd_synthesize(const RunConfig& cfg, const std::string& tasks_path = "");
// Reads result files; writes CSV (and SVG when svg_path is nonempty).
std::string cmd_curve(const std::vector<std::string>& result_files, const std::string& csv_path,
                      const std::string& svg_path = "", int points = 20);
json cmd_pr_experiment(const RunConfig& cfg);
json cmd_grad_check(const RunConfig& cfg, int sketches = 4);

struct SelfCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<SelfCheck> selftest();

// Per-task search with a loaded policy/value.
ResultRecord run_search(const std::string& algorithm, const Domain& domain, const TaskRecord& task,
                        const Policy& policy, const ValueFunction* value, const SearchOptions& opts,
                        std::uint64_t seed, std::size_t index);

}  // namespace blended::harness
