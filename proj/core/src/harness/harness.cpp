#include "blended/harness/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"

namespace blended::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RunConfig

namespace {

template <typename T>
void take(const json& j, const char* key, T& field, std::set<std::string>& seen) {
  seen.insert(key);
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  std::set<std::string> seen;
  try {
    take(j, "domain", c.domain, seen);
    take(j, "encoders", c.encoders, seen);
    take(j, "d", c.d, seen);
    take(j, "seed", c.seed, seen);
    take(j, "train_tasks", c.train_tasks, seen);
    take(j, "test_tasks", c.test_tasks, seen);
    take(j, "list_range", c.list_range, seen);
    take(j, "grid_width", c.grid_width, seen);
    take(j, "grid_height", c.grid_height, seen);
    take(j, "motif_pool", c.motif_pool, seen);
    take(j, "motif_max_actions", c.motif_max_actions, seen);
    take(j, "epochs", c.epochs, seen);
    take(j, "batch", c.batch, seen);
    take(j, "lr", c.lr, seen);
    take(j, "stop_fraction", c.stop_fraction, seen);
    take(j, "value_tasks", c.value_tasks, seen);
    take(j, "rollouts_per_task", c.rollouts_per_task, seen);
    take(j, "value_epochs", c.value_epochs, seen);
    take(j, "value_holdout", c.value_holdout, seen);
    take(j, "spec_only", c.spec_only, seen);
    take(j, "algorithms", c.algorithms, seen);
    take(j, "node_budget", c.node_budget, seen);
    take(j, "time_budget", c.time_budget, seen);
    take(j, "max_depth", c.max_depth, seen);
    take(j, "prune", c.prune, seen);
    take(j, "pr_k", c.pr_k, seen);
    take(j, "pr_tasks", c.pr_tasks, seen);
    take(j, "thresholds", c.thresholds, seen);
    take(j, "data_dir", c.data_dir, seen);
    take(j, "run_dir", c.run_dir, seen);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [k, v] : j.items())
    if (!seen.count(k)) throw ConfigError("config: unknown key '" + k + "'");
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  return json{{"domain", domain},
              {"encoders", encoders},
              {"d", d},
              {"seed", seed},
              {"train_tasks", train_tasks},
              {"test_tasks", test_tasks},
              {"list_range", list_range},
              {"grid_width", grid_width},
              {"grid_height", grid_height},
              {"motif_pool", motif_pool},
              {"motif_max_actions", motif_max_actions},
              {"epochs", epochs},
              {"batch", batch},
              {"lr", lr},
              {"stop_fraction", stop_fraction},
              {"value_tasks", value_tasks},
              {"rollouts_per_task", rollouts_per_task},
              {"value_epochs", value_epochs},
              {"value_holdout", value_holdout},
              {"spec_only", spec_only},
              {"algorithms", algorithms},
              {"node_budget", node_budget},
              {"time_budget", time_budget},
              {"max_depth", max_depth},
              {"prune", prune},
              {"pr_k", pr_k},
              {"pr_tasks", pr_tasks},
              {"thresholds", thresholds},
              {"data_dir", data_dir},
              {"run_dir", run_dir}};
}

std::uint64_t RunConfig::data_hash() const {
  const json j{{"domain", domain},       {"seed", seed},
               {"train", train_tasks},   {"test", test_tasks},
               {"range", list_range},    {"grid", {grid_width, grid_height}},
               {"motifs", motif_pool},   {"motif_actions", motif_max_actions},
               {"max_depth", max_depth}};
  return fnv1a(j.dump());
}

std::uint64_t RunConfig::model_hash() const {
  const json j{{"data", data_hash()},
               {"d", d},
               {"epochs", epochs},
               {"batch", batch},
               {"lr", lr},
               {"stop", stop_fraction},
               {"value_tasks", value_tasks},
               {"rollouts", rollouts_per_task},
               {"value_epochs", value_epochs},
               {"holdout", value_holdout}};
  return fnv1a(j.dump());
}

void RunConfig::validate() const {
  if (domain != "lists" && domain != "towers") throw ConfigError("domain must be lists or towers");
  for (const auto& e : encoders) parse_encoder(e);
  for (const auto& a : algorithms)
    if (a != "best_first" && a != "astar" && a != "sample") throw ConfigError("unknown algorithm " + a);
  if (d <= 0) throw ConfigError("d must be positive");
  if (train_tasks < 0 || test_tasks < 0) throw ConfigError("task counts must be nonnegative");
  if (batch <= 0 || lr <= 0) throw ConfigError("batch and lr must be positive");
  if (node_budget <= 0) throw ConfigError("node_budget must be positive");
  if (max_depth <= 0) throw ConfigError("max_depth must be positive");
  if (value_holdout < 0 || value_holdout >= 1) throw ConfigError("value_holdout must be in [0, 1)");
  if (prune && domain != "towers") throw ConfigError("pruning needs the towers domain");
}

std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::unique_ptr<Domain> make_domain(const RunConfig& cfg) {
  if (cfg.domain == "lists") return std::make_unique<lists::ListDomain>(cfg.list_range);
  return std::make_unique<towers::TowerDomain>(towers::TowerConfig{cfg.grid_width, cfg.grid_height});
}

// ---------------------------------------------------------------------------
// Tasks

TaskRecord list_record(const std::string& id, const lists::ListTask& t) { return TaskRecord{id, t.spec(), t.program}; }

TaskRecord tower_record(const std::string& id, const towers::TowerDomain& domain, const ExprPtr& program) {
  const ImageGrid img = towers::render(domain.execute(*program), domain.config());
  return TaskRecord{id, domain.spec_for(img), program};
}

ListTaskSet gen_list_tasks(const lists::ListDomain& domain, int n_train, int n_test, std::uint64_t seed) {
  ListTaskSet out;
  lists::GenOptions opts;
  opts.range = domain.range();
  std::set<std::string> test_programs;
  for (int i = 0; static_cast<int>(out.test.size()) < n_test; ++i) {
    Rng rng = make_rng(seed, "list-test", static_cast<std::uint64_t>(i));
    const auto t = lists::gen_task(rng, domain, opts);
    if (!test_programs.insert(print_program(*t.program)).second) continue;
    out.test.push_back(list_record("test-" + std::to_string(out.test.size()), t));
  }
  for (int i = 0; static_cast<int>(out.train.size()) < n_train; ++i) {
    Rng rng = make_rng(seed, "list-train", static_cast<std::uint64_t>(i));
    const auto t = lists::gen_task(rng, domain, opts);
    if (test_programs.count(print_program(*t.program))) continue;
    out.train.push_back(list_record("train-" + std::to_string(out.train.size()), t));
  }
  return out;
}

namespace {

struct Motif {
  ExprPtr program;
  int lo = 0;  // footprint columns relative to the starting hand
  int hi = 0;
  int actions = 0;
};

std::optional<Motif> measure_motif(const ExprPtr& p, const towers::TowerDomain& domain, int max_actions) {
  const auto& cfg = domain.config();
  const int actions = static_cast<int>(derive_actions(p, domain.grammar()).size());
  if (actions > max_actions) return std::nullopt;
  const towers::TowerDomain wide(towers::TowerConfig{cfg.width * 3, cfg.height});
  TowerState start{cfg.width, 1, {}};
  TowerState end;
  try {
    end = wide.execute(*p, start);
  } catch (const EvalError&) {
    return std::nullopt;
  }
  if (end.history.empty()) return std::nullopt;
  Motif m{p, 1 << 20, -(1 << 20), actions};
  for (const auto& b : end.history) {
    m.lo = std::min(m.lo, b.x - cfg.width);
    m.hi = std::max(m.hi, b.x + b.w - cfg.width);
  }
  if (m.hi - m.lo > cfg.width / 2) return std::nullopt;
  return m;
}

// Relative footprint key so translated copies count once.
std::string motif_key(const Motif& m, const towers::TowerDomain& domain) {
  const auto& cfg = domain.config();
  const towers::TowerDomain wide(towers::TowerConfig{cfg.width * 3, cfg.height});
  const TowerState end = wide.execute(*m.program, TowerState{cfg.width, 1, {}});
  return towers::ascii(towers::render(end, wide.config()));
}

std::vector<Motif> motif_pool(const towers::TowerDomain& domain, int n, int max_actions, std::uint64_t seed) {
  std::vector<Motif> pool;
  std::set<std::string> seen;
  Rng rng = make_rng(seed, "motif");
  for (int attempt = 0; static_cast<int>(pool.size()) < n; ++attempt) {
    if (attempt > 200000) throw ConfigError("motif pool: sampling budget exhausted");
    ExprPtr p = sample_expression(domain.grammar(), "P", rng, 6);
    auto m = measure_motif(p, domain, max_actions);
    if (!m) continue;
    if (!seen.insert(motif_key(*m, domain)).second) continue;
    pool.push_back(*m);
  }
  return pool;
}

// Side-by-side composition; nullopt when it does not fit the grid or the action cap.
std::optional<ExprPtr> compose(const std::vector<const Motif*>& parts, Rng& rng, const towers::TowerDomain& domain,
                               int max_actions) {
  const int width = domain.config().width;
  std::vector<std::string> stmts;
  int x = 0;
  int prev_hi = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Motif& m = *parts[i];
    const int gap = static_cast<int>(uniform_int(rng, 0, 1));
    const int origin = i == 0 ? std::max(0, -m.lo) + gap : prev_hi - m.lo + gap;
    const int move = origin - x;
    if (move < 0 || move > 8) return std::nullopt;
    if (move > 0) stmts.push_back("(moveHand " + std::to_string(move) + ")");
    stmts.push_back("(embed " + print_program(*m.program) + ")");
    x = origin;
    prev_hi = origin + m.hi;
  }
  if (prev_hi > width) return std::nullopt;
  std::string text = "(done)";
  for (auto it = stmts.rbegin(); it != stmts.rend(); ++it) text = "(seq " + *it + " " + text + ")";
  ExprPtr p = parse_program(text, domain.grammar());
  if (static_cast<int>(derive_actions(p, domain.grammar()).size()) > max_actions) return std::nullopt;
  try {
    domain.execute(*p);
  } catch (const EvalError&) {
    return std::nullopt;
  }
  return p;
}

}  // namespace

TowerTaskSet gen_tower_tasks(const towers::TowerDomain& domain, int n_train, int n_test, std::uint64_t seed,
                             const TowerGenOptions& opts) {
  const auto pool = motif_pool(domain, opts.motif_pool, opts.motif_max_actions, seed);
  TowerTaskSet out;
  for (const auto& m : pool) out.motifs.push_back(m.program);
  const auto n = static_cast<std::int64_t>(pool.size());

  std::set<std::vector<int>> held_out;
  std::set<std::string> test_programs;
  auto draw_parts = [&](Rng& rng, int k) {
    std::vector<int> ids(static_cast<std::size_t>(k));
    for (auto& id : ids) id = static_cast<int>(uniform_int(rng, 0, n - 1));
    return ids;
  };
  auto build = [&](Rng& rng, const std::vector<int>& ids) {
    std::vector<const Motif*> parts;
    for (int id : ids) parts.push_back(&pool[static_cast<std::size_t>(id)]);
    return compose(parts, rng, domain, opts.max_actions);
  };
  auto key_of = [](std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  for (int i = 0; static_cast<int>(out.test.size()) < n_test; ++i) {
    if (i > 100 * (n_test + 10)) throw ConfigError("tower test tasks: sampling budget exhausted");
    Rng rng = make_rng(seed, "tower-test", static_cast<std::uint64_t>(i));
    const auto ids = draw_parts(rng, static_cast<int>(uniform_int(rng, 2, 3)));
    if (held_out.count(key_of(ids))) continue;
    auto p = build(rng, ids);
    if (!p || !test_programs.insert(print_program(**p)).second) continue;
    held_out.insert(key_of(ids));
    out.test.push_back(tower_record("test-" + std::to_string(out.test.size()), domain, *p));
    out.test_parts.push_back(ids);
  }
  for (int i = 0; static_cast<int>(out.train.size()) < n_train; ++i) {
    if (i > 100 * (n_train + 10)) throw ConfigError("tower training tasks: sampling budget exhausted");
    Rng rng = make_rng(seed, "tower-train", static_cast<std::uint64_t>(i));
    const auto ids = draw_parts(rng, static_cast<int>(uniform_int(rng, 1, 3)));
    if (held_out.count(key_of(ids))) continue;
    auto p = build(rng, ids);
    if (!p || test_programs.count(print_program(**p))) continue;
    out.train.push_back(tower_record("train-" + std::to_string(out.train.size()), domain, *p));
    out.train_parts.push_back(ids);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json value_to_json(const Value& v) {
  if (v.is_int()) return v.as_int();
  if (v.is_bool()) return v.as_bool();
  if (v.is_list()) return v.as_list();
  if (v.is_tower()) {
    const auto& s = v.as_tower();
    json h = json::array();
    for (const auto& b : s.history) h.push_back({b.x, b.y, b.w, b.h});
    return json{{"hand", s.hand}, {"orientation", s.orientation}, {"history", h}};
  }
  if (v.is_grid()) {
    const auto& g = v.as_grid();
    return json{{"width", g.width}, {"height", g.height}, {"rle", towers::rle_encode(g)}};
  }
  throw ConfigError("closures are not serializable");
}

Value value_from_json(const json& j) {
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number_integer()) return Value(j.get<std::int64_t>());
  if (j.is_array()) return Value(j.get<IntList>());
  if (j.is_object() && j.contains("rle"))
    return Value(towers::rle_decode(j.at("width").get<int>(), j.at("height").get<int>(), j.at("rle").get<std::vector<int>>()));
  if (j.is_object() && j.contains("hand")) {
    TowerState s;
    s.hand = j.at("hand").get<int>();
    s.orientation = j.at("orientation").get<int>();
    for (const auto& b : j.at("history")) s.history.push_back(Block{b[0], b[1], b[2], b[3]});
    return Value(std::move(s));
  }
  throw ConfigError("cannot read value " + j.dump());
}

json task_to_json(const TaskRecord& t) {
  json pairs = json::array();
  for (const auto& [x, y] : t.spec.pairs) pairs.push_back({value_to_json(x), value_to_json(y)});
  json j{{"id", t.id}, {"domain", t.spec.domain}, {"pairs", pairs}};
  if (t.program) j["program"] = print_program(*t.program);
  return j;
}

TaskRecord task_from_json(const json& j, const Domain& domain) {
  TaskRecord t;
  t.id = j.at("id").get<std::string>();
  t.spec.domain = j.at("domain").get<std::string>();
  if (t.spec.domain != domain.name()) throw ConfigError("task " + t.id + " belongs to domain " + t.spec.domain);
  for (const auto& p : j.at("pairs")) t.spec.pairs.emplace_back(value_from_json(p[0]), value_from_json(p[1]));
  if (j.contains("program")) t.program = parse_program(j.at("program").get<std::string>(), domain.grammar());
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + path);
    f << text;
    if (!f) throw ConfigError("write failed: " + path);
  }
  fs::rename(tmp, path);
}

void write_jsonl(const std::string& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += r.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::vector<json> rows;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<TaskRecord> read_tasks(const std::string& path, const Domain& domain) {
  std::vector<TaskRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(task_from_json(j, domain));
  return out;
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  return json::parse(f);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Results, curves, PR

json result_to_json(const ResultRecord& r, const RunConfig& cfg) {
  return json{{"task", r.task},
              {"algorithm", r.algorithm},
              {"encoder", r.encoder},
              {"solved", r.solved},
              {"nodes", r.nodes},
              {"solved_at", r.solved_at},
              {"seconds", r.seconds},
              {"solution", r.solution},
              {"node_budget", r.node_budget},
              {"prune", cfg.prune},
              {"config_hash", hex(cfg.model_hash())},
              {"data_hash", hex(cfg.data_hash())},
              {"seed", cfg.seed}};
}

ResultRecord result_from_json(const json& j) {
  ResultRecord r;
  r.task = j.at("task").get<std::string>();
  r.algorithm = j.at("algorithm").get<std::string>();
  r.encoder = j.at("encoder").get<std::string>();
  r.solved = j.at("solved").get<bool>();
  r.nodes = j.at("nodes").get<long>();
  r.solved_at = j.at("solved_at").get<long>();
  r.seconds = j.at("seconds").get<double>();
  r.solution = j.at("solution").get<std::string>();
  r.node_budget = j.at("node_budget").get<long>();
  return r;
}

std::vector<CurvePoint> solve_curve(const std::vector<ResultRecord>& records, const std::vector<long>& budgets) {
  std::vector<CurvePoint> out;
  for (long b : budgets) {
    long k = 0;
    for (const auto& r : records) k += (r.solved && r.solved_at <= b) ? 1 : 0;
    out.push_back({b, records.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(records.size())});
  }
  return out;
}

std::vector<long> default_budgets(long max_budget, int points) {
  std::vector<long> out;
  for (int i = 1; i <= points; ++i) {
    const long b = max_budget * i / points;
    if (b > 0 && (out.empty() || out.back() != b)) out.push_back(b);
  }
  return out;
}

std::string curves_csv(const std::vector<Condition>& conds, const std::vector<long>& budgets) {
  std::ostringstream os;
  os << "condition,budget,fraction_solved\n";
  for (const auto& c : conds)
    for (const auto& p : solve_curve(c.records, budgets)) os << c.name << ',' << p.budget << ',' << p.fraction << '\n';
  return os.str();
}

std::string curves_svg(const std::vector<Condition>& conds, const std::vector<long>& budgets) {
  const double W = 640, H = 400, m = 50;
  const double xmax = budgets.empty() ? 1.0 : static_cast<double>(budgets.back());
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\"" << H - m
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">nodes</text>\n";
  os << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
     << ")\" text-anchor=\"middle\">fraction solved</text>\n";
  for (std::size_t i = 0; i < conds.size(); ++i) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[i % 6] << "\" points=\"";
    os << m << ',' << H - m << ' ';
    for (const auto& p : solve_curve(conds[i].records, budgets))
      os << m + (W - 2 * m) * static_cast<double>(p.budget) / xmax << ',' << H - m - (H - 2 * m) * p.fraction << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << W - m - 150 << "\" y=\"" << m + 16 * static_cast<double>(i) << "\" fill=\"" << colors[i % 6]
       << "\">" << conds[i].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

PRPoint pr_point(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
  PRPoint p;
  p.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i]) {
      (pred ? p.tp : p.fn)++;
    } else {
      (pred ? p.fp : p.tn)++;
    }
  }
  p.precision = p.tp + p.fp ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 1.0;
  p.recall = p.tp + p.fn ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn) : 1.0;
  return p;
}

std::vector<PRPoint> pr_curve(const std::vector<double>& scores, const std::vector<int>& labels,
                              const std::vector<double>& thresholds) {
  std::vector<PRPoint> out;
  for (double t : thresholds) out.push_back(pr_point(scores, labels, t));
  return out;
}

std::optional<PRPoint> best_precision_at_recall(const std::vector<double>& scores, const std::vector<int>& labels,
                                                double min_recall) {
  std::vector<double> cuts(scores);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::optional<PRPoint> best;
  for (double t : cuts) {
    const PRPoint p = pr_point(scores, labels, t);
    if (p.recall + 1e-12 < min_recall) continue;
    if (!best || p.precision > best->precision) best = p;
  }
  return best;
}

}  // namespace blended::harness
