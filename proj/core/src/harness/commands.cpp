#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"

namespace blended::harness {

namespace fs = std::filesystem;

std::string Paths::policy(const std::string& enc) const { return run_dir + "/policy-" + enc + ".ckpt"; }
std::string Paths::value(const std::string& enc) const { return run_dir + "/value-" + enc + ".ckpt"; }
std::string Paths::spec_only() const { return run_dir + "/policy-spec_only.ckpt"; }
std::string Paths::train_log(const std::string& enc) const { return run_dir + "/train-" + enc + ".csv"; }
std::string Paths::results(const std::string& alg, const std::string& enc) const {
  return run_dir + "/results-" + alg + "-" + enc + ".jsonl";
}
std::string Paths::summary() const { return run_dir + "/summary.json"; }
std::string Paths::pr_table() const { return run_dir + "/pr.csv"; }

Paths paths_for(const RunConfig& cfg) {
  Paths p;
  p.train = cfg.data_dir + "/train.jsonl";
  p.test = cfg.data_dir + "/test.jsonl";
  p.triplets = cfg.data_dir + "/triplets.jsonl";
  p.manifest = cfg.data_dir + "/manifest.json";
  p.run_dir = cfg.run_dir;
  return p;
}

int worker_count() {
  if (const char* v = std::getenv("BLENDED_WORKERS")) {
    const int n = std::atoi(v);
    if (n > 0) return n;
  }
  return 1;
}

void log_line(const std::string& msg) {
  static std::mutex mu;
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%H:%M:%S", std::localtime(&now));
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[" << buf << "] " << msg << std::endl;
}

namespace {

void check_manifest(const RunConfig& cfg) {
  const Paths p = paths_for(cfg);
  if (!fs::exists(p.manifest)) throw ConfigError(p.manifest + " not found; run gen-data first");
  const json m = read_json(p.manifest);
  if (m.value("config_hash", "") != hex(cfg.data_hash()))
    throw ConfigError(p.manifest + ": dataset was generated with a different configuration");
}

json checkpoint_extra(const RunConfig& cfg, bool complete, json more = json::object()) {
  more["config_hash"] = hex(cfg.model_hash());
  more["data_hash"] = hex(cfg.data_hash());
  more["seed"] = cfg.seed;
  more["complete"] = complete;
  return more;
}

json checkpoint_meta(const std::string& path) {
  return json::parse(ad::read_checkpoint_header(path).meta).value("extra", json::object());
}

bool cached(const std::string& path, const RunConfig& cfg) {
  if (!fs::exists(path)) return false;
  try {
    const json e = checkpoint_meta(path);
    return e.value("complete", false) && e.value("config_hash", "") == hex(cfg.model_hash());
  } catch (const Error&) {
    return false;
  }
}

void require_checkpoint(const std::string& path, const RunConfig& cfg) {
  if (!fs::exists(path)) throw ConfigError(path + " not found; run train first");
  const json e = checkpoint_meta(path);
  if (e.value("data_hash", "") != hex(cfg.data_hash()) || e.value("config_hash", "") != hex(cfg.model_hash()))
    throw ConfigError(path + ": checkpoint belongs to a different configuration");
  if (!e.value("complete", false)) throw ConfigError(path + ": training did not finish");
}

void append_csv(std::string& csv, const EpochLog& l) {
  std::ostringstream os;
  os << l.epoch << ',' << l.split << ',' << l.loss << ',' << l.seconds << '\n';
  csv += os.str();
}

ModelOptions model_options(const RunConfig& cfg, const std::string& enc) {
  return ModelOptions{parse_encoder(enc), cfg.d, derive_seed(cfg.seed, "init")};
}

// Runs fn(i) for i in [0, n) on the configured worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<int>(worker_count(), static_cast<int>(std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

// ---------------------------------------------------------------------------

json cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  const auto domain = make_domain(cfg);
  const Paths p = paths_for(cfg);
  std::vector<TaskRecord> train, test;
  if (cfg.domain == "lists") {
    auto set = gen_list_tasks(static_cast<const lists::ListDomain&>(*domain), cfg.train_tasks, cfg.test_tasks, cfg.seed);
    train = std::move(set.train);
    test = std::move(set.test);
  } else {
    TowerGenOptions opts;
    opts.motif_pool = cfg.motif_pool;
    opts.motif_max_actions = cfg.motif_max_actions;
    opts.max_actions = cfg.max_depth;
    auto set = gen_tower_tasks(static_cast<const towers::TowerDomain&>(*domain), cfg.train_tasks, cfg.test_tasks,
                               cfg.seed, opts);
    train = std::move(set.train);
    test = std::move(set.test);
  }
  const std::string hash = hex(cfg.data_hash());
  auto rows = [&](const std::vector<TaskRecord>& ts) {
    std::vector<json> out;
    for (const auto& t : ts) {
      json j = task_to_json(t);
      j["config_hash"] = hash;
      j["seed"] = cfg.seed;
      out.push_back(std::move(j));
    }
    return out;
  };
  const ImitationDataset data = make_imitation_dataset(domain->grammar(), train);
  std::vector<json> triplets;
  for (const auto& tr : data.traces)
    for (std::size_t k = 0; k < tr.actions.size(); ++k)
      triplets.push_back(json{{"task", train[static_cast<std::size_t>(tr.task)].id},
                              {"step", k},
                              {"sketch", print_program(*tr.sketches[k].root())},
                              {"rule", tr.actions[k].rule}});
  write_jsonl(p.train, rows(train));
  write_jsonl(p.test, rows(test));
  write_jsonl(p.triplets, triplets);
  const json manifest{{"config_hash", hash},
                      {"seed", cfg.seed},
                      {"domain", cfg.domain},
                      {"grammar_hash", hex(domain->grammar().hash())},
                      {"counts", {{"train", train.size()}, {"test", test.size()}, {"triplets", triplets.size()}}},
                      {"files", {{"train", "train.jsonl"}, {"test", "test.jsonl"}, {"triplets", "triplets.jsonl"}}}};
  write_json(p.manifest, manifest);
  return manifest;
}

json cmd_train(const RunConfig& cfg) {
  cfg.validate();
  check_manifest(cfg);
  const auto domain = make_domain(cfg);
  const Paths p = paths_for(cfg);
  fs::create_directories(p.run_dir);
  const auto train = read_tasks(p.train, *domain);
  const ImitationDataset data = make_imitation_dataset(domain->grammar(), train);
  json report = json::object();

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch = cfg.batch;
  tc.lr = cfg.lr;
  tc.seed = derive_seed(cfg.seed, "train");
  tc.stop_fraction = cfg.stop_fraction;

  for (const auto& enc : cfg.encoders) {
    const std::string ppath = p.policy(enc);
    const std::string vpath = p.value(enc);
    if (cached(ppath, cfg) && cached(vpath, cfg)) {
      log_line("train: " + enc + " checkpoints up to date");
      report[enc] = {{"cached", true}};
      continue;
    }
    Model model(*domain, model_options(cfg, enc));
    std::string csv = "epoch,split,loss,seconds\n";
    json r;
    if (cached(ppath, cfg)) {
      model.load(ppath);
      r["policy"] = {{"cached", true}};
    } else {
      TrainConfig c = tc;
      c.on_epoch = [&](const EpochLog& l) {
        append_csv(csv, l);
        log_line("policy " + enc + " epoch " + std::to_string(l.epoch) + " loss " + std::to_string(l.loss) + " (" +
                 std::to_string(static_cast<int>(l.seconds)) + "s)");
        model.save(ppath, checkpoint_extra(cfg, false, {{"epoch", l.epoch}}).dump());
      };
      log_line("policy " + enc + ": " + std::to_string(data.triplets()) + " triplets, initial loss " +
               std::to_string(uniform_policy_loss(data, domain->grammar())));
      const TrainResult res = train_policy(model, data, c);
      model.save(ppath, checkpoint_extra(cfg, true, {{"initial_loss", res.initial_loss}, {"final_loss", res.final_loss()}})
                            .dump());
      r["policy"] = {{"initial_loss", res.initial_loss}, {"final_loss", res.final_loss()},
                     {"epochs", res.epochs.size()}, {"skipped", res.skipped}};
    }

    // Value: rollouts of the trained policy on a prefix of the training tasks.
    const std::size_t nv = std::min<std::size_t>(static_cast<std::size_t>(cfg.value_tasks), train.size());
    const std::vector<TaskRecord> vtasks(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(nv));
    const auto rollouts =
        collect_rollouts(model, *domain, vtasks, cfg.rollouts_per_task, cfg.max_depth, derive_seed(cfg.seed, "rollouts"));
    const std::size_t n_hold = static_cast<std::size_t>(std::ceil(cfg.value_holdout * static_cast<double>(nv)));
    std::vector<Rollout> fit, hold;
    for (const auto& ro : rollouts) (static_cast<std::size_t>(ro.task) + n_hold >= nv ? hold : fit).push_back(ro);
    double pos = 0;
    for (const auto& ro : rollouts) pos += ro.reward;
    const double rate = rollouts.empty() ? 0.0 : pos / static_cast<double>(rollouts.size());
    if (rate == 0.0 || rate == 1.0) log_line("warning: value labels are all " + std::to_string(static_cast<int>(rate)));
    log_line("value " + enc + ": " + std::to_string(rollouts.size()) + " rollouts, success rate " + std::to_string(rate));

    Model vmodel(model);
    const double hold_before = value_loss(vmodel, vtasks, hold);
    TrainConfig vc = tc;
    vc.epochs = cfg.value_epochs;
    vc.seed = derive_seed(cfg.seed, "value");
    vc.stop_fraction = 0.0;
    vc.on_epoch = [&](const EpochLog& l) {
      append_csv(csv, l);
      log_line("value " + enc + " epoch " + std::to_string(l.epoch) + " loss " + std::to_string(l.loss));
    };
    const TrainResult vres = train_value(vmodel, vtasks, fit, vc);
    const double hold_after = value_loss(vmodel, vtasks, hold);
    append_csv(csv, EpochLog{0, "value_holdout", hold_before, 0.0});
    append_csv(csv, EpochLog{static_cast<int>(vres.epochs.size()), "value_holdout", hold_after, 0.0});
    vmodel.save(vpath, checkpoint_extra(cfg, true, {{"holdout_before", hold_before}, {"holdout_after", hold_after},
                                                    {"success_rate", rate}})
                           .dump());
    r["value"] = {{"rollouts", rollouts.size()},
                  {"success_rate", rate},
                  {"holdout_bce_before", hold_before},
                  {"holdout_bce_after", hold_after}};
    write_text(p.train_log(enc), csv);
    report[enc] = r;
  }

  if (cfg.spec_only) {
    if (cached(p.spec_only(), cfg)) {
      report["spec_only"] = {{"cached", true}};
    } else {
      SpecOnlyModel so(*domain, cfg.d, derive_seed(cfg.seed, "init"));
      std::string csv = "epoch,split,loss,seconds\n";
      TrainConfig c = tc;
      c.on_epoch = [&](const EpochLog& l) {
        append_csv(csv, l);
        log_line("spec_only epoch " + std::to_string(l.epoch) + " loss " + std::to_string(l.loss));
      };
      const TrainResult res = train_spec_only(so, data, c);
      so.save(p.spec_only(), checkpoint_extra(cfg, true).dump());
      write_text(p.train_log("spec_only"), csv);
      report["spec_only"] = {{"initial_loss", res.initial_loss}, {"final_loss", res.final_loss()}};
    }
  }
  return report;
}

ResultRecord run_search(const std::string& algorithm, const Domain& domain, const TaskRecord& task,
                        const Policy& policy, const ValueFunction* value, const SearchOptions& opts,
                        std::uint64_t seed, std::size_t index) {
  SearchResult r;
  if (algorithm == "best_first") {
    r = best_first(domain, task.spec, policy, opts);
  } else if (algorithm == "astar") {
    if (!value) throw ConfigError("astar needs a value function");
    r = astar(domain, task.spec, policy, *value, opts);
  } else if (algorithm == "sample") {
    Rng rng = make_rng(seed, "sample", index);
    r = sample_search(domain, task.spec, policy, rng, opts);
  } else {
    throw ConfigError("unknown algorithm " + algorithm);
  }
  ResultRecord rec;
  rec.task = task.id;
  rec.algorithm = algorithm;
  rec.solved = r.solved;
  rec.nodes = r.nodes;
  rec.solved_at = r.solved_at;
  rec.seconds = r.seconds;
  rec.solution = r.solved ? print_program(*r.solution) : "";
  rec.node_budget = opts.node_budget;
  return rec;
}

json cmd_synthesize(const RunConfig& cfg, const std::string& tasks_path) {
  cfg.validate();
  const auto domain = make_domain(cfg);
  const Paths p = paths_for(cfg);
  const auto tasks = read_tasks(tasks_path.empty() ? p.test : tasks_path, *domain);

  SearchOptions base;
  base.node_budget = cfg.node_budget;
  base.time_budget = cfg.time_budget;
  base.max_depth = cfg.max_depth;

  json summary = json::object();
  if (fs::exists(p.summary())) {
    summary = read_json(p.summary());
    if (summary.value("config_hash", "") != hex(cfg.model_hash())) summary = json::object();
  }
  summary["config_hash"] = hex(cfg.model_hash());
  summary["seed"] = cfg.seed;
  summary["node_budget"] = cfg.node_budget;

  std::vector<std::string> encs = cfg.encoders;
  if (cfg.spec_only) encs.push_back("spec_only");
  for (const auto& alg : cfg.algorithms) {
    for (const auto& enc : encs) {
      if (enc == "spec_only" && alg == "astar") continue;
      std::unique_ptr<Policy> policy;
      std::unique_ptr<Model> vmodel;
      std::unique_ptr<ModelValue> value;
      if (enc == "spec_only") {
        require_checkpoint(p.spec_only(), cfg);
        auto so = std::make_unique<SpecOnlyModel>(*domain, cfg.d, derive_seed(cfg.seed, "init"));
        so->load(p.spec_only());
        policy = std::move(so);
      } else {
        require_checkpoint(p.policy(enc), cfg);
        auto m = std::make_unique<Model>(*domain, model_options(cfg, enc));
        m->load(p.policy(enc));
        policy = std::move(m);
        if (alg == "astar") {
          require_checkpoint(p.value(enc), cfg);
          vmodel = std::make_unique<Model>(*domain, model_options(cfg, enc));
          vmodel->load(p.value(enc));
          value = std::make_unique<ModelValue>(*vmodel);
        }
      }
      SearchOptions opts = base;
      std::unique_ptr<towers::TowerDomain> tdom;
      std::vector<ResultRecord> records(tasks.size());
      std::atomic<int> done{0}, solved{0};
      const auto t0 = std::chrono::steady_clock::now();
      parallel_for(tasks.size(), [&](std::size_t i) {
        SearchOptions o = opts;
        if (cfg.prune) o.prune = tower_prune(static_cast<const towers::TowerDomain&>(*domain), tasks[i].spec);
        records[i] = run_search(alg, *domain, tasks[i], *policy, value.get(), o, cfg.seed, i);
        records[i].encoder = enc;
        solved += records[i].solved ? 1 : 0;
        const int k = ++done;
        if (k % 10 == 0 || k == static_cast<int>(tasks.size()))
          log_line(alg + "/" + enc + ": " + std::to_string(k) + "/" + std::to_string(tasks.size()) + " tasks, " +
                   std::to_string(solved.load()) + " solved");
      });
      std::vector<json> rows;
      int k = 0;
      for (const auto& r : records) {
        rows.push_back(result_to_json(r, cfg));
        k += r.solved ? 1 : 0;
      }
      write_jsonl(p.results(alg, enc), rows);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      summary["conditions"][alg + "/" + enc] = {
          {"solved", k},
          {"tasks", tasks.size()},
          {"fraction", tasks.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(tasks.size())},
          {"prune", cfg.prune},
          {"seconds", secs}};
    }
  }
  write_json(p.summary(), summary);
  return summary;
}

std::string cmd_curve(const std::vector<std::string>& result_files, const std::string& csv_path,
                      const std::string& svg_path, int points) {
  if (result_files.empty()) throw ConfigError("no result files");
  std::vector<Condition> conds;
  std::string data_hash;
  std::set<std::string> task_set;
  long budget = 0;
  for (const auto& f : result_files) {
    const auto rows = read_jsonl(f);
    if (rows.empty()) throw ConfigError(f + ": no records");
    Condition c;
    std::set<std::string> ids;
    for (const auto& j : rows) {
      const std::string dh = j.value("data_hash", "");
      if (data_hash.empty()) data_hash = dh;
      if (dh != data_hash) throw ConfigError(f + ": results come from a different dataset");
      c.records.push_back(result_from_json(j));
      const auto& r = c.records.back();
      if (budget == 0) budget = r.node_budget;
      if (r.node_budget != budget) throw ConfigError(f + ": node budgets differ between runs");
      ids.insert(r.task);
      const std::string name = r.algorithm + "/" + r.encoder + (j.value("prune", false) ? "+prune" : "");
      if (c.name.empty()) c.name = name;
      if (c.name != name) throw ConfigError(f + ": mixes conditions " + c.name + " and " + name);
    }
    if (task_set.empty()) task_set = ids;
    if (ids != task_set) throw ConfigError(f + ": task set differs from " + result_files.front());
    conds.push_back(std::move(c));
  }
  const auto budgets = default_budgets(budget, points);
  const std::string csv = curves_csv(conds, budgets);
  if (!csv_path.empty()) write_text(csv_path, csv);
  if (!svg_path.empty()) write_text(svg_path, curves_svg(conds, budgets));
  return csv;
}

json cmd_pr_experiment(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.domain != "towers") throw ConfigError("the precision/recall experiment uses the towers domain");
  const auto domain_ptr = make_domain(cfg);
  const auto& domain = static_cast<const towers::TowerDomain&>(*domain_ptr);
  const Paths p = paths_for(cfg);
  auto tasks = read_tasks(p.test, domain);
  if (static_cast<int>(tasks.size()) > cfg.pr_tasks) tasks.resize(static_cast<std::size_t>(cfg.pr_tasks));

  require_checkpoint(p.policy("blended"), cfg);
  Model policy(domain, model_options(cfg, "blended"));
  policy.load(p.policy("blended"));
  const auto rollouts = collect_rollouts(policy, domain, tasks, cfg.pr_k, cfg.max_depth, derive_seed(cfg.seed, "pr"));

  std::vector<int> labels;
  std::vector<std::pair<int, const Sketch*>> items;
  for (const auto& r : rollouts)
    for (const auto& s : r.sketches) {
      labels.push_back(r.reward > 0.5 ? 1 : 0);
      items.emplace_back(r.task, &s);
    }
  long pos = 0;
  for (int l : labels) pos += l;

  std::vector<double> thresholds = cfg.thresholds;
  if (thresholds.empty())
    for (int i = 0; i <= 20; ++i) thresholds.push_back(i / 20.0);

  std::vector<double> abs_scores;
  for (const auto& [ti, s] : items)
    abs_scores.push_back(prune_hook(domain, *s, tasks[static_cast<std::size_t>(ti)].spec) ? 0.0 : 1.0);
  const PRPoint abs_pt = pr_point(abs_scores, labels, 0.5);

  json out{{"tasks", tasks.size()},
           {"rollouts", rollouts.size()},
           {"sketches", labels.size()},
           {"positives", pos},
           {"degenerate", pos == 0 || pos == static_cast<long>(labels.size())},
           {"config_hash", hex(cfg.model_hash())},
           {"seed", cfg.seed}};
  auto pt_json = [](const PRPoint& q) {
    return json{{"threshold", q.threshold}, {"precision", q.precision}, {"recall", q.recall},
                {"tp", q.tp},               {"fp", q.fp},               {"fn", q.fn},
                {"tn", q.tn}};
  };
  out["abstraction"] = pt_json(abs_pt);
  if (out["degenerate"].get<bool>()) log_line("warning: rollout labels are degenerate");

  std::ostringstream csv;
  csv << "classifier,threshold,precision,recall,tp,fp,fn,tn\n";
  auto row = [&](const std::string& name, const PRPoint& q) {
    csv << name << ',' << q.threshold << ',' << q.precision << ',' << q.recall << ',' << q.tp << ',' << q.fp << ','
        << q.fn << ',' << q.tn << '\n';
  };
  row("abstraction", abs_pt);
  for (const auto& enc : cfg.encoders) {
    if (!fs::exists(p.value(enc))) continue;
    require_checkpoint(p.value(enc), cfg);
    Model vm(domain, model_options(cfg, enc));
    vm.load(p.value(enc));
    std::vector<double> scores(items.size());
    std::vector<std::unique_ptr<ValueSession>> sessions;
    for (const auto& t : tasks) sessions.push_back(vm.start_value(t.spec));
    for (std::size_t i = 0; i < items.size(); ++i) {
      try {
        scores[i] = sessions[static_cast<std::size_t>(items[i].first)]->value(*items[i].second);
      } catch (const EvalError&) {
        scores[i] = 0.0;  // concrete prefix failed: no completion works
      }
    }
    json curve = json::array();
    for (const auto& q : pr_curve(scores, labels, thresholds)) {
      curve.push_back(pt_json(q));
      row("value-" + enc, q);
    }
    json v{{"curve", curve}};
    const auto matched = best_precision_at_recall(scores, labels, abs_pt.recall - kRecallMatchTolerance);
    v["matched"] = matched ? pt_json(*matched) : json(nullptr);
    out["value"][enc] = v;
  }
  write_text(p.pr_table(), csv.str());
  write_json(p.run_dir + "/pr.json", out);
  return out;
}

json cmd_grad_check(const RunConfig& cfg, int sketches) {
  cfg.validate();
  const auto domain = make_domain(cfg);
  Model model(*domain, ModelOptions{EncoderKind::Blended, cfg.d, derive_seed(cfg.seed, "init")});
  // Zero-initialized heads would hide every gradient below them.
  Rng noise = make_rng(cfg.seed, "grad-check");
  for (int i = 0; i < model.params().size(); ++i) {
    auto& v = model.params().at(i).value;
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += 0.3 * (uniform_real(noise) - 0.5);
  }

  std::vector<TaskRecord> tasks;
  if (cfg.domain == "lists") {
    const auto set = gen_list_tasks(static_cast<const lists::ListDomain&>(*domain), sketches * 4, 0, cfg.seed);
    tasks = set.train;
  } else {
    TowerGenOptions o;
    o.motif_pool = 8;
    const auto set = gen_tower_tasks(static_cast<const towers::TowerDomain&>(*domain), sketches * 4, 0, cfg.seed, o);
    tasks = set.train;
  }
  const Grammar& g = domain->grammar();
  struct Case {
    const TaskRecord* task;
    Sketch sketch;
    int rule;
  };
  std::vector<Case> cases;
  for (const auto& t : tasks) {
    if (static_cast<int>(cases.size()) >= sketches) break;
    Sketch s = Sketch::initial(g);
    for (const auto& a : derive_actions(t.program, g)) {
      if (s.hole_count() == 2) {
        cases.push_back({&t, s, a.rule});
        break;
      }
      s = apply_action(s, a, g);
    }
  }
  if (cases.empty()) throw ConfigError("grad-check: no two-hole sketches found");

  ad::GradCheckOptions opt;
  opt.per_param = 3;
  opt.seed = cfg.seed;
  double worst = 0.0;
  json rows = json::array();
  for (const auto& c : cases) {
    auto pol = ad::grad_check(
        model.params(),
        [&](ad::Tape& t) {
          Encoder enc(model.embedders(), t);
          return t.masked_nll(model.policy_logits(t, model.rep(enc, c.sketch, c.task->spec)), legal_rules(c.sketch, g),
                              c.rule);
        },
        opt);
    auto val = ad::grad_check(
        model.params(),
        [&](ad::Tape& t) {
          Encoder enc(model.embedders(), t);
          return t.bce_logits(model.value_logit(t, model.rep(enc, c.sketch, c.task->spec)), 1.0);
        },
        opt);
    worst = std::max({worst, pol.max_rel_error, val.max_rel_error});
    rows.push_back({{"sketch", print_program(*c.sketch.root())},
                    {"policy_max_rel", pol.max_rel_error},
                    {"policy_checked", pol.checked},
                    {"value_max_rel", val.max_rel_error},
                    {"value_checked", val.checked},
                    {"worst", pol.max_rel_error >= val.max_rel_error ? pol.worst : val.worst}});
  }
  return json{{"domain", cfg.domain}, {"max_rel_error", worst}, {"cases", rows}};
}

}  // namespace blended::harness
