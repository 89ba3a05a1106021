// synco command-line driver: ingest, train, augment, predict, evaluate,
// serve-check. Every command logs its effective configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "synco/augment/augment.hpp"
#include "synco/io/reactions.hpp"
#include "synco/io/serialization.hpp"
#include "synco/metrics/metrics.hpp"
#include "synco/reward/http_client.hpp"
#include "synco/search/policy.hpp"
#include "synco/util/seed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace synco;

namespace {

struct Config {
  std::string train_file, val_file, test_file;
  std::string out_dir = "synco-run";
  std::uint64_t seed = 0;
  int workers = 0;
  int step_limit = kDefaultStepLimit;
  std::vector<int> hidden = kDefaultHiddenSizes;
  int epochs = 10;
  int batch_products = 10;
  double gamma = 0.95, alpha = 1e-5, learning_rate = 1e-4, dropout = 0.7;
  int random_episodes = 4;
  int augment_k = 3, augment_n = 5, max_iterations = 20;
  int batch_products_late = 20, late_batch_iteration = 5;
  int beam_k = 3, top_n = 10;
  std::string oracle = "exact";
  std::string forward_url;
  int forward_top_k = 5;
  int timeout_ms = 30000;

  json to_json() const {
    return {{"data", {{"train", train_file}, {"val", val_file}, {"test", test_file}}},
            {"out_dir", out_dir},
            {"seed", seed},
            {"workers", workers},
            {"step_limit", step_limit},
            {"hidden_sizes", hidden},
            {"train", {{"epochs", epochs}, {"batch_products", batch_products}, {"gamma", gamma},
                       {"alpha", alpha}, {"learning_rate", learning_rate}, {"dropout", dropout}}},
            {"random_episodes", random_episodes},
            {"augment", {{"top_k", augment_k}, {"top_n", augment_n}, {"max_iterations", max_iterations},
                         {"batch_products_late", batch_products_late},
                         {"late_batch_iteration", late_batch_iteration}}},
            {"predict", {{"beam_k", beam_k}, {"top_n", top_n}}},
            {"oracle", {{"mode", oracle}, {"forward_url", forward_url}, {"top_k", forward_top_k},
                        {"timeout_ms", timeout_ms}}}};
  }
};

template <typename T>
void take(const json &j, const char *key, T &dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
  for (const auto &[k, v] : j.items()) {
    bool ok = false;
    for (const char *a : allowed) ok = ok || k == a;
    if (!ok) throw FormatError("unknown config key '" + where + k + "'");
  }
}

Config load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw FormatError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  Config c;
  try {
    check_keys(j, {"data", "out_dir", "seed", "workers", "step_limit", "hidden_sizes", "train",
                   "random_episodes", "augment", "predict", "oracle"}, "");
    if (j.contains("data")) {
      const json &d = j["data"];
      check_keys(d, {"train", "val", "test"}, "data.");
      take(d, "train", c.train_file);
      take(d, "val", c.val_file);
      take(d, "test", c.test_file);
    }
    take(j, "out_dir", c.out_dir);
    take(j, "seed", c.seed);
    take(j, "workers", c.workers);
    take(j, "step_limit", c.step_limit);
    take(j, "hidden_sizes", c.hidden);
    take(j, "random_episodes", c.random_episodes);
    if (j.contains("train")) {
      const json &t = j["train"];
      check_keys(t, {"epochs", "batch_products", "gamma", "alpha", "learning_rate", "dropout"}, "train.");
      take(t, "epochs", c.epochs);
      take(t, "batch_products", c.batch_products);
      take(t, "gamma", c.gamma);
      take(t, "alpha", c.alpha);
      take(t, "learning_rate", c.learning_rate);
      take(t, "dropout", c.dropout);
    }
    if (j.contains("augment")) {
      const json &a = j["augment"];
      check_keys(a, {"top_k", "top_n", "max_iterations", "batch_products_late", "late_batch_iteration"},
                 "augment.");
      take(a, "top_k", c.augment_k);
      take(a, "top_n", c.augment_n);
      take(a, "max_iterations", c.max_iterations);
      take(a, "batch_products_late", c.batch_products_late);
      take(a, "late_batch_iteration", c.late_batch_iteration);
    }
    if (j.contains("predict")) {
      const json &p = j["predict"];
      check_keys(p, {"beam_k", "top_n"}, "predict.");
      take(p, "beam_k", c.beam_k);
      take(p, "top_n", c.top_n);
    }
    if (j.contains("oracle")) {
      const json &o = j["oracle"];
      check_keys(o, {"mode", "forward_url", "top_k", "timeout_ms"}, "oracle.");
      take(o, "mode", c.oracle);
      take(o, "forward_url", c.forward_url);
      take(o, "top_k", c.forward_top_k);
      take(o, "timeout_ms", c.timeout_ms);
    }
  } catch (const json::exception &e) {
    throw FormatError("config file '" + path + "': " + e.what());
  }
  return c;
}

void log(const std::string &msg) { std::cerr << "[synco] " << msg << std::endl; }

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers, top_k, beam_k, top_n, step_limit;
  std::optional<std::string> oracle, forward_url, out_dir;
  std::string checkpoint, input, predictions;
  bool fresh = false;
};

Config effective_config(const Options &o) {
  Config c = o.config_path.empty() ? Config{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.top_k) c.forward_top_k = *o.top_k;
  if (o.beam_k) c.beam_k = *o.beam_k;
  if (o.top_n) c.top_n = *o.top_n;
  if (o.step_limit) c.step_limit = *o.step_limit;
  if (o.oracle) c.oracle = *o.oracle;
  if (o.forward_url) c.forward_url = *o.forward_url;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (c.workers <= 0) c.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (c.oracle != "exact" && c.oracle != "forward") throw InvalidOperation("--oracle must be exact or forward");
  if (c.oracle == "forward" && c.forward_url.empty()) throw InvalidOperation("forward oracle needs --forward-url");
  if (c.step_limit < 1) throw InvalidOperation("step limit must be >= 1");
  return c;
}

void announce(const std::string &cmd, const Config &c) {
  Eigen::setNbThreads(c.workers);
  fs::create_directories(c.out_dir);
  json j = c.to_json();
  j["command"] = cmd;
  log("effective config: " + j.dump());
  std::ofstream(fs::path(c.out_dir) / (cmd + ".config.json")) << j.dump(2) << '\n';
}

std::string in_out(const Config &c, const std::string &name) { return (fs::path(c.out_dir) / name).string(); }

RewardOracle make_oracle(const Config &c) {
  if (c.oracle == "exact") return RewardOracle::exact_only();
  return RewardOracle(std::make_shared<HttpForwardClient>(c.forward_url, c.timeout_ms), c.forward_top_k);
}

QParams fresh_params(const Config &c) {
  QParams p = QParams::create(derive_seed(c.seed, "qnet"), c.hidden);
  p.gamma = c.gamma;
  p.alpha = c.alpha;
  p.learning_rate = c.learning_rate;
  p.dropout = c.dropout;
  p.validate();
  return p;
}

std::vector<Reaction> load_filtered(const std::string &path) {
  auto res = load_reactions(path, true);
  return res.reactions;
}

std::vector<Task> make_tasks(const Environment &env, const std::vector<Reaction> &rs) {
  std::vector<Task> out;
  for (const auto &r : rs) out.push_back(make_task(env, r));
  return out;
}

Environment load_env(const Config &c) {
  return Environment(load_bond_table(in_out(c, "bond_table.json")), c.step_limit);
}

int cmd_ingest(const Config &c) {
  if (c.train_file.empty()) throw InvalidOperation("ingest needs data.train in the config");
  json report;
  std::vector<Reaction> train;
  const std::pair<std::string, std::string> splits[] = {
      {"train", c.train_file}, {"val", c.val_file}, {"test", c.test_file}};
  for (const auto &[name, path] : splits) {
    if (path.empty()) continue;
    auto loaded = load_reactions(path);
    for (const auto &e : loaded.errors) log(path + ":" + std::to_string(e.line) + ": " + e.message);
    auto filtered = filter_reactions_report(loaded.reactions, c.step_limit);
    for (const auto &[id, why] : filtered.dropped) log(name + " drops " + id + ": " + why);
    save_reactions(in_out(c, name + ".tsv"), filtered.kept);
    report[name] = {{"read", loaded.reactions.size()},
                    {"malformed", loaded.errors.size()},
                    {"kept", filtered.kept.size()}};
    log(name + ": " + std::to_string(loaded.reactions.size()) + " read, " +
        std::to_string(filtered.kept.size()) + " kept");
    if (name == "train") train = std::move(filtered.kept);
  }
  if (train.empty()) throw InvalidOperation("no training reactions survive filtering");
  const BondTypeTable table = bond_type_table(train);
  save_bond_table(in_out(c, "bond_table.json"), table);
  const Environment env(table, c.step_limit);
  const RewardOracle oracle = RewardOracle::exact_only();
  std::vector<Episode> truth, random;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Task task = make_task(env, train[i]);
    Episode ep;
    try {
      ep = derive_true_episode(env, task.initial, *task.truth);
    } catch (const UnrealizableReaction &e) {
      log("skipping " + task.id + ": " + e.what());
      continue;
    }
    auto r = gen_random_episodes(env, task.initial, c.random_episodes, oracle, task.truth,
                                 derive_seed(c.seed, "random-episodes", i), ep.key());
    truth.push_back(std::move(ep));
    random.insert(random.end(), r.begin(), r.end());
  }
  save_episodes(in_out(c, "episodes_true.jsonl"), truth);
  save_episodes(in_out(c, "episodes_random.jsonl"), random);
  report["episodes"] = {{"true", truth.size()}, {"random", random.size()}, {"bond_types", table.size()}};
  std::ofstream(in_out(c, "ingest_report.json")) << report.dump(2) << '\n';
  log("ingest done: " + report["episodes"].dump());
  return 0;
}

int cmd_train(const Config &c, const Options &o) {
  auto eps = load_episodes(in_out(c, "episodes_true.jsonl"));
  const auto random = load_episodes(in_out(c, "episodes_random.jsonl"));
  eps.insert(eps.end(), random.begin(), random.end());
  TrainConfig tc;
  tc.epochs = c.epochs;
  tc.batch_products = c.batch_products;
  tc.seed = derive_seed(c.seed, "train");
  tc.on_epoch = [](int epoch, double loss) {
    log("epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
  };
  const auto result = train(eps, tc, fresh_params(c));
  const std::string out = o.checkpoint.empty() ? in_out(c, "model.bin") : o.checkpoint;
  save_checkpoint(out, result.params);
  log("checkpoint written to " + out);
  return 0;
}

int cmd_augment(const Config &c, const Options &o) {
  const Environment env = load_env(c);
  const RewardOracle oracle = make_oracle(c);
  const auto train_tasks = make_tasks(env, load_filtered(in_out(c, "train.tsv")));
  const auto val_tasks = make_tasks(env, load_filtered(in_out(c, "val.tsv")));
  const auto truth = load_episodes(in_out(c, "episodes_true.jsonl"));
  const auto random = load_episodes(in_out(c, "episodes_random.jsonl"));

  AugmentConfig ac;
  ac.top_n = {c.augment_k, c.augment_n};
  ac.validation = {3, 10};
  ac.train.epochs = c.epochs;
  ac.batch_products = c.batch_products;
  ac.batch_products_late = c.batch_products_late;
  ac.late_batch_iteration = c.late_batch_iteration;
  ac.max_iterations = c.max_iterations;
  ac.seed = derive_seed(c.seed, "augment");

  const std::string dir = in_out(c, "augment");
  const bool resumable = !o.fresh && fs::exists(fs::path(dir) / "manifest.json");
  AugmentState st;
  if (resumable) {
    st = load_augment_state(dir);
    log("resuming augmentation at iteration " + std::to_string(st.iteration));
  } else {
    QParams init = o.checkpoint.empty() ? fresh_params(c) : load_checkpoint(o.checkpoint);
    st = augment_begin(env, truth, random, val_tasks, oracle, ac, std::move(init));
    save_augment_state(dir, st);
  }
  auto report = [&] {
    log("iteration " + std::to_string(st.iteration) + (st.top_n_phase ? " top-N" : " greedy") +
        " phase, validation MAP " + std::to_string(st.map) + ", best " + std::to_string(st.best_map) +
        ", episodes " + std::to_string(st.aug_star.size()));
  };
  report();
  while (augment_step(st, env, train_tasks, val_tasks, oracle, ac)) {
    save_augment_state(dir, st);
    report();
  }
  save_augment_state(dir, st);
  report();
  const std::string out = in_out(c, "model.bin");
  save_checkpoint(out, st.best_params);
  log("best checkpoint (validation MAP " + std::to_string(st.best_map) + ") written to " + out);
  return 0;
}

int cmd_predict(const Config &c, const Options &o) {
  const Environment env = load_env(c);
  const QParams params = load_checkpoint(o.checkpoint.empty() ? in_out(c, "model.bin") : o.checkpoint);
  const std::string input = o.input.empty() ? in_out(c, "test.tsv") : o.input;
  const auto tasks = make_tasks(env, load_filtered(input));
  const SearchConfig sc{c.beam_k, c.top_n};
  std::vector<PredictionRecord> recs;
  for (const auto &t : tasks) recs.push_back(to_record(t.id, *t.initial.product, top_n_search(env, params, t.initial, sc)));
  const std::string out = o.predictions.empty() ? in_out(c, "predictions.jsonl") : o.predictions;
  save_predictions(out, recs, sc.n);
  log("wrote " + std::to_string(recs.size()) + " prediction lists to " + out);
  return 0;
}

std::optional<ReactantPair> pair_from_smiles(const std::vector<std::string> &smiles) {
  if (smiles.size() != 2) return std::nullopt;
  try {
    return ReactantPair{{make_mol(parse_smiles(smiles[0])), make_mol(parse_smiles(smiles[1]))}};
  } catch (const ParseError &) {
    return std::nullopt;
  }
}

int cmd_evaluate(const Config &c, const Options &o) {
  const std::string path = o.predictions.empty() ? in_out(c, "predictions.jsonl") : o.predictions;
  int n_max = 0;
  const auto recs = load_predictions(path, &n_max);
  const Environment env(std::nullopt, c.step_limit);
  const std::string truth_path = o.input.empty() ? in_out(c, "test.tsv") : o.input;
  std::map<std::string, Task> truth;
  for (auto &t : make_tasks(env, load_filtered(truth_path))) truth.emplace(t.id, std::move(t));
  const RewardOracle oracle = make_oracle(c);

  EvalTable table;
  table.n_max = n_max;
  for (const auto &rec : recs) {
    auto it = truth.find(rec.id);
    if (it == truth.end()) throw FormatError("prediction id '" + rec.id + "' not in " + truth_path);
    EvalEntry e{rec.id, rec.product, rec.rows};
    for (auto &row : e.rows) {
      const auto pair = pair_from_smiles(row.reactants);
      row.reward = pair ? oracle.score(*pair, *it->second.initial.product, it->second.truth) : 0;
    }
    table.entries.push_back(std::move(e));
  }
  const MetricReport r = evaluate_table(table);
  json out{{"products", table.entries.size()}, {"N", r.cutoffs}, {"map", r.map},
           {"ndcg", r.ndcg}, {"diversity", r.diversity}, {"validity", r.validity}};
  std::ofstream(in_out(c, "report.json")) << out.dump(2) << '\n';
  std::ostringstream text;
  text << std::left << std::setw(4) << "N" << std::right << std::setw(10) << "MAP" << std::setw(10)
       << "NDCG" << std::setw(11) << "Diversity" << std::setw(10) << "Validity" << '\n';
  text << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < r.cutoffs.size(); ++i) {
    text << std::left << std::setw(4) << r.cutoffs[i] << std::right << std::setw(10) << r.map[i]
         << std::setw(10) << r.ndcg[i] << std::setw(11) << r.diversity[i] << std::setw(10)
         << r.validity[i] << '\n';
  }
  std::ofstream(in_out(c, "report.txt")) << text.str();
  std::cout << text.str();
  return 0;
}

int cmd_serve_check(const Config &c) {
  if (c.forward_url.empty()) throw InvalidOperation("serve-check needs --forward-url");
  HttpForwardClient client(c.forward_url, c.timeout_ms);
  if (!client.healthy()) {
    log("forward model at " + c.forward_url + " is not healthy");
    return 1;
  }
  log("forward model at " + c.forward_url + " is healthy");
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"synco: synthon completion with two cooperating Q-learning agents"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  int workers = 0, top_k = 0, beam_k = 0, top_n = 0, step_limit = 0;
  std::string oracle, forward_url, out_dir;
  app.add_option("--config", o.config_path, "JSON configuration file");
  auto *seed_opt = app.add_option("--seed", seed, "run seed; every random stream derives from it");
  auto *workers_opt = app.add_option("--workers", workers, "worker threads (default: all cores)");
  auto *oracle_opt = app.add_option("--oracle", oracle, "reward oracle")->check(CLI::IsMember({"exact", "forward"}));
  auto *url_opt = app.add_option("--forward-url", forward_url, "forward-model service base URL");
  auto *topk_opt = app.add_option("--top-k", top_k, "forward-model containment depth");
  auto *beamk_opt = app.add_option("--beam-k", beam_k, "actions kept per agent during search");
  auto *topn_opt = app.add_option("--top-n", top_n, "predictions per product");
  auto *step_opt = app.add_option("--step-limit", step_limit, "steps per episode");
  app.add_option("--checkpoint", o.checkpoint, "model checkpoint path");
  auto *out_opt = app.add_option("--out-dir", out_dir, "artifact directory");

  auto *ingest = app.add_subcommand("ingest", "filter corpora, build the bond table and offline episodes");
  auto *train_cmd = app.add_subcommand("train", "fit the initial Q-function on true and random episodes");
  auto *augment = app.add_subcommand("augment", "run the augmentation loop (resumes from --out-dir)");
  augment->add_flag("--fresh", o.fresh, "ignore saved augmentation state");
  auto *predict = app.add_subcommand("predict", "ranked reactant pairs for every reaction of a file");
  predict->add_option("--input", o.input, "reaction TSV (default: <out-dir>/test.tsv)");
  predict->add_option("--predictions", o.predictions, "output file");
  auto *evaluate = app.add_subcommand("evaluate", "score a prediction file and print the metric table");
  evaluate->add_option("--predictions", o.predictions, "prediction file");
  evaluate->add_option("--input", o.input, "ground-truth reaction TSV");
  auto *serve_check = app.add_subcommand("serve-check", "probe the forward-model service");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) o.seed = seed;
  if (*workers_opt) o.workers = workers;
  if (*oracle_opt) o.oracle = oracle;
  if (*url_opt) o.forward_url = forward_url;
  if (*topk_opt) o.top_k = top_k;
  if (*beamk_opt) o.beam_k = beam_k;
  if (*topn_opt) o.top_n = top_n;
  if (*step_opt) o.step_limit = step_limit;
  if (*out_opt) o.out_dir = out_dir;

  try {
    const Config c = effective_config(o);
    std::string name = app.get_subcommands().front()->get_name();
    announce(name, c);
    if (*ingest) return cmd_ingest(c);
    if (*train_cmd) return cmd_train(c, o);
    if (*augment) return cmd_augment(c, o);
    if (*predict) return cmd_predict(c, o);
    if (*evaluate) return cmd_evaluate(c, o);
    if (*serve_check) return cmd_serve_check(c);
  } catch (const std::exception &e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
  return 1;
}
