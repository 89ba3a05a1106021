#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "synco/mdp/completion.hpp"
#include "synco/mdp/environment.hpp"
#include "synco/metrics/metrics.hpp"
#include "synco/qfunc/trainer.hpp"
#include "synco/reward/oracle.hpp"
#include "synco/search/policy.hpp"
#include "synco/util/error.hpp"
#include "synco/util/seed.hpp"

namespace synco {

/// Episode that grows each synthon of `s0` into its ground-truth reactant
/// (agent order) one atom per step, padded with NOOPs; reward 1. Throws
/// UnrealizableReaction when either reactant needs more than the step limit
/// or is not reachable with the action vocabulary.
inline Episode derive_true_episode(const Environment &env, const State &s0,
                                   const ReactantPair &truth) {
  std::vector<Action> plans[2];
  for (int i = 0; i < 2; ++i) {
    plans[i] = plan_completion(s0.synthons[i]->graph, truth.mols[i]->graph);
    if (static_cast<int>(plans[i].size()) > s0.steps_left) {
      throw UnrealizableReaction("reactant " + std::to_string(i + 1) + " needs " +
                                 std::to_string(plans[i].size()) + " additions, more than the step limit");
    }
  }
  const std::size_t len = std::max(plans[0].size(), plans[1].size());
  std::vector<JointAction> actions;
  for (std::size_t t = 0; t < len; ++t) {
    actions.push_back({t < plans[0].size() ? plans[0][t] : Action::noop(),
                       t < plans[1].size() ? plans[1][t] : Action::noop()});
  }
  try {
    return env.replay(s0, std::move(actions), 1);
  } catch (const InvalidOperation &e) {
    throw UnrealizableReaction(std::string("true episode not admitted: ") + e.what());
  }
}

/// `count` episodes taking uniformly random feasible actions. An episode that
/// repeats `avoid_key` (usually the true episode) is redrawn a few times.
inline std::vector<Episode> gen_random_episodes(const Environment &env, const State &s0, int count,
                                                const RewardOracle &oracle,
                                                const std::optional<ReactantPair> &truth,
                                                std::uint64_t seed,
                                                const std::string &avoid_key = {}) {
  if (count < 1) throw InvalidOperation("gen_random_episodes: count must be >= 1");
  constexpr int kRedraws = 8;
  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<Action> &acts) {
    std::uniform_int_distribution<std::size_t> d(0, acts.size() - 1);
    return acts[d(rng)];
  };
  std::vector<Episode> out;
  for (int c = 0; c < count; ++c) {
    Episode ep;
    for (int attempt = 0; attempt <= kRedraws; ++attempt) {
      ep = Episode{};
      ep.states.push_back(s0);
      while (!ep.states.back().terminal()) {
        const State &s = ep.states.back();
        const Action a1 = pick(env.feasible_actions(s, Agent::One));
        const Action a2 = pick(env.feasible_actions(s, Agent::Two));
        ep.actions.push_back({a1, a2});
        ep.states.push_back(env.apply_actions(s, a1, a2));
      }
      if (avoid_key.empty() || ep.key() != avoid_key) break;
    }
    ep.reward = oracle(ep.final_state(), truth);
    out.push_back(std::move(ep));
  }
  return out;
}

/// Ranked predictions of every task scored by the oracle.
inline EvalTable evaluate_tasks(const Environment &env, const QParams &params,
                                std::span<const Task> tasks, const SearchConfig &cfg,
                                const RewardOracle &oracle) {
  EvalTable table;
  table.n_max = cfg.n;
  for (const Task &task : tasks) {
    EvalEntry entry;
    entry.id = task.id;
    entry.product = task.initial.product->canonical;
    for (const auto &pred : top_n_search(env, params, task.initial, cfg)) {
      EvalRow row;
      row.reactants = {pred.reactants.mols[0]->canonical, pred.reactants.mols[1]->canonical};
      row.score = pred.score;
      row.reward = oracle.score(pred.reactants, *task.initial.product, task.truth);
      entry.rows.push_back(std::move(row));
    }
    table.entries.push_back(std::move(entry));
  }
  return table;
}

/// Insertion-ordered episode set keyed by Episode::key().
class EpisodeSet {
 public:
  EpisodeSet() = default;
  explicit EpisodeSet(std::span<const Episode> eps) { insert(eps); }

  bool insert(Episode ep) {
    if (!keys_.insert(ep.key()).second) return false;
    episodes_.push_back(std::move(ep));
    return true;
  }
  void insert(std::span<const Episode> eps) {
    for (const auto &e : eps) insert(e);
  }
  bool contains(const Episode &ep) const { return keys_.count(ep.key()) > 0; }
  std::size_t size() const { return episodes_.size(); }
  const std::vector<Episode> &episodes() const { return episodes_; }

 private:
  std::vector<Episode> episodes_;
  std::unordered_set<std::string> keys_;
};

struct AugmentConfig {
  SearchConfig greedy{1, 1};
  SearchConfig top_n{3, 5};
  SearchConfig validation{3, 10};
  TrainConfig train;               // seed and batch size are set per iteration
  int batch_products = 10;
  int batch_products_late = 20;
  int late_batch_iteration = 5;    // first iteration trained with the late batch size
  int max_iterations = 20;         // refits after the initial fit
  std::uint64_t seed = 0;
  /// Replaces the validation MAP computation when set.
  std::function<double(const QParams &)> validation_map;
};

/// Loop state after each refit; everything needed to resume.
struct AugmentState {
  int iteration = 0;       // refits done; 0 = initial fit only
  bool top_n_phase = false;
  double map = -1;         // validation MAP of `params`
  double best_map = -1;
  QParams params;
  QParams best_params;
  EpisodeSet aug;          // set the current episodes were generated on top of
  EpisodeSet aug_star;     // set `params` was fitted on
  std::vector<double> map_history;  // validation MAP after each fit
  bool done = false;
};

namespace detail {
inline double validation_map(const Environment &env, const QParams &params, std::span<const Task> val,
                             const RewardOracle &oracle, const AugmentConfig &cfg) {
  if (cfg.validation_map) return cfg.validation_map(params);
  return map_at_n(evaluate_tasks(env, params, val, cfg.validation, oracle), cfg.validation.n);
}

inline QParams fit(std::span<const Episode> eps, QParams init, const AugmentConfig &cfg,
                   int iteration) {
  TrainConfig tc = cfg.train;
  tc.batch_products = iteration >= cfg.late_batch_iteration ? cfg.batch_products_late
                                                            : cfg.batch_products;
  tc.seed = derive_seed(cfg.seed, "augment-fit", static_cast<std::uint64_t>(iteration));
  return train(eps, tc, std::move(init)).params;
}
}  // namespace detail

/// Initial fit on train ∪ random and its validation MAP.
inline AugmentState augment_begin(const Environment &env, std::span<const Episode> train_eps,
                                  std::span<const Episode> random_eps, std::span<const Task> val,
                                  const RewardOracle &oracle, const AugmentConfig &cfg,
                                  QParams init) {
  if (val.empty()) throw InvalidOperation("augment_data: empty validation set");
  AugmentState st;
  st.aug.insert(train_eps);
  st.aug.insert(random_eps);
  st.aug_star = st.aug;
  st.params = detail::fit(st.aug_star.episodes(), std::move(init), cfg, 0);
  st.best_params = st.params;
  st.map = detail::validation_map(env, st.params, val, oracle, cfg);
  st.map_history.push_back(st.map);
  return st;
}

/// One pass of the augmentation loop body: accept the current fit as the
/// best, grow the episode set from the training products, refit and
/// re-validate. A non-improving greedy phase switches to the top-N phase
/// from the best parameters. Returns false once the loop has ended.
inline bool augment_step(AugmentState &st, const Environment &env, std::span<const Task> train_tasks,
                         std::span<const Task> val, const RewardOracle &oracle,
                         const AugmentConfig &cfg) {
  if (st.done) return false;
  if (!(st.map > st.best_map)) {
    st.done = true;
    return false;
  }
  if (st.iteration >= cfg.max_iterations) {
    st.best_map = st.map;
    st.best_params = st.params;
    st.done = true;
    return false;
  }
  st.best_map = st.map;
  st.best_params = st.params;
  st.aug = st.aug_star;

  const SearchConfig &search = st.top_n_phase ? cfg.top_n : cfg.greedy;
  for (const Task &task : train_tasks) {
    for (auto &pred : top_n_search(env, st.params, task.initial, search)) {
      pred.episode.reward = oracle.score(pred.reactants, *task.initial.product, task.truth);
      st.aug_star.insert(std::move(pred.episode));
    }
  }
  ++st.iteration;
  st.params = detail::fit(st.aug_star.episodes(), std::move(st.params), cfg, st.iteration);
  st.map = detail::validation_map(env, st.params, val, oracle, cfg);
  st.map_history.push_back(st.map);

  if (st.map <= st.best_map && !st.top_n_phase) {
    st.top_n_phase = true;
    st.map = st.best_map;  // Θ is restored to Θ*, so its MAP comes with it
    st.best_map = -1;
    st.params = st.best_params;
    st.aug_star = st.aug;
  }
  if (!(st.map > st.best_map)) {
    st.done = true;
  } else if (st.iteration >= cfg.max_iterations) {
    st.best_map = st.map;
    st.best_params = st.params;
    st.done = true;
  }
  return !st.done;
}

/// Full augmentation loop; returns the best-validation parameters.
/// `on_state` observes the state after the initial fit and after every refit.
inline QParams augment_data(const Environment &env, std::span<const Task> train_tasks,
                            std::span<const Episode> train_eps, std::span<const Episode> random_eps,
                            std::span<const Task> val, const RewardOracle &oracle,
                            const AugmentConfig &cfg, QParams init,
                            const std::function<void(const AugmentState &)> &on_state = {},
                            AugmentState *final_state = nullptr) {
  AugmentState st = augment_begin(env, train_eps, random_eps, val, oracle, cfg, std::move(init));
  if (on_state) on_state(st);
  while (augment_step(st, env, train_tasks, val, oracle, cfg)) {
    if (on_state) on_state(st);
  }
  if (on_state) on_state(st);
  QParams best = st.best_params;
  if (final_state) *final_state = std::move(st);
  return best;
}

}  // namespace synco
