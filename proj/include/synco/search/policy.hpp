#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "synco/mdp/environment.hpp"
#include "synco/qfunc/features.hpp"
#include "synco/qfunc/trainer.hpp"
#include "synco/reward/oracle.hpp"
#include "synco/util/error.hpp"

namespace synco {

struct SearchConfig {
  int k = 3;   // actions kept per agent per frontier state
  int n = 10;  // predictions returned

  void validate() const {
    if (k < 1 || n < 1) throw InvalidOperation("search requires k >= 1 and N >= 1");
  }
};

struct RankedPrediction {
  ReactantPair reactants;
  double score = 0;  // joint Q of the final step
  Episode episode;
};

/// A feasible action of one agent, the synthon it produces and its Q-value
/// under the assumption that the other agent plays NOOP.
struct ScoredAction {
  Action action;
  MolPtr next;
  float q = 0;
};

namespace detail {
/// Feasible actions of `agent` with their successors, appending the
/// agent-view features of each to `xs`. Q-values are filled in later.
inline std::vector<ScoredAction> expand_agent(const Environment &env, const State &s, Agent agent,
                                              std::vector<FeatureVector> &xs) {
  std::vector<ScoredAction> out;
  const int i = index_of(agent);
  for (const Action &a : env.feasible_actions(s, agent)) {
    MolPtr next = env.successor(s.currents[i], a);
    const Mol &n1 = i == 0 ? *next : *s.currents[0];
    const Mol &n2 = i == 1 ? *next : *s.currents[1];
    xs.push_back(features_of(s, n1, n2, agent));
    out.push_back({a, std::move(next), 0.0f});
  }
  return out;
}
}  // namespace detail

/// Q-values of every feasible action of `agent`, in deterministic action
/// order. The agent scores from its own point of view.
inline std::vector<ScoredAction> score_actions(const Environment &env, const QNet &net,
                                               const State &s, Agent agent) {
  std::vector<FeatureVector> xs;
  auto out = detail::expand_agent(env, s, agent, xs);
  const auto q = net.predict(xs);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].q = q[k];
  return out;
}

/// Q of a joint action: mean of the two agents' views of the transition.
inline double joint_q(const QNet &net, const State &s, const Mol &next1, const Mol &next2) {
  const FeatureVector xs[2] = {features_of(s, next1, next2, Agent::One),
                               features_of(s, next1, next2, Agent::Two)};
  const auto q = net.predict(xs);
  return 0.5 * (static_cast<double>(q[0]) + static_cast<double>(q[1]));
}

/// Best `k` actions, highest Q first; equal Q keeps the action order.
inline std::vector<ScoredAction> top_k_actions(std::vector<ScoredAction> scored, int k) {
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredAction &a, const ScoredAction &b) { return a.q > b.q; });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);
  return scored;
}

/// Greedy action of `agent`, assuming NOOP from the other agent.
inline Action select_action(const Environment &env, const QParams &params, const State &s,
                            Agent agent) {
  if (s.terminal()) throw InvalidOperation("select_action on a terminal state");
  return top_k_actions(score_actions(env, params.network, s, agent), 1).front().action;
}

/// T synchronized greedy steps from `s0`; the oracle's reward is attached.
inline Episode greedy_rollout(const Environment &env, const QParams &params, const State &s0,
                              const RewardOracle &oracle,
                              const std::optional<ReactantPair> &truth = std::nullopt) {
  Episode ep;
  ep.states.push_back(s0);
  while (!ep.states.back().terminal()) {
    const State &s = ep.states.back();
    const Action a1 = select_action(env, params, s, Agent::One);
    const Action a2 = select_action(env, params, s, Agent::Two);
    ep.actions.push_back({a1, a2});
    ep.states.push_back(env.apply_actions(s, a1, a2));
  }
  ep.reward = oracle(ep.states.back(), truth);
  return ep;
}

/// Beam enumeration of joint action sequences. At every depth each frontier
/// state keeps the top-k actions of each agent and expands all k^2 joint
/// combinations. Terminal candidates are scored by the joint Q of their last
/// step, merged per reactant pair (max score), sorted by score descending
/// with the pair key as tie-break, and truncated to N. Episode rewards are
/// left unset.
inline std::vector<RankedPrediction> top_n_search(const Environment &env, const QParams &params,
                                                  const State &s0, const SearchConfig &cfg) {
  cfg.validate();
  const QNet &net = params.network;
  struct Node {
    State state;
    int parent;
    JointAction action;
    double q;
  };
  std::vector<std::vector<Node>> levels(1);
  levels[0].push_back({s0, -1, {}, 0.0});
  while (!levels.back().front().state.terminal()) {
    const auto &frontier = levels.back();
    // Per-agent candidates of every frontier state, scored in one batch.
    std::vector<FeatureVector> xs;
    std::vector<std::array<std::vector<ScoredAction>, 2>> cands(frontier.size());
    for (std::size_t p = 0; p < frontier.size(); ++p) {
      cands[p][0] = detail::expand_agent(env, frontier[p].state, Agent::One, xs);
      cands[p][1] = detail::expand_agent(env, frontier[p].state, Agent::Two, xs);
    }
    const auto agent_q = net.predict(xs);
    std::size_t at = 0;
    for (auto &pair : cands) {
      for (auto &list : pair) {
        for (auto &c : list) c.q = agent_q[at++];
        list = top_k_actions(std::move(list), cfg.k);
      }
    }
    xs.clear();
    std::vector<Node> next;
    for (std::size_t p = 0; p < frontier.size(); ++p) {
      const State &s = frontier[p].state;
      for (const auto &c1 : cands[p][0]) {
        for (const auto &c2 : cands[p][1]) {
          xs.push_back(features_of(s, *c1.next, *c2.next, Agent::One));
          xs.push_back(features_of(s, *c1.next, *c2.next, Agent::Two));
          next.push_back({Environment::advance(s, c1.next, c2.next), static_cast<int>(p),
                          {c1.action, c2.action}, 0.0});
        }
      }
    }
    const auto q = net.predict(xs);
    for (std::size_t c = 0; c < next.size(); ++c) {
      next[c].q = 0.5 * (static_cast<double>(q[2 * c]) + static_cast<double>(q[2 * c + 1]));
    }
    levels.push_back(std::move(next));
  }

  const auto &leaves = levels.back();
  std::map<std::string, std::size_t> best;  // pair key -> leaf index
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const std::string key = predicted_reactants(leaves[i].state).key();
    auto [it, inserted] = best.emplace(key, i);
    if (!inserted && leaves[i].q > leaves[it->second].q) it->second = i;
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(best.begin(), best.end());
  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto &a, const auto &b) {
    return leaves[a.second].q > leaves[b.second].q;
  });
  if (static_cast<int>(ranked.size()) > cfg.n) ranked.resize(cfg.n);

  std::vector<RankedPrediction> out;
  out.reserve(ranked.size());
  for (const auto &[key, leaf] : ranked) {
    RankedPrediction pred;
    pred.score = leaves[leaf].q;
    pred.reactants = predicted_reactants(leaves[leaf].state);
    Episode &ep = pred.episode;
    std::size_t depth = levels.size() - 1;
    int idx = static_cast<int>(leaf);
    ep.states.resize(levels.size());
    ep.actions.resize(levels.size() - 1);
    while (true) {
      const Node &node = levels[depth][idx];
      ep.states[depth] = node.state;
      if (depth == 0) break;
      ep.actions[depth - 1] = node.action;
      idx = node.parent;
      --depth;
    }
    out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace synco
