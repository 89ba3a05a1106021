#include <gtest/gtest.h>

#include <set>

#include "synco/chem.hpp"
#include "synco/search/policy.hpp"
#include "../support/brute_force.hpp"

using namespace synco;

namespace {

MolGraph marked(const std::string &smi, int m = 0) {
  MolGraph g = parse_smiles(smi);
  g.mark(m);
  return g;
}

BondTypeTable tight_table() {
  BondTypeTable t;
  t.insert(Element::C, Element::O, BondOrder::Single);
  t.insert(Element::O, Element::Cl, BondOrder::Single);
  return t;
}

State state_of(const Environment &env, const std::string &a, const std::string &b) {
  return env.init_state(marked(a), marked(b), parse_smiles(a + "." + b));
}

QParams small_params(std::uint64_t seed) { return QParams::create(seed, {16, 8, 4}); }

}  // namespace

TEST(SelectAction, OnlyNoopWhenSaturated) {
  Environment env;
  const State s = env.init_state(marked("FC(F)(F)F", 1), marked("C"), parse_smiles("C"));
  EXPECT_TRUE(select_action(env, small_params(1), s, Agent::One).is_noop());
}

TEST(SelectAction, ZeroParamsPickFirstInOrder) {
  Environment env;
  const State s = state_of(env, "CC", "O");
  QParams p;
  p.network = QNet::zeros({kFeatureDim, 4, 1});
  EXPECT_EQ(select_action(env, p, s, Agent::One), env.feasible_actions(s, Agent::One).front());
  EXPECT_EQ(select_action(env, p, s, Agent::Two), env.feasible_actions(s, Agent::Two).front());
}

TEST(SelectAction, PicksTheStrictlyBestAction) {
  Environment env(tight_table());
  const State s = state_of(env, "CC", "O");
  const auto acts = env.feasible_actions(s, Agent::One);
  ASSERT_EQ(acts.size(), 2u);  // O@0, NOOP
  // Reward a fingerprint bit present only in the successor of the ADD.
  const auto grown = env.successor(s.currents[0], acts[0]);
  int bit = -1;
  for (int b : grown->fingerprint.on_bits()) {
    if (!s.currents[0]->fingerprint.test(b)) bit = b;
  }
  ASSERT_GE(bit, 0);
  for (int target : {0, 1}) {
    QParams p;
    p.network = QNet::zeros({kFeatureDim, 1, 1});
    p.network.layers()[1].weight(0, 0) = 1.0f;
    if (target == 0) {
      p.network.layers()[0].weight(2 * kFingerprintBits + bit, 0) = 1.0f;
    } else {
      p.network.layers()[0].bias(0) = 1.0f;
      p.network.layers()[0].weight(2 * kFingerprintBits + bit, 0) = -1.0f;
    }
    EXPECT_EQ(select_action(env, p, s, Agent::One), acts[target]);
  }
}

TEST(SelectAction, TerminalStateThrows) {
  Environment env(std::nullopt, 1);
  State s = state_of(env, "CC", "O");
  s = env.apply_actions(s, Action::noop(), Action::noop());
  EXPECT_THROW(select_action(env, small_params(1), s, Agent::One), InvalidOperation);
}

TEST(Greedy, EqualsBeamOfWidthOne) {
  Environment env;
  const RewardOracle oracle;
  for (std::uint64_t seed : {1, 2, 3}) {
    const QParams p = small_params(seed);
    for (const auto &[a, b] : std::vector<std::pair<std::string, std::string>>{{"CC", "O"}, {"c1ccccc1", "NC"}}) {
      const State s = state_of(env, a, b);
      const Episode g = greedy_rollout(env, p, s, oracle);
      const auto beam = top_n_search(env, p, s, {1, 1});
      ASSERT_EQ(beam.size(), 1u);
      EXPECT_EQ(beam[0].episode.actions, g.actions);
      EXPECT_EQ(beam[0].reactants.key(), predicted_reactants(g.final_state()).key());
      EXPECT_EQ(g.length(), env.step_limit());
      EXPECT_EQ(g.reward, 0);
    }
  }
}

TEST(Greedy, SaturatedSynthonsStayPut) {
  Environment env;
  const State s = env.init_state(marked("FC(F)(F)F", 1), marked("FC(F)(F)F", 1), parse_smiles("C"));
  const Episode g = greedy_rollout(env, small_params(4), s, RewardOracle{});
  for (const auto &ja : g.actions) EXPECT_TRUE(ja.first.is_noop() && ja.second.is_noop());
  EXPECT_EQ(g.final_state().currents, s.currents);
}

TEST(TopN, MatchesBruteForceOnSmallInstances) {
  Environment env(synco::testing::halogen_table());
  int checked = 0;
  for (const auto &[a, b] : synco::testing::small_search_instances()) {
    const State s = state_of(env, a, b);
    const QParams p = small_params(static_cast<std::uint64_t>(checked) + 10);
    int widest = 0;
    const auto want = synco::testing::brute_force_ranking(env, p.network, s, &widest);
    ASSERT_LE(widest, 4) << a << " " << b;
    const auto got = top_n_search(env, p, s, {4, 1000});
    ASSERT_EQ(got.size(), want.size()) << a << " " << b;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].reactants.key(), want[i].key);
      EXPECT_EQ(got[i].score, want[i].score);
    }
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(TopN, ResultsAreUniqueSortedAndReplayable) {
  Environment env;
  const QParams p = small_params(8);
  const State s = state_of(env, "CC(=O)", "NC");
  const auto preds = top_n_search(env, p, s, {3, 10});
  ASSERT_EQ(preds.size(), 10u);
  std::set<std::string> keys;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_TRUE(keys.insert(preds[i].reactants.key()).second);
    if (i > 0) {
      EXPECT_GE(preds[i - 1].score, preds[i].score);
    }
    const Episode replayed = env.replay(s, preds[i].episode.actions);
    EXPECT_EQ(predicted_reactants(replayed.final_state()).key(), preds[i].reactants.key());
    EXPECT_EQ(preds[i].episode.states.size(), 4u);
    EXPECT_EQ(preds[i].episode.reward, -1);
  }
  EXPECT_LE(top_n_search(env, p, s, {1, 10}).size(), 1u);
  EXPECT_THROW(top_n_search(env, p, s, {0, 10}), InvalidOperation);
}

TEST(TopN, ScoreIsJointQOfLastStep) {
  Environment env;
  const QParams p = small_params(9);
  const State s = state_of(env, "CC", "O");
  for (const auto &pred : top_n_search(env, p, s, {2, 5})) {
    const State &last = pred.episode.states[2];
    const State &fin = pred.episode.states[3];
    EXPECT_DOUBLE_EQ(pred.score, joint_q(p.network, last, *fin.currents[0], *fin.currents[1]));
  }
}
