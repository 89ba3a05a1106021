#include <gtest/gtest.h>

#include <set>

#include "synco/mdp/completion.hpp"
#include "synco/mdp/environment.hpp"
#include "synco/chem.hpp"

using namespace synco;

namespace {

MolGraph marked(const std::string &smi, std::initializer_list<int> marks) {
  MolGraph g = parse_smiles(smi);
  for (int m : marks) g.mark(m);
  return g;
}

State simple_state(const Environment &env, const std::string &a = "CC", const std::string &b = "C") {
  return env.init_state(marked(a, {0}), marked(b, {0}), parse_smiles(a + b));
}

}  // namespace

TEST(Action, VocabularyHas37DistinctEntries) {
  std::set<int> ids;
  for (Element e : kActionElements) {
    for (BondOrder o : kActionBondOrders) ids.insert(Action::add(e, o, 0).vocabulary_id());
  }
  ids.insert(Action::noop().vocabulary_id());
  EXPECT_EQ(ids.size(), 37u);
  EXPECT_EQ(kVocabularySize, 37);
  EXPECT_EQ(*ids.rbegin(), kNoopId);
}

TEST(Action, OrderAndEquality) {
  const Action a = Action::add(Element::C, BondOrder::Single, 0);
  const Action b = Action::add(Element::C, BondOrder::Double, 0);
  const Action c = Action::add(Element::B, BondOrder::Triple, 1);
  EXPECT_TRUE(action_before(a, b));
  EXPECT_TRUE(action_before(b, c));
  EXPECT_TRUE(action_before(c, Action::noop()));
  EXPECT_FALSE(action_before(Action::noop(), a));
  EXPECT_EQ(Action::noop(), Action::noop());
  EXPECT_NE(a, b);
  EXPECT_EQ(a.to_string(), "ADD(-C@0)");
  EXPECT_EQ(Action::noop().to_string(), "NOOP");
}

TEST(Environment, FeasibleActionsWithoutTable) {
  Environment env;
  const State s = simple_state(env);
  const auto acts = env.feasible_actions(s, Agent::Two);
  // Methane carbon has 4 free valences: all 12 elements single, those with
  // valence >= 2 double, >= 3 triple.
  int singles = 0, doubles = 0, triples = 0;
  for (const auto &a : acts) {
    if (a.is_noop()) continue;
    singles += a.order == BondOrder::Single;
    doubles += a.order == BondOrder::Double;
    triples += a.order == BondOrder::Triple;
  }
  EXPECT_EQ(singles, 12);
  EXPECT_EQ(doubles, 8);   // B C N O Si P S Se
  EXPECT_EQ(triples, 6);   // B C N Si P S
  EXPECT_TRUE(acts.back().is_noop());
  EXPECT_TRUE(std::is_sorted(acts.begin(), acts.end(), [](const Action &x, const Action &y) {
    return action_before(x, y);
  }));
}

TEST(Environment, SaturatedSynthonOnlyNoop) {
  Environment env;
  const State s = env.init_state(marked("FC(F)(F)F", {1}), marked("C", {0}), parse_smiles("C"));
  const auto acts = env.feasible_actions(s, Agent::One);
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_TRUE(acts[0].is_noop());
}

TEST(Environment, BondTableRestrictsActions) {
  BondTypeTable t;
  t.insert(Element::C, Element::Cl, BondOrder::Single);
  t.insert(Element::O, Element::C, BondOrder::Double);
  Environment env(t);
  const State s = simple_state(env);
  const auto acts = env.feasible_actions(s, Agent::One);
  ASSERT_EQ(acts.size(), 3u);
  EXPECT_EQ(acts[0], Action::add(Element::O, BondOrder::Double, 0));
  EXPECT_EQ(acts[1], Action::add(Element::Cl, BondOrder::Single, 0));
  EXPECT_TRUE(acts[2].is_noop());
  EXPECT_TRUE(t.contains(Element::Cl, Element::C, BondOrder::Single));
  EXPECT_FALSE(t.contains(Element::C, Element::Cl, BondOrder::Double));
}

TEST(Environment, ApplyAddsMarkedAtom) {
  Environment env;
  const State s = simple_state(env);
  const State n = env.apply_actions(s, Action::add(Element::O, BondOrder::Double, 0), Action::noop());
  EXPECT_EQ(n.steps_left, 2);
  EXPECT_EQ(n.step(), 1);
  EXPECT_EQ(n.current(Agent::One).canonical, write_canonical_smiles(parse_smiles("CC=O")));
  EXPECT_EQ(n.currents[1], s.currents[1]);
  EXPECT_TRUE(n.current(Agent::One).graph.is_marked(2));
  EXPECT_EQ(n.synthons[0], s.synthons[0]);
}

TEST(Environment, ApplyRejectsInvalidActions) {
  Environment env;
  const State s = simple_state(env);
  EXPECT_THROW(env.apply_actions(s, Action::add(Element::C, BondOrder::Single, 1), Action::noop()),
               InvalidOperation);  // unmarked atom
  EXPECT_THROW(env.apply_actions(s, Action::add(Element::C, BondOrder::Single, 9), Action::noop()),
               InvalidOperation);
  EXPECT_THROW(env.apply_actions(s, Action::noop(), Action::add(Element::F, BondOrder::Double, 0)),
               InvalidOperation);  // F cannot take a double bond
  State t = s;
  for (int k = 0; k < 3; ++k) t = env.apply_actions(t, Action::noop(), Action::noop());
  EXPECT_TRUE(t.terminal());
  EXPECT_THROW(env.apply_actions(t, Action::noop(), Action::noop()), InvalidOperation);
  EXPECT_THROW(env.feasible_actions(t, Agent::One), InvalidOperation);
}

TEST(Environment, ValenceBlocksOvergrowth) {
  Environment env;
  State s = env.init_state(marked("CC", {0}), marked("C", {0}), parse_smiles("CCC"));
  s = env.apply_actions(s, Action::add(Element::C, BondOrder::Triple, 0), Action::noop());
  const auto acts = env.feasible_actions(s, Agent::One);
  for (const auto &a : acts) {
    if (!a.is_noop()) {
      EXPECT_EQ(a.attach, 2);  // atom 0 is now saturated
    }
  }
}

TEST(Environment, InitRequiresMarks) {
  Environment env;
  EXPECT_THROW(env.init_state(parse_smiles("CC"), marked("C", {0}), parse_smiles("CCC")),
               InvalidOperation);
  EXPECT_THROW(Environment(std::nullopt, 0), InvalidOperation);
}

TEST(Environment, ReplayPadsWithNoops) {
  Environment env;
  const State s = simple_state(env);
  const Episode ep = env.replay(s, {{Action::add(Element::Cl, BondOrder::Single, 0), Action::noop()}}, 1);
  EXPECT_EQ(ep.length(), 3);
  EXPECT_TRUE(ep.complete());
  EXPECT_TRUE(ep.actions[1].first.is_noop() && ep.actions[2].second.is_noop());
  EXPECT_EQ(ep.final_state().current(Agent::One).canonical, write_canonical_smiles(parse_smiles("CCCl")));
  std::vector<JointAction> too_long(4, {Action::noop(), Action::noop()});
  EXPECT_THROW(env.replay(s, too_long), InvalidOperation);
}

TEST(Environment, EpisodeKeyIgnoresAtomNumbering) {
  Environment env;
  const State a = env.init_state(marked("CCO", {0}), marked("N", {0}), parse_smiles("NCCO"));
  const State b = env.init_state(marked("OCC", {2}), marked("N", {0}), parse_smiles("OCCN"));
  const Episode ea = env.replay(a, {{Action::add(Element::Br, BondOrder::Single, 0), Action::noop()}}, 1);
  const Episode eb = env.replay(b, {{Action::add(Element::Br, BondOrder::Single, 2), Action::noop()}}, 1);
  EXPECT_EQ(ea.key(), eb.key());
  const Episode ec = env.replay(a, {{Action::add(Element::I, BondOrder::Single, 0), Action::noop()}}, 1);
  EXPECT_NE(ea.key(), ec.key());
}

TEST(Environment, MirroredSwapsAgents) {
  Environment env;
  const State s = simple_state(env, "CCO", "N");
  const State m = s.mirrored();
  EXPECT_EQ(m.currents[0], s.currents[1]);
  EXPECT_EQ(m.synthons[1], s.synthons[0]);
  EXPECT_EQ(m.product, s.product);
}

TEST(ReactantPair, KeyIsOrderInsensitive) {
  const ReactantPair p{{make_mol(parse_smiles("CCO")), make_mol(parse_smiles("N"))}};
  const ReactantPair q{{make_mol(parse_smiles("N")), make_mol(parse_smiles("OCC"))}};
  EXPECT_EQ(p.key(), q.key());
}

TEST(Completion, PlansBreadthFirstFromCenter) {
  MolGraph synthon = parse_smiles("[CH3:1][C:2]=[O:3]");
  synthon.mark(1);
  const MolGraph reactant = parse_smiles("[CH3:1][C:2](=[O:3])OC");
  const auto plan = plan_completion(synthon, reactant);
  ASSERT_EQ(plan.size(), 2u);
  EXPECT_EQ(plan[0], Action::add(Element::O, BondOrder::Single, 1));
  EXPECT_EQ(plan[1], Action::add(Element::C, BondOrder::Single, 3));
}

TEST(Completion, EmptyWhenReactantEqualsSynthon) {
  MolGraph synthon = parse_smiles("[NH2:1][CH3:2]");
  synthon.mark(0);
  EXPECT_TRUE(plan_completion(synthon, parse_smiles("[NH2:1][CH3:2]")).empty());
}

TEST(Completion, RejectsUnrealizableDiffs) {
  MolGraph synthon = parse_smiles("[CH3:1][CH2:2]");
  synthon.mark(1);
  EXPECT_THROW(plan_completion(synthon, parse_smiles("[CH3:1][CH2:2]c1ccccc1")), UnrealizableReaction);
  EXPECT_THROW(plan_completion(synthon, parse_smiles("[CH3:1][CH2:2][N+](C)(C)C")), UnrealizableReaction);
  EXPECT_THROW(plan_completion(synthon, parse_smiles("[CH2:1]=[CH:2]Cl")), UnrealizableReaction);
  EXPECT_THROW(plan_completion(synthon, parse_smiles("[CH3:1]C[CH2:2]Cl")), UnrealizableReaction);
  EXPECT_THROW(plan_completion(synthon, parse_smiles("[CH3:1][CH2:2].Cl[CH3:5]")), UnrealizableReaction);
}

TEST(Completion, ReplayReachesReactant) {
  MolGraph synthon = parse_smiles("[c:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1");
  synthon.mark(0);
  const MolGraph reactant = parse_smiles("OB(O)[c:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1");
  const auto plan = plan_completion(synthon, reactant);
  ASSERT_EQ(plan.size(), 3u);
  Environment env;
  const State s = env.init_state(synthon, marked("C", {0}), parse_smiles("Cc1ccccc1"));
  std::vector<JointAction> acts;
  for (const auto &a : plan) acts.push_back({a, Action::noop()});
  const Episode ep = env.replay(s, acts, 1);
  EXPECT_EQ(ep.final_state().current(Agent::One).canonical, write_canonical_smiles(reactant));
}
