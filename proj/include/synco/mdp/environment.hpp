#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "synco/chem/fingerprint.hpp"
#include "synco/chem/mol_graph.hpp"
#include "synco/chem/smiles_writer.hpp"
#include "synco/mdp/action.hpp"
#include "synco/util/error.hpp"

namespace synco {

inline constexpr int kDefaultStepLimit = 3;

/// Immutable molecule with its fingerprint and canonical SMILES precomputed.
struct Mol {
  MolGraph graph;
  BitFingerprint fingerprint;
  std::string canonical;
};

using MolPtr = std::shared_ptr<const Mol>;

inline MolPtr make_mol(MolGraph graph) {
  auto fp = morgan_fingerprint(graph);
  auto smi = write_canonical_smiles(graph);
  return std::make_shared<const Mol>(Mol{std::move(graph), std::move(fp), std::move(smi)});
}

/// MDP state: original synthons, current synthons, product and steps left.
struct State {
  std::array<MolPtr, 2> synthons;
  std::array<MolPtr, 2> currents;
  MolPtr product;
  int steps_left = 0;
  int step_limit = 0;

  bool terminal() const { return steps_left == 0; }
  int step() const { return step_limit - steps_left; }
  const Mol &synthon(Agent a) const { return *synthons[index_of(a)]; }
  const Mol &current(Agent a) const { return *currents[index_of(a)]; }

  /// Same state with the agents' roles exchanged.
  State mirrored() const {
    State s = *this;
    std::swap(s.synthons[0], s.synthons[1]);
    std::swap(s.currents[0], s.currents[1]);
    return s;
  }
};

/// Unordered (element, element, bond order) triples seen in a corpus.
class BondTypeTable {
 public:
  using Entry = std::tuple<Element, Element, BondOrder>;

  void insert(Element a, Element b, BondOrder o) { entries_.insert(normalize(a, b, o)); }
  bool contains(Element a, Element b, BondOrder o) const {
    return entries_.count(normalize(a, b, o)) > 0;
  }
  void add_molecule(const MolGraph &mol) {
    for (const Bond &b : mol.bonds()) {
      insert(mol.atom(b.begin).element, mol.atom(b.end).element, b.order);
    }
  }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::set<Entry> &entries() const { return entries_; }

  friend bool operator==(const BondTypeTable &, const BondTypeTable &) = default;

 private:
  static Entry normalize(Element a, Element b, BondOrder o) {
    return a <= b ? Entry{a, b, o} : Entry{b, a, o};
  }
  std::set<Entry> entries_;
};

/// Bond-type table over every molecule of a corpus. Throws on an empty corpus.
inline BondTypeTable bond_type_table(const std::vector<MolGraph> &molecules) {
  if (molecules.empty()) throw InvalidOperation("bond_type_table: empty corpus");
  BondTypeTable t;
  for (const auto &m : molecules) t.add_molecule(m);
  return t;
}

/// A trajectory s_0 .. s_T with the joint actions between states.
struct Episode {
  std::vector<State> states;
  std::vector<JointAction> actions;
  int reward = -1;  // -1 until the terminal reward is attached

  const State &initial() const { return states.front(); }
  const State &final_state() const { return states.back(); }
  const Mol &product() const { return *states.front().product; }
  int length() const { return static_cast<int>(actions.size()); }
  bool complete() const {
    return !states.empty() && states.back().terminal() && reward >= 0 &&
           states.size() == actions.size() + 1;
  }

  /// Identity used for set-union: the product and the canonical synthon
  /// pair of every state. Independent of atom numbering, so episodes that
  /// differ only by symmetric attachment choices share a key.
  std::string key() const {
    std::string k = states.front().product->canonical;
    for (const State &s : states) k += "|" + s.currents[0]->canonical + "," + s.currents[1]->canonical;
    return k;
  }
};

/// Predicted or true reactant pair, in agent order.
struct ReactantPair {
  std::array<MolPtr, 2> mols;

  /// Order-insensitive identity: sorted canonical SMILES joined by '.'.
  std::string key() const {
    std::string a = mols[0]->canonical, b = mols[1]->canonical;
    if (b < a) std::swap(a, b);
    return a + "." + b;
  }
};

/// One synthon-completion problem: the initial state and, when known, the
/// ground-truth reactants (agent order).
struct Task {
  std::string id;
  State initial;
  std::optional<ReactantPair> truth;
};

/// Deterministic two-agent environment. An optional bond-type table enforces
/// that every new bond type occurs in the training corpus.
class Environment {
 public:
  explicit Environment(std::optional<BondTypeTable> table = std::nullopt,
                       int step_limit = kDefaultStepLimit)
      : table_(std::move(table)), step_limit_(step_limit) {
    if (step_limit_ < 1) throw InvalidOperation("step limit must be >= 1");
  }

  int step_limit() const { return step_limit_; }
  const std::optional<BondTypeTable> &bond_table() const { return table_; }

  State init_state(MolGraph synthon1, MolGraph synthon2, MolGraph product,
                   std::optional<int> step_limit = std::nullopt) const {
    const int limit = step_limit.value_or(step_limit_);
    if (limit < 1) throw InvalidOperation("step limit must be >= 1");
    if (synthon1.marks().empty() || synthon2.marks().empty()) {
      throw InvalidOperation("synthon without a marked reaction-center atom");
    }
    State s;
    s.synthons = {make_mol(std::move(synthon1)), make_mol(std::move(synthon2))};
    s.currents = s.synthons;
    s.product = make_mol(std::move(product));
    s.steps_left = limit;
    s.step_limit = limit;
    return s;
  }

  bool admits(const MolGraph &mol, const Action &a) const {
    if (a.is_noop()) return true;
    if (a.attach < 0 || a.attach >= mol.num_atoms()) return false;
    if (!mol.is_marked(a.attach)) return false;
    if (a.order == BondOrder::Aromatic) return false;
    const int units = bond_valence(a.order);
    if (free_valence(mol, a.attach) < units) return false;
    if (max_valence(a.element, 0) < units) return false;
    if (std::find(kActionElements.begin(), kActionElements.end(), a.element) ==
        kActionElements.end()) {
      return false;
    }
    if (table_ && !table_->contains(mol.atom(a.attach).element, a.element, a.order)) return false;
    return true;
  }

  bool is_feasible(const State &s, Agent agent, const Action &a) const {
    return !s.terminal() && admits(s.current(agent).graph, a);
  }

  /// Feasible actions in deterministic order: ADDs by (attach, element,
  /// bond order), NOOP last.
  std::vector<Action> feasible_actions(const State &s, Agent agent) const {
    if (s.terminal()) throw InvalidOperation("feasible_actions on a terminal state");
    const MolGraph &g = s.current(agent).graph;
    std::vector<Action> out;
    for (int m : g.marks()) {
      for (Element e : kActionElements) {
        for (BondOrder o : kActionBondOrders) {
          const Action a = Action::add(e, o, m);
          if (admits(g, a)) out.push_back(a);
        }
      }
    }
    out.push_back(Action::noop());
    return out;
  }

  /// Graph after an ADD: new atom appended, bonded and marked.
  static MolGraph grow(const MolGraph &g, const Action &a) {
    MolGraph out = g;
    if (a.is_noop()) return out;
    Atom atom;
    atom.element = a.element;
    const int idx = out.add_atom(atom);
    out.add_bond(a.attach, idx, a.order);
    out.mark(idx);
    return out;
  }

  MolPtr successor(const MolPtr &mol, const Action &a) const {
    if (a.is_noop()) return mol;
    return make_mol(grow(mol->graph, a));
  }

  /// Child of `s` with the given next currents (already grown).
  static State advance(const State &s, MolPtr next1, MolPtr next2) {
    State out = s;
    out.currents = {std::move(next1), std::move(next2)};
    out.steps_left = s.steps_left - 1;
    return out;
  }

  State apply_actions(const State &s, const Action &a1, const Action &a2) const {
    if (s.terminal()) throw InvalidOperation("apply_actions on a terminal state");
    if (!is_feasible(s, Agent::One, a1)) {
      throw InvalidOperation("infeasible action for agent 1: " + a1.to_string());
    }
    if (!is_feasible(s, Agent::Two, a2)) {
      throw InvalidOperation("infeasible action for agent 2: " + a2.to_string());
    }
    return advance(s, successor(s.currents[0], a1), successor(s.currents[1], a2));
  }

  /// Replays a joint-action sequence from `s0`, padding with NOOPs to the
  /// step limit.
  Episode replay(const State &s0, std::vector<JointAction> actions, int reward = -1) const {
    if (static_cast<int>(actions.size()) > s0.steps_left) {
      throw InvalidOperation("action sequence longer than the step limit");
    }
    actions.resize(s0.steps_left, JointAction{Action::noop(), Action::noop()});
    Episode ep;
    ep.states.reserve(actions.size() + 1);
    ep.states.push_back(s0);
    for (const auto &ja : actions) ep.states.push_back(apply_actions(ep.states.back(), ja.first, ja.second));
    ep.actions = std::move(actions);
    ep.reward = reward;
    return ep;
  }

 private:
  std::optional<BondTypeTable> table_;
  int step_limit_;
};

inline ReactantPair predicted_reactants(const State &s) { return {{s.currents[0], s.currents[1]}}; }

}  // namespace synco
