#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "synco/chem/smiles_writer.hpp"
#include "synco/mdp/action.hpp"
#include "synco/util/error.hpp"

namespace synco {

/// ADD sequence that grows `synthon` into `reactant`, matching atoms through
/// atom-map numbers. Added atoms are ordered breadth-first from the marked
/// atoms; siblings by (element, bond order, canonical rank in the reactant).
/// Attach indices refer to the growing synthon (new atoms are appended).
///
/// Throws UnrealizableReaction when the reactant is not the synthon plus a
/// tree of neutral, non-aromatic vocabulary atoms hanging off marked atoms.
inline std::vector<Action> plan_completion(const MolGraph &synthon, const MolGraph &reactant) {
  std::map<int, int> rxn_by_map;
  for (int i = 0; i < reactant.num_atoms(); ++i) {
    const int m = reactant.atom(i).atom_map;
    if (m > 0 && !rxn_by_map.emplace(m, i).second) {
      throw UnrealizableReaction("duplicate atom map " + std::to_string(m) + " in reactant");
    }
  }
  std::vector<int> rxn_to_cur(reactant.num_atoms(), -1);
  std::vector<int> cur_to_rxn;
  for (int i = 0; i < synthon.num_atoms(); ++i) {
    const Atom &a = synthon.atom(i);
    auto it = a.atom_map > 0 ? rxn_by_map.find(a.atom_map) : rxn_by_map.end();
    if (it == rxn_by_map.end()) {
      throw UnrealizableReaction("synthon atom " + std::to_string(i) + " has no mapped reactant atom");
    }
    const Atom &r = reactant.atom(it->second);
    if (r.element != a.element || r.formal_charge != a.formal_charge || r.aromatic != a.aromatic) {
      throw UnrealizableReaction("synthon atom " + std::to_string(i) + " changes in the reactant");
    }
    if (rxn_to_cur[it->second] >= 0) throw UnrealizableReaction("synthon atom maps collide");
    rxn_to_cur[it->second] = i;
    cur_to_rxn.push_back(it->second);
  }
  int matched_bonds = 0;
  for (const Bond &b : reactant.bonds()) {
    const int u = rxn_to_cur[b.begin], v = rxn_to_cur[b.end];
    if (u < 0 || v < 0) continue;
    ++matched_bonds;
    auto sb = synthon.bond_between(u, v);
    if (!sb || synthon.bond(*sb).order != b.order) {
      throw UnrealizableReaction("synthon bond changes in the reactant");
    }
  }
  if (matched_bonds != synthon.num_bonds()) {
    throw UnrealizableReaction("synthon bond missing from the reactant");
  }

  const auto rank = canonical_ranks(reactant);
  std::vector<Action> plan;
  std::vector<int> queue(synthon.marks().begin(), synthon.marks().end());
  int extra_bonds_used = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const int u = queue[q];
    const int r = cur_to_rxn[u];
    std::vector<std::tuple<Element, BondOrder, int, int>> cands;
    for (const auto &nb : reactant.neighbors(r)) {
      if (rxn_to_cur[nb.atom] >= 0) continue;
      cands.emplace_back(reactant.atom(nb.atom).element, reactant.bond(nb.bond).order,
                         rank[nb.atom], nb.atom);
    }
    std::sort(cands.begin(), cands.end());
    for (const auto &[elem, order, rk, atom] : cands) {
      const Atom &x = reactant.atom(atom);
      if (x.formal_charge != 0 || x.aromatic) {
        throw UnrealizableReaction("leaving-group atom is charged or aromatic");
      }
      if (std::find(kActionElements.begin(), kActionElements.end(), elem) == kActionElements.end()) {
        throw UnrealizableReaction("leaving-group element outside the action vocabulary");
      }
      if (order == BondOrder::Aromatic) throw UnrealizableReaction("aromatic leaving-group bond");
      const int idx = static_cast<int>(cur_to_rxn.size());
      rxn_to_cur[atom] = idx;
      cur_to_rxn.push_back(atom);
      plan.push_back(Action::add(elem, order, u));
      queue.push_back(idx);
      ++extra_bonds_used;
    }
  }
  if (static_cast<int>(cur_to_rxn.size()) != reactant.num_atoms()) {
    throw UnrealizableReaction("leaving group not attached to a reaction-center atom");
  }
  const int extra_bonds = reactant.num_bonds() - matched_bonds;
  if (extra_bonds != extra_bonds_used) {
    throw UnrealizableReaction("leaving group is not a tree");
  }
  return plan;
}

}  // namespace synco
