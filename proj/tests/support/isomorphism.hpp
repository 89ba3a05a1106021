#pragma once

// Graph isomorphism by backtracking, independent of canonical ranking.
// Atoms of `a` are matched in BFS order so every atom after the first of a
// component is tried only against neighbours of an already matched image.

#include <functional>
#include <vector>

#include "synco/chem.hpp"

namespace synco::testing {

inline bool same_atom(const MolGraph &a, int i, const MolGraph &b, int j) {
  const Atom &x = a.atom(i), &y = b.atom(j);
  return x.element == y.element && x.formal_charge == y.formal_charge && x.aromatic == y.aromatic &&
         a.degree(i) == b.degree(j) && implicit_hydrogens(a, i) == implicit_hydrogens(b, j);
}

inline bool isomorphic(const MolGraph &a, const MolGraph &b) {
  const int n = a.num_atoms();
  if (n != b.num_atoms() || a.num_bonds() != b.num_bonds()) return false;
  std::vector<int> order, parent(n, -1);
  std::vector<bool> seen(n, false);
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    seen[s] = true;
    order.push_back(s);
    for (std::size_t q = order.size() - 1; q < order.size(); ++q) {
      for (const auto &nb : a.neighbors(order[q])) {
        if (!seen[nb.atom]) {
          seen[nb.atom] = true;
          parent[nb.atom] = order[q];
          order.push_back(nb.atom);
        }
      }
    }
  }
  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t)> go = [&](std::size_t k) {
    if (k == order.size()) return true;
    const int i = order[k];
    auto consistent = [&](int j) {
      if (used[j] || !same_atom(a, i, b, j)) return false;
      for (const auto &nb : a.neighbors(i)) {
        if (map[nb.atom] < 0) continue;
        const auto bb = b.bond_between(j, map[nb.atom]);
        if (!bb || b.bond(*bb).order != a.bond(nb.bond).order) return false;
      }
      return true;
    };
    auto attempt = [&](int j) {
      if (!consistent(j)) return false;
      map[i] = j;
      used[j] = true;
      if (go(k + 1)) return true;
      map[i] = -1;
      used[j] = false;
      return false;
    };
    if (parent[i] >= 0) {
      for (const auto &nb : b.neighbors(map[parent[i]])) {
        if (attempt(nb.atom)) return true;
      }
      return false;
    }
    for (int j = 0; j < n; ++j) {
      if (attempt(j)) return true;
    }
    return false;
  };
  return go(0);
}

}  // namespace synco::testing
