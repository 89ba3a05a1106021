#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "synco/chem/mol_graph.hpp"

namespace synco {

namespace detail {

// Re-rank atoms by (current rank, sorted neighbour (bond, rank) list) until
// the partition stops splitting. Ranks are "number of atoms with a strictly
// smaller key", so tied atoms share a rank and ranks of distinct classes are
// spaced by class size.
inline void refine_ranks(const MolGraph &mol, std::vector<int> &rank) {
  const int n = mol.num_atoms();
  std::vector<std::vector<std::int64_t>> keys(n);
  std::vector<int> order(n);
  int classes = 0;
  {
    std::vector<int> sorted = rank;
    std::sort(sorted.begin(), sorted.end());
    classes = static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  }
  while (true) {
    for (int i = 0; i < n; ++i) {
      std::vector<std::int64_t> nb;
      nb.reserve(mol.degree(i));
      for (const auto &e : mol.neighbors(i)) {
        nb.push_back(static_cast<std::int64_t>(rank[e.atom]) * 8 +
                     static_cast<int>(mol.bond(e.bond).order));
      }
      std::sort(nb.begin(), nb.end());
      keys[i].assign(1, rank[i]);
      keys[i].insert(keys[i].end(), nb.begin(), nb.end());
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
    int new_classes = 0;
    for (int k = 0; k < n; ++k) {
      if (k == 0 || keys[order[k]] != keys[order[k - 1]]) {
        rank[order[k]] = k;
        ++new_classes;
      } else {
        rank[order[k]] = rank[order[k - 1]];
      }
    }
    if (new_classes == classes) break;
    classes = new_classes;
  }
}

inline std::vector<int> initial_ranks(const MolGraph &mol) {
  const int n = mol.num_atoms();
  const auto in_ring = ring_atoms(mol);
  using Key = std::tuple<int, int, int, int, int, int, int>;
  std::vector<Key> keys(n);
  for (int i = 0; i < n; ++i) {
    const Atom &a = mol.atom(i);
    keys[i] = {atomic_number(a.element), a.formal_charge, a.aromatic ? 1 : 0, mol.degree(i),
               total_bond_order(mol, i), implicit_hydrogens(mol, i), in_ring[i] ? 1 : 0};
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return keys[x] < keys[y]; });
  std::vector<int> rank(n);
  for (int k = 0; k < n; ++k) {
    rank[order[k]] = (k > 0 && keys[order[k]] == keys[order[k - 1]]) ? rank[order[k - 1]] : k;
  }
  return rank;
}

}  // namespace detail

/// Canonical atom ranks: invariant refinement followed by repeated
/// individualisation of the lowest-index atom of the lowest tied class.
/// Atom maps do not take part.
inline std::vector<int> canonical_ranks(const MolGraph &mol) {
  const int n = mol.num_atoms();
  std::vector<int> rank = detail::initial_ranks(mol);
  detail::refine_ranks(mol, rank);
  while (true) {
    // Lowest rank value held by more than one atom.
    std::vector<int> count(n, 0);
    for (int r : rank) ++count[r];
    int tied = -1;
    for (int r = 0; r < n; ++r) {
      if (count[r] > 1) {
        tied = r;
        break;
      }
    }
    if (tied < 0) break;
    int chosen = -1;
    for (int i = 0; i < n; ++i) {
      if (rank[i] == tied) {
        chosen = i;
        break;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (rank[i] == tied && i != chosen) rank[i] = tied + 1;
    }
    detail::refine_ranks(mol, rank);
  }
  return rank;
}

struct SmilesOptions {
  bool canonical = true;
  bool atom_maps = false;
};

namespace detail {

class SmilesWriter {
 public:
  SmilesWriter(const MolGraph &mol, const SmilesOptions &opt) : mol_(mol), opt_(opt) {
    const int n = mol.num_atoms();
    if (opt.canonical) {
      rank_ = canonical_ranks(mol);
    } else {
      rank_.resize(n);
      std::iota(rank_.begin(), rank_.end(), 0);
    }
    visited_.assign(n, false);
    bond_used_.assign(mol.num_bonds(), false);
    ring_bonds_at_.resize(n);
    children_.resize(n);
    sorted_nbrs_.resize(n);
    for (int i = 0; i < n; ++i) {
      auto nb = mol.neighbors(i);
      sorted_nbrs_[i].assign(nb.begin(), nb.end());
      std::sort(sorted_nbrs_[i].begin(), sorted_nbrs_[i].end(),
                [&](const Neighbor &x, const Neighbor &y) { return rank_[x.atom] < rank_[y.atom]; });
    }
  }

  std::string write(std::vector<int> *output_order) {
    const int n = mol_.num_atoms();
    std::vector<int> by_rank(n);
    std::iota(by_rank.begin(), by_rank.end(), 0);
    std::sort(by_rank.begin(), by_rank.end(), [&](int a, int b) { return rank_[a] < rank_[b]; });
    std::vector<int> roots;
    for (int a : by_rank) {
      if (!visited_[a]) {
        roots.push_back(a);
        build_tree(a, -1);
      }
    }
    for (std::size_t r = 0; r < roots.size(); ++r) {
      if (r) out_ += '.';
      emit(roots[r]);
    }
    if (output_order) *output_order = order_;
    return out_;
  }

 private:
  struct RingBond {
    int bond;
    bool opening;
  };

  void build_tree(int root, int parent_bond) {
    struct Frame {
      int atom;
      int parent_bond;
      std::size_t next;
    };
    std::vector<Frame> stack{{root, parent_bond, 0}};
    visited_[root] = true;
    while (!stack.empty()) {
      Frame &f = stack.back();
      const auto &nbrs = sorted_nbrs_[f.atom];
      if (f.next >= nbrs.size()) {
        stack.pop_back();
        continue;
      }
      const Neighbor nb = nbrs[f.next++];
      if (nb.bond == f.parent_bond || bond_used_[nb.bond]) continue;
      bond_used_[nb.bond] = true;
      if (visited_[nb.atom]) {
        ring_bonds_at_[nb.atom].push_back({nb.bond, true});
        ring_bonds_at_[f.atom].push_back({nb.bond, false});
      } else {
        children_[f.atom].push_back(nb);
        visited_[nb.atom] = true;
        stack.push_back({nb.atom, nb.bond, 0});
      }
    }
  }

  std::string bond_symbol(const Bond &b) const {
    const bool both_aromatic = mol_.atom(b.begin).aromatic && mol_.atom(b.end).aromatic;
    switch (b.order) {
      case BondOrder::Single:
        return both_aromatic ? "-" : "";
      case BondOrder::Double:
        return "=";
      case BondOrder::Triple:
        return "#";
      case BondOrder::Aromatic:
        return both_aromatic ? "" : ":";
    }
    return "";
  }

  std::string atom_symbol(int i) const {
    const Atom &a = mol_.atom(i);
    const ElementInfo &inf = info(a.element);
    std::string sym(inf.symbol);
    if (a.aromatic) {
      for (auto &ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    const bool mapped = opt_.atom_maps && a.atom_map > 0;
    const int h = implicit_hydrogens(mol_, i);
    const bool donor_h = a.aromatic && a.lone_pair && h > 0;
    if (inf.organic_subset && a.formal_charge == 0 && !mapped && !donor_h) return sym;
    std::string s = "[" + sym;
    if (h > 0) {
      s += 'H';
      if (h > 1) s += std::to_string(h);
    }
    if (a.formal_charge != 0) {
      s += a.formal_charge > 0 ? '+' : '-';
      const int mag = a.formal_charge > 0 ? a.formal_charge : -a.formal_charge;
      if (mag > 1) s += std::to_string(mag);
    }
    if (mapped) s += ":" + std::to_string(a.atom_map);
    s += ']';
    return s;
  }

  static std::string ring_label(int d) { return d < 10 ? std::to_string(d) : "%" + std::to_string(d); }

  int allocate_digit() {
    for (int d = 1;; ++d) {
      if (d >= static_cast<int>(digit_busy_.size())) digit_busy_.resize(d + 1, false);
      if (!digit_busy_[d]) {
        digit_busy_[d] = true;
        return d;
      }
    }
  }

  void emit(int root) {
    // Iterative pre-order emission; branch parentheses are closing markers
    // on the explicit stack.
    struct Item {
      int atom;        // -1 for a ')' marker
      int via_bond;    // bond from parent, -1 for roots
      bool branch;     // wrap in parentheses
    };
    std::vector<Item> stack{{root, -1, false}};
    while (!stack.empty()) {
      const Item it = stack.back();
      stack.pop_back();
      if (it.atom < 0) {
        out_ += ')';
        continue;
      }
      if (it.branch) {
        out_ += '(';
        stack.push_back({-1, -1, false});
      }
      if (it.via_bond >= 0) out_ += bond_symbol(mol_.bond(it.via_bond));
      const int a = it.atom;
      out_ += atom_symbol(a);
      order_.push_back(a);
      std::vector<int> released;
      for (const RingBond &rb : ring_bonds_at_[a]) {
        if (!rb.opening) {
          const int d = ring_digit_[rb.bond];
          out_ += ring_label(d);
          released.push_back(d);
        }
      }
      for (const RingBond &rb : ring_bonds_at_[a]) {
        if (rb.opening) {
          const int d = allocate_digit();
          ring_digit_[rb.bond] = d;
          out_ += bond_symbol(mol_.bond(rb.bond)) + ring_label(d);
        }
      }
      for (int d : released) digit_busy_[d] = false;
      const auto &kids = children_[a];
      // push in reverse so the first child is emitted first
      for (std::size_t k = kids.size(); k-- > 0;) {
        stack.push_back({kids[k].atom, kids[k].bond, k + 1 < kids.size()});
      }
    }
  }

  const MolGraph &mol_;
  SmilesOptions opt_;
  std::vector<int> rank_;
  std::vector<bool> visited_;
  std::vector<bool> bond_used_;
  std::vector<std::vector<RingBond>> ring_bonds_at_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<Neighbor>> sorted_nbrs_;
  std::vector<int> order_;
  std::vector<bool> digit_busy_;
  std::map<int, int> ring_digit_;
  std::string out_;
};

}  // namespace detail

/// Writes SMILES. `output_order[k]` receives the graph index of the k-th
/// atom in the string, which is also its index after re-parsing.
inline std::string write_smiles(const MolGraph &mol, const SmilesOptions &opt = {},
                                std::vector<int> *output_order = nullptr) {
  return detail::SmilesWriter(mol, opt).write(output_order);
}

/// Canonical SMILES: identical for every atom ordering of isomorphic graphs.
/// Atom maps and marks are not written.
inline std::string write_canonical_smiles(const MolGraph &mol) { return write_smiles(mol, {}); }

}  // namespace synco
