#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "synco/chem/element.hpp"
#include "synco/util/error.hpp"

namespace synco {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

/// Valence units of a bond when it is not part of an aromatic system.
constexpr int bond_valence(BondOrder o) {
  return o == BondOrder::Aromatic ? 1 : static_cast<int>(o);
}

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  bool aromatic = false;
  bool lone_pair = false;  // aromatic atom donating a lone pair, e.g. [nH]
  int atom_map = 0;        // 0 = unmapped

  friend bool operator==(const Atom &, const Atom &) = default;
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == begin ? end : begin; }
};

struct Neighbor {
  int atom;
  int bond;
};

/// Heavy-atom molecular graph with implicit hydrogens. Hydrogen counts are
/// never stored; they follow from the valence model (see free_valence).
/// `marks` flags the atoms new atoms may be attached to.
class MolGraph {
 public:
  MolGraph() = default;

  int add_atom(const Atom &atom) {
    atoms_.push_back(atom);
    adjacency_.emplace_back();
    return static_cast<int>(atoms_.size()) - 1;
  }

  int add_bond(int a, int b, BondOrder order) {
    check_index(a);
    check_index(b);
    if (a == b) throw InvalidOperation("self-loop bond on atom " + std::to_string(a));
    if (bond_between(a, b)) {
      throw InvalidOperation("duplicate bond between atoms " + std::to_string(a) + " and " +
                             std::to_string(b));
    }
    bonds_.push_back({a, b, order});
    const int idx = static_cast<int>(bonds_.size()) - 1;
    adjacency_[a].push_back({b, idx});
    adjacency_[b].push_back({a, idx});
    return idx;
  }

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  const Atom &atom(int i) const { return atoms_.at(i); }
  Atom &atom(int i) { return atoms_.at(i); }
  const Bond &bond(int i) const { return bonds_.at(i); }
  const std::vector<Atom> &atoms() const { return atoms_; }
  const std::vector<Bond> &bonds() const { return bonds_; }
  std::span<const Neighbor> neighbors(int i) const { return adjacency_.at(i); }
  int degree(int i) const { return static_cast<int>(adjacency_.at(i).size()); }

  std::optional<int> bond_between(int a, int b) const {
    for (const auto &n : adjacency_.at(a)) {
      if (n.atom == b) return n.bond;
    }
    return std::nullopt;
  }

  void mark(int i) {
    check_index(i);
    auto it = std::lower_bound(marks_.begin(), marks_.end(), i);
    if (it == marks_.end() || *it != i) marks_.insert(it, i);
  }
  bool is_marked(int i) const { return std::binary_search(marks_.begin(), marks_.end(), i); }
  const std::vector<int> &marks() const { return marks_; }
  void clear_marks() { marks_.clear(); }

  void clear_atom_maps() {
    for (auto &a : atoms_) a.atom_map = 0;
  }

  std::optional<int> find_atom_map(int map) const {
    for (int i = 0; i < num_atoms(); ++i) {
      if (atoms_[i].atom_map == map) return i;
    }
    return std::nullopt;
  }

 private:
  void check_index(int i) const {
    if (i < 0 || i >= num_atoms()) {
      throw InvalidOperation("atom index " + std::to_string(i) + " out of range");
    }
  }

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<int> marks_;
};

namespace detail {

// Valence units consumed by explicit bonds. Aromatic bonds count 1 each;
// an aromatic atom additionally spends one unit on its ring pi bond when its
// lowest allowed valence leaves room for it. Lone-pair donors (furan O,
// thiophene S, N-substituted pyrrole N) therefore spend none, and neither
// does an atom flagged lone_pair ([nH]).
inline int used_valence(const MolGraph &mol, int i) {
  int sum = 0;
  bool has_aromatic_bond = false;
  for (const auto &n : mol.neighbors(i)) {
    const BondOrder o = mol.bond(n.bond).order;
    sum += bond_valence(o);
    has_aromatic_bond |= o == BondOrder::Aromatic;
  }
  const Atom &a = mol.atom(i);
  if (a.aromatic && has_aromatic_bond && !a.lone_pair) {
    const int lowest = allowed_valences(a.element, a.formal_charge)[0];
    if (sum + 1 <= lowest) sum += 1;
  }
  return sum;
}

// True iff the aromatic pi unit is counted for atom `i`.
inline bool spends_pi_unit(const MolGraph &mol, int i) {
  int plain = 0;
  for (const auto &n : mol.neighbors(i)) plain += bond_valence(mol.bond(n.bond).order);
  return used_valence(mol, i) > plain;
}

// Smallest allowed valence that accommodates `used`, or -1 if none does.
inline int target_valence(const Atom &a, int used) {
  for (int v : allowed_valences(a.element, a.formal_charge)) {
    if (v >= used) return v;
  }
  return -1;
}

}  // namespace detail

/// Explicit bond-valence units used by atom `i` (aromatic rule applied).
inline int total_bond_order(const MolGraph &mol, int i) {
  if (i < 0 || i >= mol.num_atoms()) {
    throw InvalidOperation("atom index " + std::to_string(i) + " out of range");
  }
  return detail::used_valence(mol, i);
}

/// Additional single-bond units atom `i` can accept before reaching the
/// smallest allowed valence that fits its current bonds. Equals the implicit
/// hydrogen count.
inline int free_valence(const MolGraph &mol, int i) {
  const int used = total_bond_order(mol, i);
  const int target = detail::target_valence(mol.atom(i), used);
  return target < 0 ? 0 : target - used;
}

inline int implicit_hydrogens(const MolGraph &mol, int i) { return free_valence(mol, i); }

/// True iff atom `i` does not exceed its maximum allowed valence.
inline bool valence_ok(const MolGraph &mol, int i, int extra_hydrogens = 0) {
  const Atom &a = mol.atom(i);
  return detail::used_valence(mol, i) + extra_hydrogens <= max_valence(a.element, a.formal_charge);
}

/// Index of the first atom violating valence rules, if any.
inline std::optional<int> first_valence_violation(const MolGraph &mol) {
  for (int i = 0; i < mol.num_atoms(); ++i) {
    if (!valence_ok(mol, i)) return i;
  }
  return std::nullopt;
}

/// Per-bond ring membership (a bond is in a ring iff it is not a bridge).
inline std::vector<bool> ring_bonds(const MolGraph &mol) {
  const int n = mol.num_atoms();
  std::vector<bool> in_ring(mol.num_bonds(), true);
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  std::vector<Frame> stack;
  for (int root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    disc[root] = low[root] = timer++;
    stack.push_back({root, -1, 0});
    while (!stack.empty()) {
      Frame &f = stack.back();
      const auto nbrs = mol.neighbors(f.atom);
      if (f.next < nbrs.size()) {
        const Neighbor nb = nbrs[f.next++];
        if (nb.bond == f.parent_bond) continue;
        if (disc[nb.atom] < 0) {
          disc[nb.atom] = low[nb.atom] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent]) in_ring[done.parent_bond] = false;
        }
      }
    }
  }
  return in_ring;
}

inline std::vector<bool> ring_atoms(const MolGraph &mol) {
  const auto rb = ring_bonds(mol);
  std::vector<bool> out(mol.num_atoms(), false);
  for (int b = 0; b < mol.num_bonds(); ++b) {
    if (rb[b]) out[mol.bond(b).begin] = out[mol.bond(b).end] = true;
  }
  return out;
}

/// Connected-component label per atom; labels ordered by lowest atom index.
inline std::vector<int> connected_components(const MolGraph &mol, int *count = nullptr) {
  std::vector<int> comp(mol.num_atoms(), -1);
  int c = 0;
  std::vector<int> queue;
  for (int s = 0; s < mol.num_atoms(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = c;
    queue.assign(1, s);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      for (const auto &n : mol.neighbors(queue[q])) {
        if (comp[n.atom] < 0) {
          comp[n.atom] = c;
          queue.push_back(n.atom);
        }
      }
    }
    ++c;
  }
  if (count) *count = c;
  return comp;
}

/// Induced subgraph on `keep` (atom order preserved). Marks are carried over.
/// `old_to_new` receives -1 for dropped atoms.
inline MolGraph induced_subgraph(const MolGraph &mol, const std::vector<bool> &keep,
                                 std::vector<int> *old_to_new = nullptr) {
  MolGraph out;
  std::vector<int> remap(mol.num_atoms(), -1);
  for (int i = 0; i < mol.num_atoms(); ++i) {
    if (keep[i]) remap[i] = out.add_atom(mol.atom(i));
  }
  for (const auto &b : mol.bonds()) {
    if (remap[b.begin] >= 0 && remap[b.end] >= 0) out.add_bond(remap[b.begin], remap[b.end], b.order);
  }
  for (int m : mol.marks()) {
    if (remap[m] >= 0) out.mark(remap[m]);
  }
  if (old_to_new) *old_to_new = std::move(remap);
  return out;
}

/// Copy of `mol` with atoms reordered so that new index k holds old atom
/// `order[k]`. Used by tests to produce isomorphic relabelings.
inline MolGraph permute_atoms(const MolGraph &mol, const std::vector<int> &order) {
  MolGraph out;
  std::vector<int> old_to_new(mol.num_atoms(), -1);
  for (int k = 0; k < static_cast<int>(order.size()); ++k) {
    old_to_new[order[k]] = out.add_atom(mol.atom(order[k]));
  }
  for (const Bond &bd : mol.bonds()) out.add_bond(old_to_new[bd.begin], old_to_new[bd.end], bd.order);
  for (int m : mol.marks()) out.mark(old_to_new[m]);
  return out;
}

}  // namespace synco
