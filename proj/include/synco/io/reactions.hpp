#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synco/chem/mol_graph.hpp"
#include "synco/chem/smiles_parser.hpp"
#include "synco/chem/smiles_writer.hpp"
#include "synco/mdp/completion.hpp"
#include "synco/mdp/environment.hpp"
#include "synco/util/error.hpp"

namespace synco {

/// A mapped reaction with its reaction center given as two product atom maps.
struct Reaction {
  std::string id;
  std::vector<MolGraph> reactants;
  MolGraph product;
  std::pair<int, int> center{0, 0};
  int line = 0;  // 1-based source line, 0 when not read from a file
};

struct LineError {
  int line;
  std::string message;
};

struct LoadResult {
  std::vector<Reaction> reactions;
  std::vector<LineError> errors;
};

namespace detail {
inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::set<int> atom_maps(const MolGraph &g) {
  std::set<int> maps;
  for (const Atom &a : g.atoms()) {
    if (a.atom_map > 0) maps.insert(a.atom_map);
  }
  return maps;
}

inline int parse_map_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) throw FormatError("empty atom-map number in reaction center");
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw FormatError("bad atom-map number '" + std::string(s) + "'");
    v = v * 10 + (c - '0');
    if (v > 1000000) throw FormatError("atom-map number too large");
  }
  if (v == 0) throw FormatError("atom-map number must be positive");
  return v;
}
}  // namespace detail

/// Product bond joining atoms that come from different reactants. Throws
/// FormatError unless exactly one such bond exists.
inline std::pair<int, int> derive_center(const std::vector<MolGraph> &reactants,
                                         const MolGraph &product) {
  std::map<int, int> owner;
  for (std::size_t r = 0; r < reactants.size(); ++r) {
    for (int m : detail::atom_maps(reactants[r])) owner[m] = static_cast<int>(r);
  }
  std::vector<std::pair<int, int>> found;
  for (const Bond &b : product.bonds()) {
    const int ma = product.atom(b.begin).atom_map, mb = product.atom(b.end).atom_map;
    auto ia = owner.find(ma), ib = owner.find(mb);
    if (ia == owner.end() || ib == owner.end()) continue;
    if (ia->second != ib->second) found.emplace_back(std::min(ma, mb), std::max(ma, mb));
  }
  if (found.size() != 1) {
    throw FormatError("cannot derive reaction center: " + std::to_string(found.size()) +
                      " product bonds join different reactants");
  }
  return found.front();
}

/// Parses "reactants>>product" (or "reactants>agents>product"). Reactants
/// are the connected components of the left side that share an atom map
/// with the product; other components are treated as reagents.
inline Reaction parse_reaction(std::string_view rxn, std::optional<std::pair<int, int>> center = {}) {
  const auto parts = detail::split(rxn, '>');
  if (parts.size() != 3) throw FormatError("reaction SMILES must have the form 'reactants>>product'");
  Reaction r;
  r.product = parse_smiles(detail::trim(parts[2]));
  int nprod = 0;
  connected_components(r.product, &nprod);
  if (nprod != 1) throw FormatError("product side must hold exactly one molecule");
  const auto product_maps = detail::atom_maps(r.product);
  if (product_maps.empty()) throw FormatError("product has no atom maps");

  const MolGraph left = parse_smiles(detail::trim(parts[0]));
  int ncomp = 0;
  const auto comp = connected_components(left, &ncomp);
  for (int c = 0; c < ncomp; ++c) {
    std::vector<bool> keep(left.num_atoms());
    bool shares_map = false;
    for (int i = 0; i < left.num_atoms(); ++i) {
      keep[i] = comp[i] == c;
      if (keep[i] && product_maps.count(left.atom(i).atom_map)) shares_map = true;
    }
    if (shares_map) r.reactants.push_back(induced_subgraph(left, keep));
  }
  if (r.reactants.empty()) throw FormatError("no reactant shares an atom map with the product");
  r.center = center ? *center : derive_center(r.reactants, r.product);
  if (!product_maps.count(r.center.first) || !product_maps.count(r.center.second)) {
    throw FormatError("reaction center names an atom map absent from the product");
  }
  return r;
}

/// One TSV line: id, mapped reaction SMILES, optional "a:b" center.
inline Reaction parse_reaction_line(std::string_view line) {
  const auto cols = detail::split(line, '\t');
  if (cols.size() < 2 || cols.size() > 3) throw FormatError("expected 2 or 3 tab-separated columns");
  std::optional<std::pair<int, int>> center;
  if (cols.size() == 3 && !detail::trim(cols[2]).empty()) {
    const auto ab = detail::split(detail::trim(cols[2]), ':');
    if (ab.size() != 2) throw FormatError("reaction center must look like 'a:b'");
    center = std::pair{detail::parse_map_number(ab[0]), detail::parse_map_number(ab[1])};
  }
  const auto rxn = detail::trim(cols[1]);
  if (rxn.find(">>") == std::string_view::npos &&
      std::count(rxn.begin(), rxn.end(), '>') != 2) {
    throw FormatError("reaction SMILES lacks '>>'");
  }
  Reaction r = parse_reaction(rxn, center);
  r.id = std::string(detail::trim(cols[0]));
  if (r.id.empty()) throw FormatError("empty reaction id");
  return r;
}

/// Reads a reaction TSV. Blank lines and lines starting with '#' are
/// skipped. Malformed lines are collected in `errors`, or thrown as
/// FormatError naming the line when `strict`.
inline LoadResult load_reactions(const std::string &path, bool strict = false) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read reaction file '" + path + "'");
  LoadResult out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      Reaction r = parse_reaction_line(line);
      r.line = lineno;
      out.reactions.push_back(std::move(r));
    } catch (const Error &e) {
      if (strict) throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
      out.errors.push_back({lineno, e.what()});
    }
  }
  return out;
}

/// Splits the product at the center bond. Synthon 1 holds the atom mapped
/// `center.first`; each synthon marks its former bond endpoint. Throws
/// InvalidOperation for an absent or ring bond.
inline std::pair<MolGraph, MolGraph> split_product(const MolGraph &product, std::pair<int, int> center) {
  const auto a = product.find_atom_map(center.first);
  const auto b = product.find_atom_map(center.second);
  if (!a || !b) throw InvalidOperation("reaction center atom not found in the product");
  const auto bond = product.bond_between(*a, *b);
  if (!bond) throw InvalidOperation("reaction center is not a product bond");
  if (ring_bonds(product)[*bond]) throw InvalidOperation("reaction center is a ring bond");

  MolGraph cut;
  for (const Atom &at : product.atoms()) cut.add_atom(at);
  for (int i = 0; i < product.num_bonds(); ++i) {
    if (i == *bond) continue;
    const Bond &bd = product.bond(i);
    cut.add_bond(bd.begin, bd.end, bd.order);
  }
  for (int e : {*a, *b}) {
    // A donor atom ([n] of an N-substituted pyrrole) stays a donor: it gains
    // a hydrogen rather than a pi bond.
    if (product.atom(e).aromatic && !detail::spends_pi_unit(product, e) &&
        detail::spends_pi_unit(cut, e)) {
      cut.atom(e).lone_pair = true;
    }
  }
  const auto comp = connected_components(cut);
  std::pair<MolGraph, MolGraph> out;
  MolGraph *parts[2] = {&out.first, &out.second};
  const int ends[2] = {*a, *b};
  for (int s = 0; s < 2; ++s) {
    std::vector<bool> keep(cut.num_atoms());
    for (int i = 0; i < cut.num_atoms(); ++i) keep[i] = comp[i] == comp[ends[s]];
    std::vector<int> old_to_new;
    *parts[s] = induced_subgraph(cut, keep, &old_to_new);
    parts[s]->clear_marks();
    parts[s]->mark(old_to_new[ends[s]]);
  }
  return out;
}

/// Initial state and ground truth for a reaction. The reactant holding the
/// center atom of synthon 1 becomes reactant 1.
inline Task make_task(const Environment &env, const Reaction &r,
                      std::optional<int> step_limit = std::nullopt) {
  if (r.reactants.size() != 2) throw InvalidOperation("reaction " + r.id + " does not have two reactants");
  auto [s1, s2] = split_product(r.product, r.center);
  int first = -1;
  for (int i = 0; i < 2; ++i) {
    if (r.reactants[i].find_atom_map(r.center.first)) first = i;
  }
  if (first < 0 || !r.reactants[1 - first].find_atom_map(r.center.second)) {
    throw InvalidOperation("reaction " + r.id + ": center atoms are not split across the reactants");
  }
  Task t;
  t.id = r.id;
  t.initial = env.init_state(std::move(s1), std::move(s2), r.product, step_limit);
  t.truth = ReactantPair{{make_mol(r.reactants[first]), make_mol(r.reactants[1 - first])}};
  return t;
}

struct FilterResult {
  std::vector<Reaction> kept;
  std::vector<std::pair<std::string, std::string>> dropped;  // id, reason
};

/// Keeps reactions with exactly two reactants whose synthons each grow into
/// their reactant with at most `step_limit` atom additions.
inline FilterResult filter_reactions_report(const std::vector<Reaction> &reactions,
                                            int step_limit = kDefaultStepLimit) {
  FilterResult out;
  for (const Reaction &r : reactions) {
    try {
      if (r.reactants.size() != 2) {
        throw InvalidOperation(std::to_string(r.reactants.size()) + " reactants");
      }
      auto [s1, s2] = split_product(r.product, r.center);
      const int first = r.reactants[0].find_atom_map(r.center.first) ? 0 : 1;
      const auto p1 = plan_completion(s1, r.reactants[first]);
      const auto p2 = plan_completion(s2, r.reactants[1 - first]);
      if (static_cast<int>(std::max(p1.size(), p2.size())) > step_limit) {
        throw InvalidOperation("needs more than " + std::to_string(step_limit) + " additions");
      }
      out.kept.push_back(r);
    } catch (const Error &e) {
      out.dropped.emplace_back(r.id, e.what());
    }
  }
  return out;
}

inline std::vector<Reaction> filter_reactions(const std::vector<Reaction> &reactions,
                                              int step_limit = kDefaultStepLimit) {
  return filter_reactions_report(reactions, step_limit).kept;
}

/// Mapped reaction SMILES of a record, reactants joined by '.'.
inline std::string reaction_smiles(const Reaction &r) {
  std::string s;
  for (const auto &m : r.reactants) s += (s.empty() ? "" : ".") + write_smiles(m, {true, true});
  return s + ">>" + write_smiles(r.product, {true, true});
}

/// Writes records in the TSV layout read by load_reactions.
inline void save_reactions(const std::string &path, const std::vector<Reaction> &reactions) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  for (const auto &r : reactions) {
    out << r.id << '\t' << reaction_smiles(r) << '\t' << r.center.first << ':' << r.center.second << '\n';
  }
  if (!out) throw FormatError("write to '" + path + "' failed");
}

/// Bond types of every reactant and product of a corpus.
inline BondTypeTable bond_type_table(const std::vector<Reaction> &reactions) {
  std::vector<MolGraph> mols;
  for (const auto &r : reactions) {
    mols.insert(mols.end(), r.reactants.begin(), r.reactants.end());
    mols.push_back(r.product);
  }
  return bond_type_table(mols);
}

}  // namespace synco
