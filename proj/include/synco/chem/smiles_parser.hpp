#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synco/chem/element.hpp"
#include "synco/chem/mol_graph.hpp"
#include "synco/util/error.hpp"

namespace synco {

namespace detail {

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  MolGraph parse() {
    if (text_.empty()) throw ParseError("empty SMILES", 0);
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      switch (c) {
        case '(':
          if (prev_ < 0) fail("branch without a preceding atom");
          if (pending_) fail("bond symbol before branch");
          branches_.push_back({prev_, pos_});
          ++pos_;
          break;
        case ')':
          if (branches_.empty()) fail("unbalanced ')'");
          if (pending_) fail("dangling bond symbol");
          if (prev_ == branches_.back().atom) fail("empty branch");
          prev_ = branches_.back().atom;
          branches_.pop_back();
          ++pos_;
          break;
        case '.':
          if (pending_) fail("bond symbol before '.'");
          if (!branches_.empty()) fail("'.' inside a branch");
          prev_ = -1;
          ++pos_;
          break;
        case '-':
        case '=':
        case '#':
        case ':':
        case '/':
        case '\\':
          if (pending_) fail("consecutive bond symbols");
          if (prev_ < 0) fail("bond symbol without a preceding atom");
          pending_ = bond_from_symbol(c);
          pending_offset_ = pos_;
          ++pos_;
          break;
        case '%':
          ring_closure(parse_percent_ring());
          break;
        case '[':
          add_atom(parse_bracket_atom());
          break;
        default:
          if (std::isdigit(static_cast<unsigned char>(c))) {
            ++pos_;
            ring_closure(c - '0');
          } else if (std::isalpha(static_cast<unsigned char>(c))) {
            add_atom(parse_organic_atom());
          } else {
            fail(std::string("unexpected character '") + c + "'");
          }
      }
    }
    if (pending_) throw ParseError("dangling bond symbol", pending_offset_);
    if (!branches_.empty()) throw ParseError("unbalanced '('", branches_.back().offset);
    if (!rings_.empty()) {
      throw ParseError("unmatched ring closure " + std::to_string(rings_.begin()->first),
                       rings_.begin()->second.offset);
    }
    for (int i = 0; i < mol_.num_atoms(); ++i) {
      if (!valence_ok(mol_, i, bracket_h_[i]) && mol_.atom(i).aromatic && bracket_h_[i] > 0) {
        mol_.atom(i).lone_pair = true;  // pyrrole-type [nH]
      }
      if (!valence_ok(mol_, i, bracket_h_[i])) {
        throw ParseError("valence violation on " + std::string(symbol(mol_.atom(i).element)),
                         offsets_[i]);
      }
    }
    return std::move(mol_);
  }

 private:
  struct ParsedAtom {
    Atom atom;
    int hydrogens = 0;
    std::size_t offset = 0;
  };
  struct BranchPoint {
    int atom;
    std::size_t offset;
  };
  struct OpenRing {
    int atom;
    std::optional<BondOrder> order;
    std::size_t offset;
  };

  [[noreturn]] void fail(const std::string &msg) const { throw ParseError(msg, pos_); }

  static BondOrder bond_from_symbol(char c) {
    switch (c) {
      case '=':
        return BondOrder::Double;
      case '#':
        return BondOrder::Triple;
      case ':':
        return BondOrder::Aromatic;
      default:  // '-', '/', '\': stereo markers are dropped
        return BondOrder::Single;
    }
  }

  BondOrder default_bond(int a, int b) const {
    return mol_.atom(a).aromatic && mol_.atom(b).aromatic ? BondOrder::Aromatic
                                                          : BondOrder::Single;
  }

  void add_atom(const ParsedAtom &p) {
    const int idx = mol_.add_atom(p.atom);
    bracket_h_.push_back(p.hydrogens);
    offsets_.push_back(p.offset);
    if (prev_ >= 0) {
      mol_.add_bond(prev_, idx, pending_.value_or(default_bond(prev_, idx)));
    } else if (pending_) {
      throw ParseError("bond symbol without a preceding atom", pending_offset_);
    }
    pending_.reset();
    prev_ = idx;
  }

  ParsedAtom parse_organic_atom() {
    ParsedAtom p;
    p.offset = pos_;
    const char c = text_[pos_];
    auto two = text_.substr(pos_, 2);
    if (two == "Cl" || two == "Br") {
      p.atom.element = two == "Cl" ? Element::Cl : Element::Br;
      pos_ += 2;
      return p;
    }
    switch (c) {
      case 'B': p.atom.element = Element::B; break;
      case 'C': p.atom.element = Element::C; break;
      case 'N': p.atom.element = Element::N; break;
      case 'O': p.atom.element = Element::O; break;
      case 'P': p.atom.element = Element::P; break;
      case 'S': p.atom.element = Element::S; break;
      case 'F': p.atom.element = Element::F; break;
      case 'I': p.atom.element = Element::I; break;
      case 'b': p.atom.element = Element::B; p.atom.aromatic = true; break;
      case 'c': p.atom.element = Element::C; p.atom.aromatic = true; break;
      case 'n': p.atom.element = Element::N; p.atom.aromatic = true; break;
      case 'o': p.atom.element = Element::O; p.atom.aromatic = true; break;
      case 'p': p.atom.element = Element::P; p.atom.aromatic = true; break;
      case 's': p.atom.element = Element::S; p.atom.aromatic = true; break;
      default:
        fail(std::string("unknown element '") + c + "'");
    }
    ++pos_;
    return p;
  }

  int read_number() {
    int v = 0;
    bool any = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      any = true;
      ++pos_;
      if (v > 1000000) fail("number too large");
    }
    if (!any) fail("expected a number");
    return v;
  }

  bool peek(char c) const { return pos_ < text_.size() && text_[pos_] == c; }

  ParsedAtom parse_bracket_atom() {
    ParsedAtom p;
    p.offset = pos_;
    ++pos_;  // '['
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      fail("isotopes are not supported");
    }
    if (pos_ >= text_.size()) fail("unterminated bracket atom");
    const std::size_t sym_start = pos_;
    const char c = text_[pos_];
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      ++pos_;
      if (pos_ < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_]))) {
        sym += text_[pos_++];
      }
      auto e = element_from_symbol(sym);
      if (!e) throw ParseError("unknown element '" + sym + "'", sym_start);
      p.atom.element = *e;
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym;
      if (text_.substr(pos_, 2) == "se") {
        sym = "Se";
        pos_ += 2;
      } else {
        sym = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        ++pos_;
      }
      auto e = element_from_symbol(sym);
      if (!e || !info(*e).aromatic_allowed) {
        throw ParseError("unknown aromatic element '" + sym + "'", sym_start);
      }
      p.atom.element = *e;
      p.atom.aromatic = true;
    } else {
      fail("expected element symbol");
    }
    // chirality, discarded
    while (peek('@')) ++pos_;
    if (pos_ + 1 < text_.size() && text_[pos_ - 1] == '@') {
      const auto cls = text_.substr(pos_, 2);
      if (cls == "TH" || cls == "AL" || cls == "SP" || cls == "TB" || cls == "OH") {
        pos_ += 2;
        read_number();
      }
    }
    if (peek('H')) {
      ++pos_;
      p.hydrogens = 1;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        p.hydrogens = read_number();
      }
    }
    if (peek('+') || peek('-')) {
      const char sign = text_[pos_++];
      int mag = 1;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        mag = read_number();
      } else {
        while (peek(sign)) {
          ++mag;
          ++pos_;
        }
      }
      p.atom.formal_charge = sign == '+' ? mag : -mag;
    }
    if (peek(':')) {
      ++pos_;
      p.atom.atom_map = read_number();
    }
    if (!peek(']')) fail("expected ']'");
    ++pos_;
    return p;
  }

  int parse_percent_ring() {
    ++pos_;
    if (pos_ + 1 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
        !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      fail("'%' must be followed by two digits");
    }
    const int v = (text_[pos_] - '0') * 10 + (text_[pos_ + 1] - '0');
    pos_ += 2;
    return v;
  }

  void ring_closure(int digit) {
    const std::size_t at = pos_ - 1;
    if (prev_ < 0) throw ParseError("ring closure without a preceding atom", at);
    auto it = rings_.find(digit);
    if (it == rings_.end()) {
      rings_[digit] = {prev_, pending_, at};
      pending_.reset();
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    if (open.atom == prev_ || mol_.bond_between(open.atom, prev_)) {
      throw ParseError("ring closure duplicates an existing bond", at);
    }
    BondOrder order = default_bond(open.atom, prev_);
    if (open.order && pending_ && *open.order != *pending_) {
      throw ParseError("conflicting ring-closure bond symbols", at);
    }
    if (open.order) order = *open.order;
    if (pending_) order = *pending_;
    mol_.add_bond(open.atom, prev_, order);
    pending_.reset();
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  MolGraph mol_;
  std::vector<int> bracket_h_;
  std::vector<std::size_t> offsets_;
  int prev_ = -1;
  std::optional<BondOrder> pending_;
  std::size_t pending_offset_ = 0;
  std::vector<BranchPoint> branches_;
  std::map<int, OpenRing> rings_;
};

}  // namespace detail

/// Parses the supported SMILES subset. Stereo markers are accepted and
/// discarded; bracket hydrogen counts only take part in the valence check.
/// Throws ParseError carrying the offending character offset.
inline MolGraph parse_smiles(std::string_view text) { return detail::SmilesParser(text).parse(); }

}  // namespace synco
