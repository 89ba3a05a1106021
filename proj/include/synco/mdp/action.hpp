#pragma once

#include <array>
#include <compare>
#include <string>

#include "synco/chem/element.hpp"
#include "synco/chem/mol_graph.hpp"

namespace synco {

/// Elements an ADD action may introduce, in vocabulary order.
inline constexpr std::array<Element, 12> kActionElements{
    Element::B, Element::C,  Element::N,  Element::O,  Element::F,  Element::Si,
    Element::P, Element::S,  Element::Cl, Element::Se, Element::Br, Element::I};

inline constexpr std::array<BondOrder, 3> kActionBondOrders{BondOrder::Single, BondOrder::Double,
                                                             BondOrder::Triple};

/// 36 ADD variants + NOOP.
inline constexpr int kVocabularySize = 37;
inline constexpr int kNoopId = 36;

enum class Agent : int { One = 1, Two = 2 };

constexpr int index_of(Agent a) { return static_cast<int>(a) - 1; }
constexpr Agent other(Agent a) { return a == Agent::One ? Agent::Two : Agent::One; }

struct Action {
  enum class Kind : unsigned char { Add, Noop };

  Kind kind = Kind::Noop;
  Element element = Element::C;
  BondOrder order = BondOrder::Single;
  int attach = -1;

  static constexpr Action noop() { return {}; }
  static constexpr Action add(Element e, BondOrder o, int attach_atom) {
    return {Kind::Add, e, o, attach_atom};
  }

  bool is_noop() const { return kind == Kind::Noop; }

  /// Position of (element, bond order) in the 37-entry vocabulary.
  int vocabulary_id() const {
    if (is_noop()) return kNoopId;
    return static_cast<int>(element) * 3 + (static_cast<int>(order) - 1);
  }

  std::string to_string() const {
    if (is_noop()) return "NOOP";
    static constexpr const char *kBond[] = {"", "-", "=", "#"};
    return "ADD(" + std::string(kBond[static_cast<int>(order)]) + std::string(symbol(element)) +
           "@" + std::to_string(attach) + ")";
  }

  friend bool operator==(const Action &a, const Action &b) {
    if (a.is_noop() || b.is_noop()) return a.is_noop() == b.is_noop();
    return a.element == b.element && a.order == b.order && a.attach == b.attach;
  }

  /// Deterministic action order: ADDs by (attach, element, bond order); NOOP last.
  friend bool action_before(const Action &a, const Action &b) {
    if (a.is_noop()) return false;
    if (b.is_noop()) return true;
    if (a.attach != b.attach) return a.attach < b.attach;
    if (a.element != b.element) return a.element < b.element;
    return a.order < b.order;
  }
};

struct JointAction {
  Action first;
  Action second;

  const Action &of(Agent a) const { return a == Agent::One ? first : second; }
  friend bool operator==(const JointAction &, const JointAction &) = default;
};

}  // namespace synco
