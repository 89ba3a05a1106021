#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string_view>

namespace synco {

// Elements the toolkit understands. Enumerator order is the action
// vocabulary order (H excluded from actions).
enum class Element : std::uint8_t { B, C, N, O, F, Si, P, S, Cl, Se, Br, I, H };

inline constexpr int kNumElements = 13;

struct ElementInfo {
  std::string_view symbol;
  int atomic_number;
  std::array<int, 3> valences;  // ascending, 0-padded
  bool organic_subset;          // may be written without brackets
  bool aromatic_allowed;        // has a lowercase aromatic form
};

inline constexpr std::array<ElementInfo, kNumElements> kElementTable{{
    {"B", 5, {3, 0, 0}, true, true},
    {"C", 6, {4, 0, 0}, true, true},
    {"N", 7, {3, 0, 0}, true, true},
    {"O", 8, {2, 0, 0}, true, true},
    {"F", 9, {1, 0, 0}, true, false},
    {"Si", 14, {4, 0, 0}, false, false},
    {"P", 15, {3, 5, 0}, true, true},
    {"S", 16, {2, 4, 6}, true, true},
    {"Cl", 17, {1, 0, 0}, true, false},
    {"Se", 34, {2, 0, 0}, false, true},
    {"Br", 35, {1, 0, 0}, true, false},
    {"I", 53, {1, 0, 0}, true, false},
    {"H", 1, {1, 0, 0}, false, false},
}};

constexpr const ElementInfo &info(Element e) {
  return kElementTable[static_cast<std::size_t>(e)];
}

constexpr std::string_view symbol(Element e) { return info(e).symbol; }

constexpr int atomic_number(Element e) { return info(e).atomic_number; }

inline std::optional<Element> element_from_symbol(std::string_view sym) {
  for (std::size_t i = 0; i < kElementTable.size(); ++i) {
    if (kElementTable[i].symbol == sym) return static_cast<Element>(i);
  }
  return std::nullopt;
}

// Charge adjustment of the allowed valence:
//   N, O, P, S, Se: +q   (ammonium N+ = 4, alkoxide O- = 1)
//   B:              -q   (borate B- = 4)
//   others:         -|q| (carbocation/carbanion C = 3, chloride Cl- = 0)
constexpr int charge_adjustment(Element e, int charge) {
  switch (e) {
    case Element::N:
    case Element::O:
    case Element::P:
    case Element::S:
    case Element::Se:
      return charge;
    case Element::B:
      return -charge;
    default:
      return charge < 0 ? charge : -charge;
  }
}

/// Allowed valences of an element carrying `charge`, ascending. Unused slots
/// hold -1.
constexpr std::array<int, 3> allowed_valences(Element e, int charge) {
  std::array<int, 3> out{-1, -1, -1};
  const int adj = charge_adjustment(e, charge);
  int n = 0;
  for (int v : info(e).valences) {
    if (v == 0) break;
    const int adjusted = v + adj;
    if (adjusted >= 0) out[n++] = adjusted;
  }
  return out;
}

constexpr int max_valence(Element e, int charge) {
  int best = -1;
  for (int v : allowed_valences(e, charge)) best = v > best ? v : best;
  return best;
}

}  // namespace synco
