#pragma once

#include <algorithm>
#include <bit>
#include <string>
#include <string_view>
#include <cstdint>
#include <vector>

#include "synco/chem/mol_graph.hpp"
#include "synco/util/error.hpp"

namespace synco {

inline constexpr int kFingerprintBits = 2048;
inline constexpr int kFingerprintRadius = 2;

/// Fixed-length bit vector. Morgan fingerprints are always 2048 bits; other
/// lengths exist for tests and ad-hoc similarity work.
class BitFingerprint {
 public:
  explicit BitFingerprint(int nbits = kFingerprintBits)
      : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

  static BitFingerprint from_string(std::string_view bits) {
    BitFingerprint fp(static_cast<int>(bits.size()));
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == '1') fp.set(static_cast<int>(i));
    }
    return fp;
  }

  int size() const { return nbits_; }
  void set(int i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  bool test(int i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  int count() const {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }
  const std::vector<std::uint64_t> &words() const { return words_; }

  /// Indices of set bits, ascending.
  std::vector<int> on_bits() const {
    std::vector<int> out;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t v = words_[w];
      while (v) {
        out.push_back(static_cast<int>(w * 64) + std::countr_zero(v));
        v &= v - 1;
      }
    }
    return out;
  }

  friend bool operator==(const BitFingerprint &, const BitFingerprint &) = default;

 private:
  int nbits_;
  std::vector<std::uint64_t> words_;
};

/// |a AND b| / |a OR b|; 1.0 when both are empty.
inline double tanimoto(const BitFingerprint &a, const BitFingerprint &b) {
  if (a.size() != b.size()) {
    throw InvalidOperation("tanimoto: fingerprint lengths differ (" + std::to_string(a.size()) +
                           " vs " + std::to_string(b.size()) + ")");
  }
  int inter = 0, uni = 0;
  for (std::size_t w = 0; w < a.words().size(); ++w) {
    inter += std::popcount(a.words()[w] & b.words()[w]);
    uni += std::popcount(a.words()[w] | b.words()[w]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

namespace detail {

// splitmix64 finaliser
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (mix64(v + 0x9e3779b97f4a7c15ULL) + (seed << 6) + (seed >> 2)));
}

}  // namespace detail

/// ECFP-style circular fingerprint (radius 2, 2048 bits, no chirality).
///
/// Radius-0 atom identifiers hash (atomic number, degree, total bond order,
/// formal charge, implicit hydrogens, ring membership). Each further round
/// hashes the previous identifier with the round number and the sorted list
/// of (bond order, neighbour identifier) pairs. Every identifier of every
/// round sets bit `id % 2048`. Not bit-compatible with other toolkits.
inline BitFingerprint morgan_fingerprint(const MolGraph &mol) {
  const int n = mol.num_atoms();
  BitFingerprint fp(kFingerprintBits);
  const auto in_ring = ring_atoms(mol);
  std::vector<std::uint64_t> ids(n), next(n);
  for (int i = 0; i < n; ++i) {
    const Atom &a = mol.atom(i);
    std::uint64_t h = 0x5eed;
    h = detail::hash_combine(h, static_cast<std::uint64_t>(atomic_number(a.element)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(mol.degree(i)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(total_bond_order(mol, i)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 16));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(implicit_hydrogens(mol, i)));
    h = detail::hash_combine(h, in_ring[i] ? 1U : 0U);
    ids[i] = h;
    fp.set(static_cast<int>(h % kFingerprintBits));
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
  for (int round = 1; round <= kFingerprintRadius; ++round) {
    for (int i = 0; i < n; ++i) {
      env.clear();
      for (const auto &nb : mol.neighbors(i)) {
        env.emplace_back(static_cast<std::uint64_t>(mol.bond(nb.bond).order), ids[nb.atom]);
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = detail::hash_combine(ids[i], static_cast<std::uint64_t>(round));
      for (const auto &[order, id] : env) {
        h = detail::hash_combine(h, order);
        h = detail::hash_combine(h, id);
      }
      next[i] = h;
      fp.set(static_cast<int>(h % kFingerprintBits));
    }
    ids.swap(next);
  }
  return fp;
}

}  // namespace synco
