#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "synco/chem/fingerprint.hpp"
#include "synco/mdp/environment.hpp"

namespace synco {

/// Layout: m_i | m_j | m_i' | m_j' | p | steps remaining after the action.
inline constexpr int kFeatureBlocks = 5;
inline constexpr int kFeatureDim = kFeatureBlocks * kFingerprintBits + 1;

/// Sparse real vector; fingerprints make the state-action input >98% zeros.
struct FeatureVector {
  int dim = 0;
  std::vector<std::pair<int, float>> entries;  // ascending index, nonzero values

  Eigen::VectorXf to_dense() const {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(dim);
    for (const auto &[i, x] : entries) v[i] = x;
    return v;
  }

  static FeatureVector from_dense(const Eigen::Ref<const Eigen::VectorXf> &v) {
    FeatureVector f;
    f.dim = static_cast<int>(v.size());
    for (int i = 0; i < f.dim; ++i) {
      if (v[i] != 0.0f) f.entries.emplace_back(i, v[i]);
    }
    return f;
  }

  friend bool operator==(const FeatureVector &, const FeatureVector &) = default;
};

namespace detail {
inline void append_bits(FeatureVector &f, const BitFingerprint &fp, int block) {
  for (int b : fp.on_bits()) f.entries.emplace_back(block * kFingerprintBits + b, 1.0f);
}
}  // namespace detail

/// State-action representation from the point of view of `agent`, given the
/// current synthons after the joint action.
inline FeatureVector features_of(const State &s, const Mol &next1, const Mol &next2, Agent agent) {
  const int i = index_of(agent), j = 1 - i;
  const Mol *next[2] = {&next1, &next2};
  FeatureVector f;
  f.dim = kFeatureDim;
  f.entries.reserve(256);
  detail::append_bits(f, s.synthons[i]->fingerprint, 0);
  detail::append_bits(f, s.synthons[j]->fingerprint, 1);
  detail::append_bits(f, next[i]->fingerprint, 2);
  detail::append_bits(f, next[j]->fingerprint, 3);
  detail::append_bits(f, s.product->fingerprint, 4);
  const int remaining = s.steps_left - 1;
  if (remaining != 0) f.entries.emplace_back(kFeatureDim - 1, static_cast<float>(remaining));
  return f;
}

/// Checks feasibility, applies the joint action and featurizes for `agent`.
inline FeatureVector featurize(const Environment &env, const State &s, const Action &a1,
                               const Action &a2, Agent agent) {
  const State next = env.apply_actions(s, a1, a2);
  return features_of(s, *next.currents[0], *next.currents[1], agent);
}

}  // namespace synco
