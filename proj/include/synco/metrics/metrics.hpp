#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "synco/chem/fingerprint.hpp"
#include "synco/chem/smiles_parser.hpp"
#include "synco/mdp/environment.hpp"
#include "synco/util/error.hpp"

namespace synco {

struct EvalRow {
  std::vector<std::string> reactants;  // SMILES, one per predicted reactant
  double score = 0;
  int reward = 0;  // 0 or 1
};

struct EvalEntry {
  std::string id;
  std::string product;
  std::vector<EvalRow> rows;  // rank order
};

struct EvalTable {
  std::vector<EvalEntry> entries;
  int n_max = 10;

  void validate() const {
    if (n_max < 1) throw InvalidOperation("evaluation table needs n_max >= 1");
    for (const auto &e : entries) {
      if (static_cast<int>(e.rows.size()) > n_max) {
        throw InvalidOperation("product " + e.id + " has more than n_max rows");
      }
      for (const auto &r : e.rows) {
        if (r.reward != 0 && r.reward != 1) throw InvalidOperation("rewards must be 0 or 1");
      }
    }
  }
};

namespace detail {
inline void check_cutoff(const EvalTable &t, int n) {
  if (n < 1) throw InvalidOperation("metric cutoff N must be >= 1");
  if (n > t.n_max) throw InvalidOperation("metric cutoff N exceeds n_max");
  t.validate();
}

inline int reward_at(const EvalEntry &e, int k) {
  return k < static_cast<int>(e.rows.size()) ? e.rows[k].reward : 0;
}

inline BitFingerprint smiles_fingerprint(const std::string &smi) {
  return morgan_fingerprint(parse_smiles(smi));
}
}  // namespace detail

/// Mean over products of the fraction of reward-1 rows among the top N;
/// missing rows count as reward 0. An empty table scores 0.
inline double map_at_n(const EvalTable &t, int n) {
  detail::check_cutoff(t, n);
  if (t.entries.empty()) return 0.0;
  double total = 0;
  for (const auto &e : t.entries) {
    int hits = 0;
    for (int k = 0; k < n; ++k) hits += detail::reward_at(e, k);
    total += static_cast<double>(hits) / n;
  }
  return total / static_cast<double>(t.entries.size());
}

/// nDCG with gain = reward and discount 1/log2(rank + 1). The ideal ranking
/// sorts the same top-N rewards; products without any reward score 0.
inline double ndcg_at_n(const EvalTable &t, int n) {
  detail::check_cutoff(t, n);
  if (t.entries.empty()) return 0.0;
  double total = 0;
  for (const auto &e : t.entries) {
    std::vector<int> gains(n);
    for (int k = 0; k < n; ++k) gains[k] = detail::reward_at(e, k);
    double dcg = 0;
    for (int k = 0; k < n; ++k) dcg += gains[k] / std::log2(k + 2.0);
    std::sort(gains.begin(), gains.end(), std::greater<>());
    double idcg = 0;
    for (int k = 0; k < n; ++k) idcg += gains[k] / std::log2(k + 2.0);
    if (idcg > 0) total += dcg / idcg;
  }
  return total / static_cast<double>(t.entries.size());
}

/// Similarity of two predicted reactions from reactant fingerprints. Two
/// reactants each: half the best sum over the two pairings. Otherwise the
/// fingerprints of the composite molecules are compared.
inline double pair_similarity(const std::vector<BitFingerprint> &ri,
                              const std::vector<BitFingerprint> &rj,
                              const BitFingerprint &composite_i, const BitFingerprint &composite_j) {
  if (ri.size() == 2 && rj.size() == 2) {
    const double straight = tanimoto(rj[0], ri[0]) + tanimoto(rj[1], ri[1]);
    const double crossed = tanimoto(rj[0], ri[1]) + tanimoto(rj[1], ri[0]);
    return 0.5 * std::max(straight, crossed);
  }
  return tanimoto(composite_j, composite_i);
}

inline double pair_similarity(const ReactantPair &ri, const ReactantPair &rj) {
  const std::vector<BitFingerprint> a{ri.mols[0]->fingerprint, ri.mols[1]->fingerprint};
  const std::vector<BitFingerprint> b{rj.mols[0]->fingerprint, rj.mols[1]->fingerprint};
  return pair_similarity(a, b, BitFingerprint(), BitFingerprint());
}

/// Reactant SMILES variant; throws ParseError on unparsable reactants.
inline double pair_similarity(const std::vector<std::string> &ri, const std::vector<std::string> &rj) {
  auto fps = [](const std::vector<std::string> &r) {
    std::vector<BitFingerprint> out;
    for (const auto &s : r) out.push_back(detail::smiles_fingerprint(s));
    return out;
  };
  auto composite = [](const std::vector<std::string> &r) {
    std::string joined;
    for (const auto &s : r) joined += (joined.empty() ? "" : ".") + s;
    return detail::smiles_fingerprint(joined);
  };
  if (ri.size() == 2 && rj.size() == 2) return pair_similarity(fps(ri), fps(rj), BitFingerprint(), BitFingerprint());
  return pair_similarity({}, {}, composite(ri), composite(rj));
}

/// Mean minimum dissimilarity of each correct prediction to the correct
/// predictions ranked above it, averaged over N times the number of products.
inline double diversity_at_n(const EvalTable &t, int n) {
  detail::check_cutoff(t, n);
  if (t.entries.empty()) return 0.0;
  double total = 0;
  for (const auto &e : t.entries) {
    const int rows = std::min<int>(n, static_cast<int>(e.rows.size()));
    std::vector<int> correct;
    for (int i = 0; i < rows; ++i) {
      if (e.rows[i].reward != 1) continue;
      if (!correct.empty()) {
        double dsim = 1.0;
        for (int j : correct) {
          dsim = std::min(dsim, 1.0 - pair_similarity(e.rows[i].reactants, e.rows[j].reactants));
        }
        total += dsim;
      }
      correct.push_back(i);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(t.entries.size()));
}

/// True iff the row names at least one reactant and every reactant parses
/// under the valence rules.
inline bool row_valid(const EvalRow &row) {
  if (row.reactants.empty()) return false;
  for (const auto &s : row.reactants) {
    if (s.empty()) return false;
    try {
      parse_smiles(s);
    } catch (const ParseError &) {
      return false;
    }
  }
  return true;
}

/// Fraction of the existing top-N rows that are valid; 0 when there are none.
inline double validity_at_n(const EvalTable &t, int n) {
  detail::check_cutoff(t, n);
  int total = 0, valid = 0;
  for (const auto &e : t.entries) {
    const int rows = std::min<int>(n, static_cast<int>(e.rows.size()));
    for (int i = 0; i < rows; ++i) {
      ++total;
      valid += row_valid(e.rows[i]) ? 1 : 0;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(valid) / total;
}

struct MetricReport {
  std::vector<int> cutoffs;
  std::vector<double> map, ndcg, diversity, validity;
};

/// All metrics for N = 1 .. n_max.
inline MetricReport evaluate_table(const EvalTable &t) {
  MetricReport r;
  for (int n = 1; n <= t.n_max; ++n) {
    r.cutoffs.push_back(n);
    r.map.push_back(map_at_n(t, n));
    r.ndcg.push_back(ndcg_at_n(t, n));
    r.diversity.push_back(diversity_at_n(t, n));
    r.validity.push_back(validity_at_n(t, n));
  }
  return r;
}

}  // namespace synco
