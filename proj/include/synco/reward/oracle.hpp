#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "synco/chem/smiles_parser.hpp"
#include "synco/chem/smiles_writer.hpp"
#include "synco/mdp/environment.hpp"
#include "synco/util/error.hpp"

namespace synco {

/// Canonical-SMILES multiset equality of two reactant pairs.
inline int exact_match(const ReactantPair &pred, const ReactantPair &truth) {
  return pred.key() == truth.key() ? 1 : 0;
}

/// Client side of the forward-synthesis service. Implementations return the
/// predicted products best-first and throw OracleError on any failure.
class ForwardClient {
 public:
  virtual ~ForwardClient() = default;
  virtual std::vector<std::string> predict(const std::vector<std::string> &reactants, int top_k) = 0;
};

/// 1 iff `product` is among the first `top_k` products the client predicts
/// for the pair. Unparsable product strings never match.
inline int forward_reward(const ReactantPair &pred, const Mol &product, ForwardClient &client,
                          int top_k = 5) {
  const std::vector<std::string> reactants{pred.mols[0]->canonical, pred.mols[1]->canonical};
  const auto ranked = client.predict(reactants, top_k);
  const std::size_t n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_k));
  for (std::size_t i = 0; i < n; ++i) {
    try {
      if (write_canonical_smiles(parse_smiles(ranked[i])) == product.canonical) return 1;
    } catch (const ParseError &) {
    }
  }
  return 0;
}

/// Terminal reward. The oracle is fixed for the duration of a run.
class RewardOracle {
 public:
  enum class Mode { ExactOnly, ExactThenForward };

  RewardOracle() = default;
  RewardOracle(std::shared_ptr<ForwardClient> client, int top_k = 5)
      : mode_(Mode::ExactThenForward), client_(std::move(client)), top_k_(top_k) {
    if (!client_) throw InvalidOperation("forward mode requires a client");
  }

  static RewardOracle exact_only() { return {}; }

  Mode mode() const { return mode_; }
  int top_k() const { return top_k_; }

  int operator()(const State &terminal, const std::optional<ReactantPair> &truth) const {
    if (!terminal.terminal()) throw InvalidOperation("reward requested for a non-terminal state");
    return score(predicted_reactants(terminal), *terminal.product, truth);
  }

  int score(const ReactantPair &pred, const Mol &product,
            const std::optional<ReactantPair> &truth) const {
    if (truth && exact_match(pred, *truth)) return 1;
    if (mode_ == Mode::ExactThenForward) return forward_reward(pred, product, *client_, top_k_);
    return 0;
  }

 private:
  Mode mode_ = Mode::ExactOnly;
  std::shared_ptr<ForwardClient> client_;
  int top_k_ = 5;
};

}  // namespace synco
