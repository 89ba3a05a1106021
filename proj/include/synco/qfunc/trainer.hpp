#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "synco/mdp/environment.hpp"
#include "synco/qfunc/features.hpp"
#include "synco/qfunc/network.hpp"
#include "synco/util/error.hpp"
#include "synco/util/seed.hpp"

namespace synco {

using QNet = QNetwork<float>;

/// Q-network weights plus the hyperparameters they were trained with.
struct QParams {
  QNet network;
  double gamma = 0.95;
  double alpha = 1e-5;
  double learning_rate = 1e-4;
  double dropout = 0.7;
  std::uint64_t seed = 0;

  /// Freshly initialized parameters for the default input layout.
  static QParams create(std::uint64_t seed, const std::vector<int> &hidden = kDefaultHiddenSizes) {
    std::vector<int> sizes{kFeatureDim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    QParams p;
    p.network = QNet(std::move(sizes), derive_seed(seed, "qnet-init"));
    p.seed = seed;
    return p;
  }

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidOperation("gamma must lie in (0, 1)");
    if (!(alpha >= 0.0)) throw InvalidOperation("alpha must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidOperation("dropout must lie in [0, 1)");
  }
};

/// Discounted targets along a complete episode: the last step receives the
/// terminal reward, each earlier step gamma times its successor's target.
inline std::vector<double> sarsa_targets(const Episode &ep, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidOperation("gamma must lie in (0, 1)");
  if (!ep.complete()) throw InvalidOperation("sarsa_targets: episode is incomplete");
  const int T = ep.length();
  std::vector<double> q(T);
  q[T - 1] = static_cast<double>(ep.reward);
  for (int t = T - 2; t >= 0; --t) q[t] = gamma * q[t + 1];
  return q;
}

struct Sample {
  FeatureVector x;
  float target;
};

/// T x 2 training samples of an episode: both agents' views of every step.
inline std::vector<Sample> episode_samples(const Episode &ep, double gamma) {
  const auto q = sarsa_targets(ep, gamma);
  std::vector<Sample> out;
  out.reserve(q.size() * 2);
  for (int t = 0; t < ep.length(); ++t) {
    const State &s = ep.states[t];
    const State &next = ep.states[t + 1];
    for (Agent a : {Agent::One, Agent::Two}) {
      out.push_back({features_of(s, *next.currents[0], *next.currents[1], a),
                     static_cast<float>(q[t])});
    }
  }
  return out;
}

/// Eval-mode mean squared error plus alpha times the squared parameter norm.
inline double loss(const QNet &net, std::span<const Sample> batch, double alpha) {
  if (batch.empty()) throw InvalidOperation("loss: empty batch");
  std::vector<FeatureVector> xs;
  xs.reserve(batch.size());
  for (const auto &s : batch) xs.push_back(s.x);
  const auto pred = net.predict(xs);
  double se = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - batch[i].target;
    se += d * d;
  }
  return se / static_cast<double>(batch.size()) + alpha * net.squared_norm();
}

inline double loss(const QParams &params, std::span<const Sample> batch) {
  return loss(params.network, batch, params.alpha);
}

struct TrainConfig {
  int batch_products = 10;  // episodes per minibatch; each adds T x 2 samples
  int epochs = 10;
  std::uint64_t seed = 0;
  std::function<void(int epoch, double loss)> on_epoch;
};

struct TrainResult {
  QParams params;
  std::vector<double> epoch_losses;  // mean minibatch train-mode loss per epoch
};

/// Minimizes the regularized squared error over the SARSA targets of
/// `episodes` with Adam. Fully determined by cfg.seed and the inputs.
inline TrainResult train(std::span<const Episode> episodes, const TrainConfig &cfg, QParams params) {
  if (episodes.empty()) throw InvalidOperation("train: no episodes");
  if (cfg.batch_products < 1 || cfg.epochs < 0) throw InvalidOperation("train: bad configuration");
  params.validate();
  std::vector<std::vector<Sample>> per_episode;
  per_episode.reserve(episodes.size());
  for (const auto &ep : episodes) per_episode.push_back(episode_samples(ep, params.gamma));

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "train-shuffle"));
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "train-dropout"));
  Adam<float> opt(params.network, params.learning_rate);
  QNet::Gradients grad;
  std::vector<std::size_t> order(per_episode.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<FeatureVector> xs;
  std::vector<float> ys;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_products) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_products);
      xs.clear();
      ys.clear();
      for (std::size_t k = begin; k < end; ++k) {
        for (const auto &s : per_episode[order[k]]) {
          xs.push_back(s.x);
          ys.push_back(s.target);
        }
      }
      const float mse = params.network.mse_gradient(xs, ys, Mode::Train, params.dropout,
                                                    dropout_rng, grad);
      total += mse;
      ++batches;
      opt.step(params.network, grad, params.alpha);
    }
    const double epoch_loss = total / batches + params.alpha * params.network.squared_norm();
    result.epoch_losses.push_back(epoch_loss);
    if (cfg.on_epoch) cfg.on_epoch(epoch, epoch_loss);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace synco
