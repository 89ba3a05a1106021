#pragma once

// Dense double-precision reference for the Q network, written without the
// library's sparse first layer, plus a finite-difference gradient check.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "synco/qfunc/features.hpp"
#include "synco/qfunc/network.hpp"

namespace synco::testing {

using DNet = QNetwork<double>;

inline FeatureVector random_sparse(int dim, std::mt19937_64 &rng) {
  std::bernoulli_distribution on(0.3);
  std::uniform_real_distribution<double> val(-1.0, 2.0);
  FeatureVector f;
  f.dim = dim;
  for (int i = 0; i < dim; ++i) {
    if (on(rng)) f.entries.emplace_back(i, static_cast<float>(val(rng)));
  }
  return f;
}

inline double reference_forward(const DNet &net, const FeatureVector &x) {
  Eigen::RowVectorXd a = x.to_dense().cast<double>().transpose();
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::RowVectorXd z = a * net.layers()[l].weight + net.layers()[l].bias;
    a = l + 1 < net.num_layers() ? Eigen::RowVectorXd(z.cwiseMax(0.0)) : z;
  }
  return a(0);
}

inline double reference_loss(const DNet &net, const std::vector<FeatureVector> &xs,
                             const std::vector<double> &ys, double alpha) {
  double se = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = reference_forward(net, xs[i]) - ys[i];
    se += d * d;
  }
  return se / static_cast<double>(xs.size()) + alpha * net.squared_norm();
}

/// Zero biases leave units fed by all-zero rows exactly on the ReLU kink,
/// where finite differences see half the slope.
inline void randomize_biases(DNet &net, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto &layer : net.layers()) {
    for (Eigen::Index c = 0; c < layer.bias.size(); ++c) layer.bias(c) = u(rng);
  }
}

/// Largest relative error between the analytic weight gradient of the
/// regularized loss and central differences of reference_loss.
inline double max_gradient_error(DNet &net, const std::vector<FeatureVector> &xs,
                                 const std::vector<double> &ys, double alpha, double h = 1e-6) {
  std::mt19937_64 drop_rng(0);
  DNet::Gradients g;
  net.mse_gradient(xs, ys, Mode::Eval, 0.0, drop_rng, g);
  double worst = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    auto &w = net.layers()[l].weight;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        double analytic = 2 * alpha * w(r, c);
        if (l == 0) {
          const auto it = std::find(g.first_rows.begin(), g.first_rows.end(), static_cast<int>(r));
          if (it != g.first_rows.end()) analytic += g.first_values(it - g.first_rows.begin(), c);
        } else {
          analytic += g.weight[l](r, c);
        }
        const double saved = w(r, c);
        w(r, c) = saved + h;
        const double up = reference_loss(net, xs, ys, alpha);
        w(r, c) = saved - h;
        const double down = reference_loss(net, xs, ys, alpha);
        w(r, c) = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / scale);
      }
    }
    auto &bias = net.layers()[l].bias;
    for (Eigen::Index c = 0; c < bias.size(); ++c) {
      const double analytic = g.bias[l](c) + 2 * alpha * bias(c);
      const double saved = bias(c);
      bias(c) = saved + h;
      const double up = reference_loss(net, xs, ys, alpha);
      bias(c) = saved - h;
      const double down = reference_loss(net, xs, ys, alpha);
      bias(c) = saved;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace synco::testing
