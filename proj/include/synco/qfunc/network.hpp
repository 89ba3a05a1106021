#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synco/qfunc/features.hpp"
#include "synco/util/denormal.hpp"
#include "synco/util/error.hpp"

namespace synco {

/// Hidden widths of the production Q-network (input 10241, output 1).
inline const std::vector<int> kDefaultHiddenSizes{4096, 2048, 1024};

enum class Mode { Train, Eval };

/// Fully connected ReLU network with a scalar output and inverted dropout
/// after every hidden activation. Inputs are sparse feature vectors; the
/// first layer is evaluated by accumulating the weight rows of the nonzero
/// inputs, so its cost scales with the number of set fingerprint bits.
template <typename Scalar>
class QNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // fan_in x fan_out
    RowVector bias;
  };

  /// Row-sparse gradient of the first layer plus dense gradients elsewhere.
  struct Gradients {
    std::vector<int> first_rows;  // input indices with nonzero gradient
    Matrix first_values;          // |first_rows| x width of layer 0
    std::vector<Matrix> weight;   // weight[0] unused
    std::vector<RowVector> bias;
  };

  /// Rows evaluated together by predict(). Batches are padded to this size
  /// so a row's score never depends on what else is in the batch.
  static constexpr int kChunkRows = 64;

  QNetwork() = default;

  /// He-uniform weights from `seed`, zero biases. `sizes` lists every layer
  /// width from input to the scalar output.
  QNetwork(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
    validate_sizes();
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double bound = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      Layer layer{Matrix(in, out), RowVector::Zero(out)};
      for (Eigen::Index k = 0; k < layer.weight.size(); ++k) {
        layer.weight.data()[k] = static_cast<Scalar>(dist(rng));
      }
      layers_.push_back(std::move(layer));
    }
  }

  static QNetwork zeros(std::vector<int> sizes) {
    QNetwork net;
    net.sizes_ = std::move(sizes);
    net.validate_sizes();
    for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
      net.layers_.push_back({Matrix::Zero(net.sizes_[l], net.sizes_[l + 1]),
                             RowVector::Zero(net.sizes_[l + 1])});
    }
    return net;
  }

  const std::vector<int> &sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  const std::vector<Layer> &layers() const { return layers_; }
  std::vector<Layer> &layers() { return layers_; }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto &l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Sum of squares of every weight and bias.
  double squared_norm() const {
    double s = 0;
    for (const auto &l : layers_) {
      s += static_cast<double>(l.weight.squaredNorm()) + static_cast<double>(l.bias.squaredNorm());
    }
    return s;
  }

  /// Deterministic evaluation of one input.
  Scalar operator()(const FeatureVector &x) const { return predict(std::span(&x, 1)).front(); }

  /// Eval-mode outputs, one per input.
  std::vector<Scalar> predict(std::span<const FeatureVector> xs) const {
    DenormalGuard guard;
    std::vector<Scalar> out;
    out.reserve(xs.size());
    for (std::size_t begin = 0; begin < xs.size(); begin += kChunkRows) {
      const std::size_t n = std::min<std::size_t>(kChunkRows, xs.size() - begin);
      Matrix a = first_layer(xs.subspan(begin, n), kChunkRows);
      a = a.cwiseMax(Scalar(0));
      for (int l = 1; l < num_layers(); ++l) {
        Matrix z = a * layers_[l].weight;
        z.rowwise() += layers_[l].bias;
        a = l + 1 < num_layers() ? Matrix(z.cwiseMax(Scalar(0))) : std::move(z);
      }
      for (std::size_t r = 0; r < n; ++r) out.push_back(a(static_cast<Eigen::Index>(r), 0));
    }
    return out;
  }

  /// Mean squared error of `xs` against `targets` and its gradient w.r.t.
  /// every parameter (regularizer excluded). Dropout masks are drawn from
  /// `rng` when `mode` is Train and `dropout` > 0.
  Scalar mse_gradient(std::span<const FeatureVector> xs, std::span<const Scalar> targets,
                      Mode mode, double dropout, std::mt19937_64 &rng, Gradients &grad) const {
    DenormalGuard guard;
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
    if (n == 0 || targets.size() != xs.size()) throw InvalidOperation("mse_gradient: bad batch");
    const int L = num_layers();
    const bool drop = mode == Mode::Train && dropout > 0.0;
    if (dropout >= 1.0) throw InvalidOperation("dropout rate must be < 1");
    const Scalar keep_scale = drop ? Scalar(1.0 / (1.0 - dropout)) : Scalar(1);
    const auto threshold = static_cast<std::uint64_t>(dropout * 4294967296.0);

    // activations[l] = input to layer l (l >= 1); gates[l-1] = dA/dZ of hidden layer l-1
    std::vector<Matrix> acts(L);
    std::vector<Matrix> gates(L - 1);
    Matrix z = first_layer(xs, n);
    for (int l = 0; l < L; ++l) {
      if (l > 0) {
        z = acts[l] * layers_[l].weight;
        z.rowwise() += layers_[l].bias;
      }
      if (l + 1 == L) break;
      Matrix gate(z.rows(), z.cols());
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        Scalar g = z.data()[k] > Scalar(0) ? Scalar(1) : Scalar(0);
        if (drop) g = (rng() >> 32) >= threshold ? g * keep_scale : Scalar(0);
        gate.data()[k] = g;
      }
      acts[l + 1] = z.cwiseProduct(gate);
      gates[l] = std::move(gate);
    }
    ColVector out = z.col(0);
    ColVector diff = out;
    for (Eigen::Index r = 0; r < n; ++r) diff[r] -= targets[static_cast<std::size_t>(r)];
    const Scalar loss = diff.squaredNorm() / static_cast<Scalar>(n);

    grad.weight.resize(L);
    grad.bias.resize(L);
    Matrix delta = diff * (Scalar(2) / static_cast<Scalar>(n));  // n x 1
    for (int l = L - 1; l >= 1; --l) {
      grad.weight[l].noalias() = acts[l].transpose() * delta;
      grad.bias[l] = delta.colwise().sum();
      Matrix back = delta * layers_[l].weight.transpose();
      delta = back.cwiseProduct(gates[l - 1]);
    }
    grad.bias[0] = delta.colwise().sum();
    first_layer_gradient(xs, delta, grad);
    return loss;
  }

 private:
  void validate_sizes() const {
    if (sizes_.size() < 2 || sizes_.back() != 1) {
      throw InvalidOperation("network sizes must end with a scalar output");
    }
    for (int s : sizes_) {
      if (s < 1) throw InvalidOperation("layer widths must be positive");
    }
  }

  Matrix first_layer(std::span<const FeatureVector> xs, Eigen::Index rows) const {
    const Layer &l0 = layers_.front();
    Matrix z(rows, l0.weight.cols());
    z.rowwise() = l0.bias;
    for (std::size_t r = 0; r < xs.size(); ++r) {
      const FeatureVector &x = xs[r];
      if (x.dim != input_dim()) {
        throw InvalidOperation("feature dimension " + std::to_string(x.dim) +
                               " does not match network input " + std::to_string(input_dim()));
      }
      auto row = z.row(static_cast<Eigen::Index>(r));
      for (const auto &[idx, v] : x.entries) row += static_cast<Scalar>(v) * l0.weight.row(idx);
    }
    return z;
  }

  void first_layer_gradient(std::span<const FeatureVector> xs, const Matrix &delta,
                            Gradients &grad) const {
    std::vector<int> rows;
    for (const auto &x : xs) {
      for (const auto &e : x.entries) rows.push_back(e.first);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    grad.first_values = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), delta.cols());
    for (std::size_t r = 0; r < xs.size(); ++r) {
      for (const auto &[idx, v] : xs[r].entries) {
        const auto pos = std::lower_bound(rows.begin(), rows.end(), idx) - rows.begin();
        grad.first_values.row(pos) += static_cast<Scalar>(v) * delta.row(static_cast<Eigen::Index>(r));
      }
    }
    grad.first_rows = std::move(rows);
  }

  std::vector<int> sizes_;
  std::vector<Layer> layers_;
};

/// Adam over every parameter of a QNetwork with the L2 term 2*alpha*theta
/// folded into each gradient.
template <typename Scalar>
class Adam {
 public:
  using Net = QNetwork<Scalar>;

  explicit Adam(const Net &net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto &l : net.layers()) {
      m_.push_back({Net::Matrix::Zero(l.weight.rows(), l.weight.cols()),
                    Net::RowVector::Zero(l.bias.size())});
      v_.push_back({Net::Matrix::Zero(l.weight.rows(), l.weight.cols()),
                    Net::RowVector::Zero(l.bias.size())});
    }
  }

  int steps() const { return t_; }

  void step(Net &net, const typename Net::Gradients &g, double alpha) {
    DenormalGuard guard;
    ++t_;
    const Scalar b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    const Scalar step = static_cast<Scalar>(lr_) / c1;
    const Scalar eps = static_cast<Scalar>(eps_);
    const Scalar decay = static_cast<Scalar>(2.0 * alpha);
    const Scalar inv_sqrt_c2 = Scalar(1) / std::sqrt(c2);

    auto update = [&](auto &&w, auto &&m, auto &&v, const auto &data_grad) {
      auto gg = (data_grad.array() + decay * w.array()).eval();
      m.array() = b1 * m.array() + (Scalar(1) - b1) * gg;
      v.array() = b2 * v.array() + (Scalar(1) - b2) * gg.square();
      w.array() -= step * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
    };
    auto update_no_data = [&](auto &&w, auto &&m, auto &&v) {
      auto gg = (decay * w.array()).eval();
      m.array() = b1 * m.array() + (Scalar(1) - b1) * gg;
      v.array() = b2 * v.array() + (Scalar(1) - b2) * gg.square();
      w.array() -= step * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
    };

    auto &layers = net.layers();
    // First layer: rows with data gradient vs rows with only the L2 term.
    {
      auto &w = layers[0].weight;
      std::size_t next = 0;
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        if (next < g.first_rows.size() && g.first_rows[next] == r) {
          update(w.row(r), m_[0].weight.row(r), v_[0].weight.row(r),
                 g.first_values.row(static_cast<Eigen::Index>(next)));
          ++next;
        } else {
          update_no_data(w.row(r), m_[0].weight.row(r), v_[0].weight.row(r));
        }
      }
      update(layers[0].bias, m_[0].bias, v_[0].bias, g.bias[0]);
    }
    for (std::size_t l = 1; l < layers.size(); ++l) {
      update(layers[l].weight, m_[l].weight, v_[l].weight, g.weight[l]);
      update(layers[l].bias, m_[l].bias, v_[l].bias, g.bias[l]);
    }
  }

 private:
  struct Moments {
    typename Net::Matrix weight;
    typename Net::RowVector bias;
  };
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Moments> m_, v_;
};

}  // namespace synco
