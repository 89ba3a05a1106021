#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synco/chem.hpp"
#include "synco/qfunc/features.hpp"
#include "synco/qfunc/network.hpp"
#include "synco/qfunc/trainer.hpp"
#include "../support/reference_net.hpp"

using namespace synco;

namespace {

using synco::testing::DNet;
using synco::testing::random_sparse;
using synco::testing::reference_forward;
using synco::testing::reference_loss;

MolGraph marked(const std::string &smi, int m) {
  MolGraph g = parse_smiles(smi);
  g.mark(m);
  return g;
}

Episode episode_with_reward(int reward) {
  Environment env;
  const State s = env.init_state(marked("CC", 0), marked("N", 0), parse_smiles("CCN"));
  return env.replay(s, {{Action::add(Element::Cl, BondOrder::Single, 0), Action::noop()}}, reward);
}

}  // namespace

TEST(Features, LayoutMatchesBlocks) {
  Environment env;
  const State s = env.init_state(marked("CC", 0), marked("OC", 0), parse_smiles("CCOC"));
  const auto next1 = env.successor(s.currents[0], Action::add(Element::Br, BondOrder::Single, 0));
  const FeatureVector f1 = features_of(s, *next1, *s.currents[1], Agent::One);
  const FeatureVector f2 = features_of(s, *next1, *s.currents[1], Agent::Two);
  EXPECT_EQ(f1.dim, 5 * 2048 + 1);
  EXPECT_EQ(kFeatureDim, 10241);
  const Eigen::VectorXf d1 = f1.to_dense(), d2 = f2.to_dense();
  auto block = [](const Eigen::VectorXf &v, int b) { return v.segment(b * kFingerprintBits, kFingerprintBits); };
  auto fp = [](const BitFingerprint &fp) {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(kFingerprintBits);
    for (int b : fp.on_bits()) v[b] = 1;
    return v;
  };
  EXPECT_EQ(block(d1, 0), fp(s.currents[0]->fingerprint));
  EXPECT_EQ(block(d1, 1), fp(s.currents[1]->fingerprint));
  EXPECT_EQ(block(d1, 2), fp(next1->fingerprint));
  EXPECT_EQ(block(d1, 3), fp(s.currents[1]->fingerprint));
  EXPECT_EQ(block(d1, 4), fp(s.product->fingerprint));
  EXPECT_EQ(d1[kFeatureDim - 1], 2.0f);
  // Agent two sees itself first.
  EXPECT_EQ(block(d2, 0), block(d1, 1));
  EXPECT_EQ(block(d2, 2), block(d1, 3));
  EXPECT_EQ(block(d2, 3), block(d1, 2));
  EXPECT_EQ(FeatureVector::from_dense(d1), f1);
}

TEST(Features, LastStepHasZeroRemaining) {
  Environment env(std::nullopt, 1);
  const State s = env.init_state(marked("CC", 0), marked("N", 0), parse_smiles("CCN"));
  const FeatureVector f = features_of(s, *s.currents[0], *s.currents[1], Agent::One);
  EXPECT_EQ(f.to_dense()[kFeatureDim - 1], 0.0f);
}

TEST(Sarsa, TargetsDiscountBackwards) {
  const auto q = sarsa_targets(episode_with_reward(1), 0.95);
  ASSERT_EQ(q.size(), 3u);
  EXPECT_EQ(q[2], 1.0);
  EXPECT_EQ(q[1], 0.95);
  EXPECT_EQ(q[0], 0.95 * 0.95);
  const auto z = sarsa_targets(episode_with_reward(0), 0.9);
  for (double v : z) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(sarsa_targets(episode_with_reward(-1), 0.95), InvalidOperation);
  EXPECT_THROW(sarsa_targets(episode_with_reward(1), 1.0), InvalidOperation);
}

TEST(Sarsa, SamplesCoverBothAgentsPerStep) {
  const Episode ep = episode_with_reward(1);
  const auto samples = episode_samples(ep, 0.5);
  ASSERT_EQ(samples.size(), 6u);
  EXPECT_FLOAT_EQ(samples[0].target, 0.25f);
  EXPECT_FLOAT_EQ(samples[1].target, 0.25f);
  EXPECT_FLOAT_EQ(samples[5].target, 1.0f);
  EXPECT_EQ(samples[0].x, features_of(ep.states[0], *ep.states[1].currents[0], *ep.states[1].currents[1], Agent::One));
  EXPECT_EQ(samples[1].x, features_of(ep.states[0], *ep.states[1].currents[0], *ep.states[1].currents[1], Agent::Two));
}

TEST(Network, PredictMatchesReference) {
  std::mt19937_64 rng(5);
  const DNet net({12, 8, 4, 2, 1}, 17);
  for (int k = 0; k < 20; ++k) {
    const FeatureVector x = random_sparse(12, rng);
    EXPECT_NEAR(net(x), reference_forward(net, x), 1e-12);
  }
}

TEST(Network, BatchCompositionDoesNotChangeScores) {
  std::mt19937_64 rng(9);
  const QNet net({40, 16, 8, 4, 1}, 3);
  std::vector<FeatureVector> xs;
  for (int k = 0; k < 150; ++k) xs.push_back(random_sparse(40, rng));
  const auto all = net.predict(xs);
  for (int k : {0, 63, 64, 100, 149}) EXPECT_EQ(net(xs[k]), all[k]);
  const auto tail = net.predict(std::span(xs).subspan(70));
  for (std::size_t k = 0; k < tail.size(); ++k) EXPECT_EQ(tail[k], all[70 + k]);
}

TEST(Network, SeedDeterminesWeights) {
  const QNet a({20, 8, 1}, 4), b({20, 8, 1}, 4), c({20, 8, 1}, 5);
  EXPECT_EQ(a.layers()[0].weight, b.layers()[0].weight);
  EXPECT_NE(a.layers()[0].weight, c.layers()[0].weight);
  EXPECT_THROW(QNet({20, 8, 2}, 1), InvalidOperation);
  EXPECT_EQ(QNet::zeros({5, 3, 1}).num_parameters(), 5u * 3 + 3 + 3 + 1);
}

TEST(Network, RejectsWrongFeatureDimension) {
  const QNet net({20, 8, 1}, 4);
  FeatureVector f;
  f.dim = 21;
  EXPECT_THROW(net(f), InvalidOperation);
}

TEST(Network, TrainModeWithoutDropoutEqualsEval) {
  std::mt19937_64 rng(2), drop_rng(1);
  const DNet net({10, 6, 4, 1}, 8);
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int k = 0; k < 7; ++k) {
    xs.push_back(random_sparse(10, rng));
    ys.push_back(0.3 * k);
  }
  DNet::Gradients g1, g2;
  const double a = net.mse_gradient(xs, ys, Mode::Train, 0.0, drop_rng, g1);
  const double b = net.mse_gradient(xs, ys, Mode::Eval, 0.7, drop_rng, g2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(g1.weight[1], g2.weight[1]);
  EXPECT_NEAR(a, reference_loss(net, xs, ys, 0.0), 1e-12);
}

TEST(Network, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const double alpha = 1e-3;
  for (int inst = 0; inst < 5; ++inst) {
    DNet net({9, 8, 4, 2, 1}, 100 + inst);
    std::vector<FeatureVector> xs;
    std::vector<double> ys;
    for (int k = 0; k < 6; ++k) {
      xs.push_back(random_sparse(9, rng));
      ys.push_back(std::uniform_real_distribution<double>(-1, 1)(rng));
    }
    synco::testing::randomize_biases(net, rng);
    EXPECT_LT(synco::testing::max_gradient_error(net, xs, ys, alpha), 1e-4) << "instance " << inst;
  }
}

TEST(Adam, FirstStepMovesBySignTimesLearningRate) {
  DNet net = DNet::zeros({3, 2, 1});
  net.layers()[1].weight << 1.0, -2.0;
  Adam<double> opt(net, 0.01);
  DNet::Gradients g;
  g.first_rows = {};
  g.first_values = DNet::Matrix::Zero(0, 2);
  g.weight = {DNet::Matrix(), DNet::Matrix(2, 1)};
  g.weight[1] << 0.5, -4.0;
  g.bias = {DNet::RowVector::Zero(2), DNet::RowVector::Zero(1)};
  opt.step(net, g, 0.0);
  EXPECT_NEAR(net.layers()[1].weight(0, 0), 1.0 - 0.01, 1e-7);
  EXPECT_NEAR(net.layers()[1].weight(1, 0), -2.0 + 0.01, 1e-7);
  EXPECT_EQ(net.layers()[0].weight(0, 0), 0.0);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Trainer, LossAddsRegularizer) {
  const Episode ep = episode_with_reward(1);
  QParams p;
  p.network = QNet::zeros({kFeatureDim, 4, 1});
  p.network.layers()[1].bias << 0.5f;
  p.alpha = 0.1;
  const auto samples = episode_samples(ep, p.gamma);
  double se = 0;
  for (const auto &s : samples) se += (0.5 - s.target) * (0.5 - s.target);
  EXPECT_NEAR(loss(p, samples), se / 6 + 0.1 * 0.25, 1e-6);
}

TEST(Trainer, OverfitsTenEpisodes) {
  Environment env;
  std::vector<Episode> eps;
  const char *elems[] = {"Cl", "Br", "I", "F", "O"};
  for (int k = 0; k < 10; ++k) {
    const std::string a = k < 5 ? "CC" : "CCC";
    const State s = env.init_state(marked(a, 0), marked("N", 0), parse_smiles(a + "N"));
    const Element e = *element_from_symbol(elems[k % 5]);
    eps.push_back(env.replay(s, {{Action::add(e, BondOrder::Single, 0), Action::noop()}}, k % 2));
  }
  QParams p = QParams::create(3, {64, 32, 16});
  p.dropout = 0.0;
  p.learning_rate = 1e-3;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 1;
  const auto res = train(eps, cfg, p);
  std::vector<Sample> all;
  for (const auto &e : eps) {
    auto s = episode_samples(e, p.gamma);
    all.insert(all.end(), s.begin(), s.end());
  }
  EXPECT_LT(loss(res.params.network, all, 0.0), 1e-3);
  EXPECT_EQ(res.epoch_losses.size(), 200u);
}

TEST(Trainer, DeterministicGivenSeed) {
  const std::vector<Episode> eps{episode_with_reward(1), episode_with_reward(0)};
  const QParams p = QParams::create(7, {16, 8, 4});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 11;
  const auto a = train(eps, cfg, p), b = train(eps, cfg, p);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.params.network.layers()[0].weight, b.params.network.layers()[0].weight);
  cfg.seed = 12;
  const auto c = train(eps, cfg, p);
  EXPECT_NE(a.params.network.layers()[1].weight, c.params.network.layers()[1].weight);
  EXPECT_THROW(train({}, cfg, p), InvalidOperation);
}
