// Copyright 2026 The amsghmc Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amsghmc/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "amsghmc/error.hpp"

namespace amsghmc {
namespace {

StrategyNetworks random_nets(std::uint64_t seed, double spread,
                             bool shortcut = false) {
  StrategyNetworks n({"x"}, NetConstants{}, shortcut, seed);
  Stream rng(seed, 77);
  for (double& w : n.weights()) w += spread * rng.normal();
  return n;
}

// Runs K chains for S steps from fixed starts, recording every step.
Segment record_segment(const Target& target, const StrategyNetworks& nets,
                       int K, int S, double eta, std::uint64_t seed) {
  const int D = target.dim();
  const std::vector<int> cats = network_categories(target, nets);
  const std::vector<double> sigma(D, 0.8);
  AmStepParams params;
  params.nets = &nets;
  params.categories = cats;
  params.sigma = sigma;
  params.mu_U = 1.5;
  params.sigma_U = 2.0;
  params.eta = eta;
  Segment seg;
  seg.theta.resize(K);
  seg.U.resize(K);
  seg.grad.resize(K);
  seg.steps.resize(K);
  for (int k = 0; k < K; ++k) {
    ChainState c = initial_chain(target, seed, k);
    Stream rng(seed, 500 + k);
    std::vector<double> tn, pn, noise(D);
    for (int s = 0; s <= S; ++s) {
      seg.theta[k].push_back(c.theta);
      seg.U[k].push_back(c.U);
      seg.grad[k].push_back(c.grad);
      if (s == S) break;
      for (double& v : noise) v = rng.normal();
      seg.steps[k].push_back(
          {c.theta, c.p, c.grad, noise, c.U, sigma, params.mu_U, params.sigma_U});
      am_sghmc_update<double>(nets.weights(), params, c.theta, c.p, c.U,
                              c.grad, noise, tn, pn);
      c.theta = tn;
      c.p = pn;
      refresh(c, target);
    }
  }
  return seg;
}

// Energy term with every sample regenerated from its recorded pre-state.
double regenerated_energy(const Target& target, const StrategyNetworks& nets,
                          const Segment& seg, double eta) {
  const std::vector<int> cats = network_categories(target, nets);
  std::vector<double> tn, pn, grad(target.dim());
  double e = 0.0;
  for (int k = 0; k < seg.chains(); ++k) {
    for (const StepRecord& r : seg.steps[k]) {
      AmStepParams params;
      params.nets = &nets;
      params.categories = cats;
      params.sigma = r.sigma;
      params.mu_U = r.mu_U;
      params.sigma_U = r.sigma_U;
      params.eta = eta;
      am_sghmc_update<double>(nets.weights(), params, r.theta, r.p, r.U,
                              r.grad, r.noise, tn, pn);
      e += target.potential(tn, grad);
    }
  }
  return e / (seg.chains() * seg.samples());
}

TEST(SteinGradient, GaussianScore) {
  const int n = 500, D = 5;
  Stream rng(1, 0);
  Eigen::MatrixXd x(n, D);
  for (int a = 0; a < n; ++a) {
    for (int i = 0; i < D; ++i) x(a, i) = rng.normal();
  }
  const SteinResult r = stein_gradient(x);
  for (int i = 0; i < D; ++i) {
    const double rmse = std::sqrt((r.scores.col(i) + x.col(i)).squaredNorm() / n);
    EXPECT_LE(rmse, 0.3) << "dimension " << i;
  }
}

TEST(SteinGradient, OneDimensionalSlope) {
  const double mu = 2.0, sigma = 0.5;
  const int n = 400;
  Stream rng(2, 0);
  Eigen::MatrixXd x(n, 1);
  for (int a = 0; a < n; ++a) x(a, 0) = mu + sigma * rng.normal();
  const SteinResult r = stein_gradient(x);
  const double mx = x.col(0).mean(), ms = r.scores.col(0).mean();
  double sxy = 0.0, sxx = 0.0;
  for (int a = 0; a < n; ++a) {
    sxy += (x(a, 0) - mx) * (r.scores(a, 0) - ms);
    sxx += (x(a, 0) - mx) * (x(a, 0) - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_NEAR(slope, -1.0 / (sigma * sigma), 0.15 / (sigma * sigma));
}

TEST(SteinGradient, TranslationEquivariant) {
  Stream rng(3, 0);
  Eigen::MatrixXd x(60, 3);
  for (int a = 0; a < 60; ++a) {
    for (int i = 0; i < 3; ++i) x(a, i) = rng.normal();
  }
  Eigen::MatrixXd y = x;
  y.rowwise() += Eigen::RowVector3d(5.0, -3.0, 0.25);
  const SteinResult a = stein_gradient(x), b = stein_gradient(y);
  EXPECT_LE((a.scores - b.scores).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SteinGradient, DuplicatesRaiseNoError) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 1, 2, 1, 2, 3, 0;
  const SteinResult r = stein_gradient(x);
  EXPECT_TRUE(r.scores.allFinite());
  EXPECT_THROW(stein_gradient(Eigen::MatrixXd(1, 2)), PreconditionError);
}

TEST(Adam, ZeroGradientLeavesWeights) {
  Adam adam(3, 0.01, 0.5, 0.75);
  std::vector<double> w{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  adam.step(w, g);
  EXPECT_EQ(w, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstAndSecondSteps) {
  Adam adam(2, 0.01, 0.5, 0.75);
  std::vector<double> w{0.0, 0.0};
  const std::vector<double> g{3.0, -0.2};
  adam.step(w, g);
  // Bias-corrected m / sqrt(v) is sign(g) |g| / (|g| + eps) on step one.
  EXPECT_NEAR(w[0], -0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w[1], 0.01 * 0.2 / (0.2 + 1e-8), 1e-15);
  const std::vector<double> w1 = w;
  adam.step(w, g);
  EXPECT_LE(std::abs(w[0] - w1[0]), std::abs(w1[0]) + 1e-12);
  EXPECT_LE(std::abs(w[1] - w1[1]), std::abs(w1[1]) + 1e-12);
}

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer buf(3);
  for (int k = 0; k < 5; ++k) buf.push({double(k)}, {0.0});
  EXPECT_EQ(buf.size(), 3u);
  Stream rng(4, 0);
  std::vector<int> seen(5, 0);
  for (int t = 0; t < 300; ++t) ++seen[static_cast<int>(buf.draw(rng).theta[0])];
  EXPECT_EQ(seen[0] + seen[1], 0);
  for (int k = 2; k < 5; ++k) EXPECT_GT(seen[k], 60);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
}

TEST(TrainingLoss, SmallestInstance) {
  Segment seg;
  seg.theta = {{{0.0, 1.0}, {0.5, -1.0}}};
  seg.U = {{2.0, 3.5}};
  seg.grad = {{{0.1, 0.2}, {0.7, -0.3}}};
  const LossTerms loss = training_loss(seg, 0);
  EXPECT_EQ(loss.energy, 3.5);
  // Diagonal Silverman KDE of {theta_0, theta_1} at theta_1.
  const double f = std::pow(4.0 / 4.0, 2.0 / 6.0) * std::pow(2.0, -2.0 / 6.0);
  const double h0 = f * 0.125, h1 = f * 2.0;
  const double q0 = 0.25 / h0 + 4.0 / h1;
  const double dens = (1.0 + std::exp(-0.5 * q0)) / 2.0 /
                      (2.0 * std::numbers::pi * std::sqrt(h0 * h1));
  EXPECT_NEAR(loss.entropy, std::log(dens), 1e-12);
  EXPECT_NEAR(loss.total(), 3.5 + std::log(dens), 1e-12);
  ASSERT_EQ(loss.seeds.size(), 1u);
  EXPECT_TRUE(std::isfinite(loss.seeds[0][0][0]));
}

TEST(TrainingLoss, RejectsTooFewEntropyTerms) {
  Segment seg;
  seg.theta = {{{0.0}, {1.0}}};
  seg.U = {{0.0, 1.0}};
  seg.grad = {{{0.0}, {1.0}}};
  EXPECT_THROW(training_loss(seg, 1), ConfigError);
}

TEST(TrainingLoss, EarlierTermsIgnoreLaterSamples) {
  QuarticTarget target(2);
  StrategyNetworks nets = random_nets(5, 0.2);
  const Segment longer = record_segment(target, nets, 3, 6, 0.005, 9);
  Segment shorter = longer;
  for (int k = 0; k < 3; ++k) {
    shorter.theta[k].resize(5);
    shorter.U[k].resize(5);
    shorter.grad[k].resize(5);
    shorter.steps[k].resize(4);
  }
  const int M = 1;
  const LossTerms a = training_loss(shorter, M), b = training_loss(longer, M);
  // Entropy seeds rescaled to per-term units agree for s <= 4.
  for (int k = 0; k < 3; ++k) {
    for (int s = M + 1; s <= 4; ++s) {
      for (int i = 0; i < 2; ++i) {
        const double ea = (a.seeds[k][s - 1][i] -
                           shorter.grad[k][s][i] / (3.0 * 4)) * 3.0 * (4 - M);
        const double eb = (b.seeds[k][s - 1][i] -
                           longer.grad[k][s][i] / (3.0 * 6)) * 3.0 * (6 - M);
        EXPECT_NEAR(ea, eb, 1e-10);
      }
    }
  }
}

TEST(SegmentGradient, TapeMatchesDoublePath) {
  QuarticTarget target(3);
  StrategyNetworks nets = random_nets(6, 0.3);
  const Segment seg = record_segment(target, nets, 1, 1, 0.005, 2);
  const StepRecord& r = seg.steps[0][0];
  const std::vector<int> cats = network_categories(target, nets);
  AmStepParams params;
  params.nets = &nets;
  params.categories = cats;
  params.sigma = r.sigma;
  params.mu_U = r.mu_U;
  params.sigma_U = r.sigma_U;
  params.eta = 0.005;
  ad::Tape tape;
  const std::vector<ad::Var> w = tape.variables(nets.weights());
  std::vector<ad::Var> tv, pv;
  am_sghmc_update<ad::Var>(w, params, r.theta, r.p, r.U, r.grad, r.noise, tv,
                           pv);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(tv[i].value(), seg.theta[0][1][i]);
}

TEST(SegmentGradient, EnergyTermMatchesFiniteDifferences) {
  QuarticTarget target(3);
  const double eta = 0.005;
  for (bool detach : {false, true}) {
    StrategyNetworks nets = random_nets(7, 0.3);
    const Segment seg = record_segment(target, nets, 2, 4, eta, 3);
    LossTerms energy_only;
    energy_only.seeds.assign(2, std::vector<std::vector<double>>(
                                    4, std::vector<double>(3)));
    for (int k = 0; k < 2; ++k) {
      for (int s = 1; s <= 4; ++s) {
        for (int i = 0; i < 3; ++i) {
          energy_only.seeds[k][s - 1][i] = seg.grad[k][s][i] / 8.0;
        }
      }
    }
    const std::vector<int> cats = network_categories(target, nets);
    const std::vector<double> g =
        segment_gradient(nets, cats, eta, detach, seg, energy_only);
    Stream rng(8, 0);
    for (int t = 0; t < 5; ++t) {
      // Larger gradients give better-conditioned differences.
      std::size_t j = rng.next() % nets.num_weights();
      for (int tries = 0; tries < 50 && std::abs(g[j]) < 1e-6; ++tries) {
        j = rng.next() % nets.num_weights();
      }
      if (detach) continue;  // detached gradients differ from the full ones
      const double h = 1e-5;
      StrategyNetworks up = nets, dn = nets;
      up.weights()[j] += h;
      dn.weights()[j] -= h;
      const double fd = (regenerated_energy(target, up, seg, eta) -
                         regenerated_energy(target, dn, seg, eta)) /
                        (2 * h);
      EXPECT_NEAR(g[j], fd, 1e-3 * std::max(std::abs(fd), 1e-4))
          << "weight " << j;
    }
  }
}

TEST(SegmentGradient, EnergyShiftLeavesGradientUnchanged) {
  QuarticTarget target(2);
  StrategyNetworks nets = random_nets(9, 0.3);
  Segment seg = record_segment(target, nets, 2, 3, 0.005, 4);
  const std::vector<int> cats = network_categories(target, nets);
  const LossTerms loss = training_loss(seg, 0);
  const std::vector<double> a =
      segment_gradient(nets, cats, 0.005, false, seg, loss);
  const double c = 64.0;
  for (auto& chain : seg.steps) {
    for (StepRecord& r : chain) {
      r.U += c;
      r.mu_U += c;
    }
  }
  for (auto& chain : seg.U) {
    for (double& u : chain) u += c;
  }
  const LossTerms shifted = training_loss(seg, 0);
  EXPECT_NEAR(shifted.energy, loss.energy + c, 1e-12);
  const std::vector<double> b =
      segment_gradient(nets, cats, 0.005, false, seg, shifted);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_NEAR(a[j], b[j], 1e-12 * std::max(1.0, std::abs(a[j])));
  }
}

TrainingConfig smoke_config() {
  TrainingConfig cfg;
  cfg.chains = 8;
  cfg.epochs = 2;
  cfg.sub_epochs = 3;
  cfg.steps_per_sub_epoch = 12;
  cfg.segment_length = 6;
  cfg.loss_chains = 4;
  cfg.skipped = 2;
  cfg.eta = 0.005;
  cfg.adapt_epochs = 1;
  cfg.adapt_last_sub_epochs = 2;
  cfg.seed = 11;
  return cfg;
}

TEST(Train, SmokeRunGivesLoadableCheckpoint) {
  QuarticTarget target(3);
  StrategyNetworks nets = random_nets(10, 0.1, true);
  const TrainingConfig cfg = smoke_config();
  int calls = 0;
  TrainingResult r = train(target, nets, cfg, [&](const SubEpochLog&) { ++calls; });
  EXPECT_EQ(calls, 6);
  ASSERT_EQ(r.log.size(), 6u);
  for (const SubEpochLog& e : r.log) {
    EXPECT_TRUE(std::isfinite(e.loss_energy));
    EXPECT_TRUE(std::isfinite(e.grad_norm));
  }
  EXPECT_TRUE(r.nets.frozen_stats().valid);
  EXPECT_TRUE(r.nets.shortcut_frozen());
  EXPECT_TRUE(r.nets.rbf_initialized());
  EXPECT_NE(r.nets.weights(), nets.weights());

  const auto dir = std::filesystem::temp_directory_path() / "amsghmc_train";
  std::filesystem::create_directories(dir);
  r.nets.save((dir / "nets.json").string());
  write_training_log(r.log, (dir / "log.csv").string());
  StrategyNetworks back = StrategyNetworks::load((dir / "nets.json").string());
  std::filesystem::remove_all(dir);
  for (int k = 0; k < 20; ++k) {
    const double u = 0.1 * k - 1.0, p = 0.3 * k - 2.0, g = 5.0 - k;
    const StrategyValues a = r.nets.forward(u, p, g, 0, 0.9);
    const StrategyValues b = back.forward(u, p, g, 0, 0.9);
    EXPECT_NEAR(a.G, b.G, 1e-12);
    EXPECT_NEAR(a.C, b.C, 1e-12);
  }
}

TEST(Train, Deterministic) {
  QuarticTarget target(2);
  const TrainingConfig cfg = smoke_config();
  TrainingResult a = train(target, random_nets(12, 0.1), cfg);
  TrainingResult b = train(target, random_nets(12, 0.1), cfg);
  EXPECT_EQ(a.nets.weights(), b.nets.weights());
}

TEST(Train, ShortcutUntouchedOutsideWindow) {
  QuarticTarget target(2);
  StrategyNetworks nets = random_nets(13, 0.1, true);
  TrainingConfig cfg = smoke_config();
  cfg.adapt_epochs = 0;
  TrainingResult r = train(target, nets, cfg);
  for (std::size_t k = 0; k < nets.num_weights(); ++k) {
    if (nets.is_shortcut_weight(k)) {
      EXPECT_EQ(r.nets.weights()[k], nets.weights()[k]);
    }
  }
}

TEST(TrainingConfig, Validation) {
  TrainingConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.skipped = 15;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.loss_chains = 65;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.thin = 4;
  cfg.skipped = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace amsghmc
