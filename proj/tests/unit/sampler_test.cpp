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

#include "amsghmc/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "amsghmc/error.hpp"

namespace amsghmc {
namespace {

class FlatTarget final : public Target {
 public:
  explicit FlatTarget(int dim, double level = 0.0) : dim_(dim), level_(level) {}
  int dim() const override { return dim_; }
  double potential(std::span<const double>, std::span<double> grad) const override {
    for (double& g : grad) g = 0.0;
    return level_;
  }

 private:
  int dim_;
  double level_;
};

// Finite only inside |x| < 3.
class CliffTarget final : public Target {
 public:
  int dim() const override { return 1; }
  double potential(std::span<const double> x, std::span<double> grad) const override {
    if (!grad.empty()) grad[0] = -10.0;
    return std::abs(x[0]) < 3.0 ? -10.0 * x[0]
                                : std::numeric_limits<double>::quiet_NaN();
  }
};

StrategyNetworks random_nets(std::uint64_t seed, double spread) {
  StrategyNetworks n({"x"}, NetConstants{}, false, seed);
  Stream rng(seed, 7);
  for (double& w : n.weights()) w += spread * rng.normal();
  return n;
}

TEST(NormalizeInputs, Examples) {
  const std::vector<double> g{0.5, -1.0}, sigma{2.0, 3.0};
  EXPECT_EQ(normalize_inputs(4.0, g, sigma, 4.0, 1.0).u_hat, 0.0);
  NormalizedInputs n = normalize_inputs(7.0, g, sigma, 5.0, 1.0);
  EXPECT_DOUBLE_EQ(n.u_hat, 1.0);
  EXPECT_DOUBLE_EQ(n.du_hat[1], -0.5);
  EXPECT_DOUBLE_EQ(n.grad_star[0], 0.5);
  EXPECT_DOUBLE_EQ(n.grad_star[1], -1.5);
  // A constant shift of U moves mu_U by the same amount.
  EXPECT_DOUBLE_EQ(normalize_inputs(7.0 + 1e3, g, sigma, 5.0 + 1e3, 1.0).u_hat, 1.0);
  EXPECT_THROW(normalize_inputs(0.0, g, sigma, 0.0, 0.0), PreconditionError);
}

TEST(Sghmc, FreeParticle) {
  FlatTarget flat(3);
  ChainState s = make_chain(flat, {1.0, 2.0, 3.0}, {0.5, -1.0, 2.0});
  const std::vector<double> G{2.0, 2.0, 2.0}, C{0.0, 0.0, 0.0};
  Stream rng(1, 0);
  sghmc_step(s, flat, 0.1, G, C, rng);
  EXPECT_EQ(s.p, (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_DOUBLE_EQ(s.theta[0], 1.1);
  EXPECT_DOUBLE_EQ(s.theta[1], 1.8);
  EXPECT_DOUBLE_EQ(s.theta[2], 3.4);
}

TEST(Sghmc, InjectedNoiseHasMatchedScale) {
  FlatTarget flat(1);
  const double eta = 0.05, c = 0.7;
  const std::vector<double> G{1.0}, C{c};
  Stream rng(2, 0);
  ChainState s = make_chain(flat, {0.0}, {0.0});
  double ss = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    s.p[0] = 0.0;
    sghmc_step(s, flat, eta, G, C, rng);
    ss += s.p[0] * s.p[0];
  }
  EXPECT_NEAR(std::sqrt(ss / n) / std::sqrt(2 * eta * c), 1.0, 0.01);
}

TEST(Sghmc, StandardGaussianStationarity) {
  GaussianTarget target(Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5));
  RunConfig cfg;
  cfg.sampler = SamplerKind::kSghmc;
  cfg.chains = 64;
  cfg.steps = 40000;
  cfg.burn_in = 2000;
  cfg.thin = 4;
  cfg.eta = 0.01;
  cfg.sghmc_G = 1.0;
  cfg.sghmc_C = 0.5;
  cfg.seed = 5;
  Trace tr = run_chains(target, cfg);
  for (int i = 0; i < 5; ++i) {
    double sum = 0.0, sq = 0.0;
    long n = 0;
    for (const auto& chain : tr.samples) {
      for (const auto& x : chain) {
        sum += x[i];
        sq += x[i] * x[i];
        ++n;
      }
    }
    const double mean = sum / n;
    EXPECT_LE(std::abs(mean), 0.05);
    EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.1);
  }
}

TEST(AmSghmc, ConstantNetworksReproduceSghmcBitForBit) {
  QuarticTarget target(4);
  const NetConstants nc;
  StrategyNetworks nets = StrategyNetworks::zeros({"x"}, nc);
  const std::vector<int> cats(4, 0);
  AdaptiveStats stats(4, AdaptiveConfig{});
  stats.set(std::vector<double>(4, 1.0), 3.7, 0.9);
  const double eta = 0.005;
  const std::vector<double> G(4, nc.c1 + nc.M_Q / 2), C(4, nc.c2 + nc.M_D / 2);

  ChainState a = initial_chain(target, 11, 0);
  ChainState b = a;
  Stream ra(11, 100), rb(11, 100);
  for (int t = 0; t < 10000; ++t) {
    am_sghmc_step(a, target, nets, cats, stats, eta, ra);
    sghmc_step(b, target, eta, G, C, rb);
    ASSERT_EQ(a.theta, b.theta) << "step " << t;
    ASSERT_EQ(a.p, b.p) << "step " << t;
  }
  EXPECT_FALSE(a.diverged);
}

TEST(AmSghmc, MatrixEntriesStayPositive) {
  StrategyNetworks nets = random_nets(4, 0.5);
  Stream rng(4, 4);
  for (int k = 0; k < 1000; ++k) {
    const double sigma = std::exp(2 * rng.normal());
    StrategyValues v = nets.forward(5 * rng.normal(), 5 * rng.normal(),
                                    50 * rng.normal(), 0, sigma);
    ASSERT_GT(v.G, 0.0);
    ASSERT_GT(v.C, 0.0);
  }
}

TEST(AmSghmc, AffineReparameterizationGivesMatchedTrajectories) {
  const int D = 4;
  QuarticTarget base(D);
  Stream draw(8, 8);
  std::vector<double> scale(D), shift(D);
  for (int i = 0; i < D; ++i) {
    scale[i] = std::pow(10.0, 2.0 * draw.uniform() - 1.0);
    shift[i] = 10.0 * draw.uniform() - 5.0;
  }
  AffineTarget moved(base, scale, shift);
  StrategyNetworks nets = random_nets(12, 0.3);

  RunConfig cfg;
  cfg.chains = 4;
  cfg.steps = 1000;
  cfg.burn_in = 0;
  cfg.eta = 0.02;
  cfg.seed = 21;
  cfg.window_start = 1;
  cfg.window_end = 500;
  cfg.stats.v0_star.assign(D, 1.0);
  Trace a = run_chains(base, cfg, &nets);
  for (int i = 0; i < D; ++i) cfg.stats.v0_star[i] = scale[i] * scale[i];
  Trace b = run_chains(moved, cfg, &nets);

  ASSERT_EQ(a.samples.size(), b.samples.size());
  double worst = 0.0;
  for (std::size_t c = 0; c < a.samples.size(); ++c) {
    for (std::size_t s = 0; s < a.samples[c].size(); ++s) {
      for (int i = 0; i < D; ++i) {
        const double x = a.samples[c][s][i];
        const double err = std::abs(b.samples[c][s][i] - (scale[i] * x + shift[i])) /
                           (scale[i] * std::max(1.0, std::abs(x)));
        worst = std::max(worst, err);
      }
    }
  }
  EXPECT_LE(worst, 1e-8);
  for (int i = 0; i < D; ++i) {
    EXPECT_NEAR(b.stats.sigma[i], scale[i] * a.stats.sigma[i],
                1e-8 * b.stats.sigma[i]);
  }
}

TEST(AmSghmc, MomentumMeanStaysCentered) {
  GaussianTarget target(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  StrategyNetworks nets = random_nets(5, 0.2);
  const std::vector<int> cats(3, 0);
  AdaptiveStats stats(3, AdaptiveConfig{});
  stats.set(std::vector<double>(3, 1.0), 1.5, std::sqrt(1.5));
  double sum = 0.0;
  long n = 0;
  for (int k = 0; k < 16; ++k) {
    ChainState s = initial_chain(target, 3, k);
    Stream rng(3, 1000 + k);
    for (int t = 0; t < 20000; ++t) {
      am_sghmc_step(s, target, nets, cats, stats, 0.01, rng);
      if (t >= 1000) {
        for (double p : s.p) sum += p;
        n += 3;
      }
    }
    ASSERT_FALSE(s.diverged);
  }
  EXPECT_LE(std::abs(sum / n), 0.05);
}

TEST(AmSghmc, UnknownCategoryIsAConfigError) {
  QuarticTarget target(2);
  StrategyNetworks nets = StrategyNetworks::zeros({"stiffness"}, NetConstants{});
  EXPECT_THROW(network_categories(target, nets), ConfigError);
}

TEST(Hmc, FlatPotentialAlwaysAccepts) {
  FlatTarget flat(2);
  ChainState s = make_chain(flat, {0.0, 0.0}, {0.0, 0.0});
  Stream rng(1, 1);
  for (int k = 0; k < 100; ++k) EXPECT_TRUE(hmc_step(s, flat, 0.1, 5, rng).accepted);
}

TEST(Hmc, SmallStepsAreAlmostAlwaysAccepted) {
  GaussianTarget target(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  ChainState s = initial_chain(target, 2, 0);
  Stream rng(2, 2);
  int accepted = 0;
  for (int k = 0; k < 10000; ++k) accepted += hmc_step(s, target, 0.05, 10, rng).accepted;
  EXPECT_GE(accepted, 9500);
}

TEST(Hmc, LeapfrogIsReversible) {
  QuarticTarget target(3);
  std::vector<double> theta{0.3, -1.2, 0.8}, p{1.0, 0.5, -0.7};
  const std::vector<double> theta0 = theta;
  std::vector<double> grad(3);
  double U = target.potential(theta, grad);
  leapfrog(target, theta, p, U, grad, 0.05, 40);
  for (double& x : p) x = -x;
  leapfrog(target, theta, p, U, grad, 0.05, 40);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(theta[i], theta0[i], 1e-10);
}

TEST(Hmc, NonFiniteEnergyIsRejected) {
  CliffTarget cliff;
  ChainState s = make_chain(cliff, {2.9}, {0.0});
  Stream rng(3, 3);
  for (int k = 0; k < 50; ++k) {
    hmc_step(s, cliff, 0.5, 10, rng);
    ASSERT_LT(std::abs(s.theta[0]), 3.0);
  }
}

TEST(Hmc, DualAveragingApproachesTargetAcceptance) {
  GaussianTarget target(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4));
  RunConfig cfg;
  cfg.sampler = SamplerKind::kHmc;
  cfg.chains = 4;
  cfg.steps = 3000;
  cfg.burn_in = 1000;
  cfg.hmc_step = 2.0;
  cfg.spsa_steps = 0;
  cfg.hmc_leapfrog = 5;
  Trace tr = run_chains(target, cfg);
  EXPECT_NEAR(tr.acceptance, 0.7, 0.1);
}

TEST(Spsa, FindsBowlMinimum) {
  GaussianTarget bowl(Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5));
  Stream rng(4, 0);
  const std::vector<double> start{3.0, -2.0, 1.0, 2.5, -1.5};
  std::vector<double> x = spsa_optimize(bowl, start, SpsaConfig{}, rng);
  double norm = 0.0;
  for (double v : x) norm += v * v;
  EXPECT_LE(std::sqrt(norm), 0.1);
}

TEST(Spsa, ConstantPotentialStaysAtStart) {
  FlatTarget flat(3, 2.0);
  Stream rng(4, 1);
  const std::vector<double> start{1.0, 2.0, 3.0};
  EXPECT_EQ(spsa_optimize(flat, start, SpsaConfig{}, rng), start);
}

TEST(Spsa, NeverReturnsWorseThanStart) {
  QuarticTarget target(6);
  Stream rng(4, 2);
  for (int k = 0; k < 5; ++k) {
    std::vector<double> start = target.sample_initial(rng);
    SpsaConfig cfg;
    cfg.steps = 50;
    cfg.initial_step = 5.0;
    std::vector<double> x = spsa_optimize(target, start, cfg, rng);
    EXPECT_LE(target.potential(x, {}), target.potential(start, {}));
  }
}

TEST(RunChains, SampleCountsAndThinning) {
  QuarticTarget target(2);
  RunConfig cfg;
  cfg.sampler = SamplerKind::kSghmc;
  cfg.chains = 3;
  cfg.steps = 101;
  cfg.burn_in = 20;
  cfg.seed = 9;
  Trace one = run_chains(target, cfg);
  EXPECT_EQ(one.samples_per_chain(), 81);
  cfg.thin = 2;
  Trace two = run_chains(target, cfg);
  EXPECT_EQ(two.samples_per_chain(), 40);
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < 40; ++s) {
      EXPECT_EQ(two.samples[c][s], one.samples[c][2 * s + 1]);
      EXPECT_EQ(two.step_of(s), one.step_of(2 * s + 1));
    }
  }
}

TEST(RunChains, DeterministicGivenSeed) {
  QuarticTarget target(3);
  StrategyNetworks nets = random_nets(2, 0.2);
  RunConfig cfg;
  cfg.chains = 4;
  cfg.steps = 400;
  cfg.burn_in = 100;
  cfg.window_start = 10;
  cfg.window_end = 200;
  cfg.eta = 0.005;
  cfg.seed = 77;
  Trace a = run_chains(target, cfg, &nets);
  Trace b = run_chains(target, cfg, &nets);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.energies, b.energies);
  EXPECT_EQ(a.stats.updates, 190);
  cfg.seed = 78;
  EXPECT_NE(run_chains(target, cfg, &nets).samples, a.samples);
}

TEST(RunChains, ChainCountDoesNotPerturbOtherChains) {
  QuarticTarget target(2);
  RunConfig cfg;
  cfg.sampler = SamplerKind::kSghmc;
  cfg.chains = 2;
  cfg.steps = 50;
  cfg.burn_in = 0;
  Trace small = run_chains(target, cfg);
  cfg.chains = 5;
  Trace large = run_chains(target, cfg);
  EXPECT_EQ(small.samples[1], large.samples[1]);
}

TEST(RunChains, AllChainsDivergedIsAnError) {
  CliffTarget cliff;
  RunConfig cfg;
  cfg.sampler = SamplerKind::kSghmc;
  cfg.chains = 2;
  cfg.steps = 200;
  cfg.burn_in = 0;
  cfg.eta = 0.1;
  cfg.initial_theta = {{0.0}, {1.0}};
  EXPECT_THROW(run_chains(cliff, cfg), DivergenceError);
}

TEST(RunChains, RejectsBadConfiguration) {
  QuarticTarget target(2);
  RunConfig cfg;
  cfg.steps = 10;
  cfg.burn_in = 10;
  EXPECT_THROW(run_chains(target, cfg), ConfigError);
  cfg.burn_in = 0;
  EXPECT_THROW(run_chains(target, cfg), ConfigError);  // no networks
  EXPECT_THROW(parse_sampler("nuts"), ConfigError);
  EXPECT_EQ(parse_sampler("am-sghmc"), SamplerKind::kAmSghmc);
}

TEST(RunChains, EmptyWindowUsesTrainingStatistics) {
  QuarticTarget target(3);
  StrategyNetworks nets = random_nets(4, 0.2);
  nets.frozen_stats() = {true, {0.25}, 1.5, 0.7};
  RunConfig cfg;
  cfg.chains = 3;
  cfg.steps = 50;
  cfg.burn_in = 0;
  cfg.eta = 0.01;
  cfg.window_start = 0;
  cfg.window_end = 0;
  const Trace tr = run_chains(target, cfg, &nets);
  EXPECT_EQ(tr.stats.updates, 0);
  EXPECT_DOUBLE_EQ(tr.stats.mu_U, 1.5);
  EXPECT_DOUBLE_EQ(tr.stats.sigma_U, 0.7);
  for (double s : tr.stats.sigma) EXPECT_DOUBLE_EQ(s, 0.5);

  // Same run driven by hand with the frozen values.
  AdaptiveStats stats(3, AdaptiveConfig{});
  stats.set({0.5, 0.5, 0.5}, 1.5, 0.7);
  const std::vector<int> cats(3, 0);
  for (int k = 0; k < 3; ++k) {
    Stream rng(0, k);
    std::vector<double> theta = target.sample_initial(rng);
    std::vector<double> p(3);
    for (double& x : p) x = rng.normal();
    ChainState s = make_chain(target, theta, p);
    for (int t = 0; t < 50; ++t) am_sghmc_step(s, target, nets, cats, stats, 0.01, rng);
    EXPECT_EQ(s.theta, tr.samples[k].back());
  }
}

TEST(TraceIo, RoundTrip) {
  QuarticTarget target(2);
  RunConfig cfg;
  cfg.sampler = SamplerKind::kHmc;
  cfg.chains = 2;
  cfg.steps = 30;
  cfg.burn_in = 10;
  cfg.spsa_steps = 20;
  Trace tr = run_chains(target, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "amsghmc_trace_rt";
  write_trace(tr, dir.string());
  Trace back = read_trace(dir.string());
  std::filesystem::remove_all(dir);
  EXPECT_EQ(back.samples, tr.samples);
  EXPECT_EQ(back.energies, tr.energies);
  EXPECT_EQ(back.sampler, "hmc");
  EXPECT_EQ(back.burn_in, 10);
  EXPECT_EQ(back.step_sizes, tr.step_sizes);
  EXPECT_THROW(read_trace(dir.string()), IoError);
}

}  // namespace
}  // namespace amsghmc
