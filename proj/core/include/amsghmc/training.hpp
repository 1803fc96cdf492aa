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

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amsghmc/adaptive_stats.hpp"
#include "amsghmc/rng.hpp"
#include "amsghmc/sampler.hpp"
#include "amsghmc/strategy_net.hpp"
#include "amsghmc/target.hpp"

namespace amsghmc {

struct SteinOptions {
  /// Ridge added to the kernel matrix, relative to trace(K) / n.
  double ridge = 1.0;
};

struct SteinResult {
  Eigen::MatrixXd scores;  // n x D estimates of grad log q at each sample
  double bandwidth = 1.0;  // RBF length scale (median pairwise distance)
  double ridge = 0.0;
  std::vector<std::string> warnings;
};

/// Kernel Stein estimate of the score at each sample:
///   G = -(K + lambda I)^-1 <grad, K>
/// with an RBF kernel K. The ridge grows tenfold whenever the Cholesky
/// factorization fails.
SteinResult stein_gradient(const Eigen::MatrixXd& samples,
                           const SteinOptions& options = {});

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::size_t size, double learning_rate, double beta1, double beta2,
       double epsilon = 1e-8);
  void step(std::vector<double>& weights, std::span<const double> grad);
  int steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  double b1t_ = 1.0, b2t_ = 1.0;
  std::vector<double> m_, v_;
};

/// Past chain states, evicted first-in first-out.
class ReplayBuffer {
 public:
  struct Entry {
    std::vector<double> theta;
    std::vector<double> p;
  };
  explicit ReplayBuffer(std::size_t capacity);
  void push(std::vector<double> theta, std::vector<double> p);
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const Entry& draw(Stream& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Entry> entries_;
};

/// State before a recorded step, with the scales and noise it used.
struct StepRecord {
  std::vector<double> theta, p, grad, noise;
  double U = 0.0;
  std::vector<double> sigma;
  double mu_U = 0.0;
  double sigma_U = 1.0;
};

/// K chains over one loss segment. Index s = 0 is the segment start.
struct Segment {
  std::vector<std::vector<std::vector<double>>> theta;  // [k][s][i], s = 0..S
  std::vector<std::vector<double>> U;                   // [k][s]
  std::vector<std::vector<std::vector<double>>> grad;   // [k][s][i]
  std::vector<std::vector<StepRecord>> steps;           // [k][s - 1]
  int chains() const { return static_cast<int>(theta.size()); }
  int samples() const { return theta.empty() ? 0 : static_cast<int>(theta[0].size()) - 1; }
};

struct LossTerms {
  double energy = 0.0;
  double entropy = 0.0;
  /// dLoss / dtheta_s^k for s = 1..S, [k][s - 1][i].
  std::vector<std::vector<std::vector<double>>> seeds;
  double total() const { return energy + entropy; }
};

/// Ordered segment loss: mean U over all samples plus the mean log density
/// of sample s under a KDE of samples 0..s, for s > skipped. The entropy
/// gradient comes from stein_gradient over the same restricted set.
LossTerms training_loss(const Segment& segment, int skipped,
                        const SteinOptions& stein = {});

/// dLoss / dweights. Each sample depends on the weights only through the
/// step that produced it.
std::vector<double> segment_gradient(const StrategyNetworks& nets,
                                     std::span<const int> categories,
                                     double eta, bool detach_gamma,
                                     const Segment& segment,
                                     const LossTerms& loss);

struct TrainingConfig {
  int chains = 64;
  int epochs = 100;
  int sub_epochs = 10;
  int steps_per_sub_epoch = 90;
  int segment_length = 15;
  int loss_chains = 10;
  int skipped = 3;
  int thin = 1;
  double replay_prob = 0.2;
  int replay_capacity = 10000;
  double learning_rate = 0.01;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.75;
  double clip_norm = 10.0;
  double eta = 0.03;
  /// Adaptive estimates update during the last `adapt_last_sub_epochs`
  /// sub-epochs of each of the first `adapt_epochs` epochs.
  int adapt_epochs = 50;
  int adapt_last_sub_epochs = 6;
  BetaPair theta_betas{0.99, 0.999};
  BetaPair energy_betas{0.99, 0.998};
  bool detach_gamma = false;
  SteinOptions stein;
  double divergence_abort_fraction = 0.5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct SubEpochLog {
  int epoch = 0;
  int sub_epoch = 0;
  double loss_energy = 0.0;
  double loss_entropy = 0.0;
  double grad_norm = 0.0;
  int diverged_chains = 0;
};

struct TrainingResult {
  StrategyNetworks nets;  // with frozen statistics
  std::vector<SubEpochLog> log;
};

using TrainingProgress = std::function<void(const SubEpochLog&)>;

TrainingResult train(const Target& problem, StrategyNetworks nets,
                     const TrainingConfig& config,
                     const TrainingProgress& progress = {});

void write_training_log(const std::vector<SubEpochLog>& log,
                        const std::string& path);

}  // namespace amsghmc
