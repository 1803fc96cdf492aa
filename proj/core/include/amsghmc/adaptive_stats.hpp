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

#include <span>
#include <vector>

namespace amsghmc {

struct BetaPair {
  double beta1 = 0.99;
  double beta2 = 0.999;
};

enum class EstimatorMode { kTraining, kTesting };

/// Smallest variance ever returned; standard deviations are floored at 1e-8.
inline constexpr double kVarianceFloor = 1e-16;

/// Exponential-moving-average estimate of the mean and centered variance of
/// a vector stream observed in batches of K samples per step.
///
/// Bias correction follows the mode and the prior:
///   testing, no prior:  m / (1 - b1^t),  v / (1 - b2^t)
///   testing, prior:     m / (1 - b1^t),  v + b2^t (v - v0)
///   training:           m (1 + b1^t),    v + b2^t (v - v0), v0 = 0 if absent
class MomentEstimator {
 public:
  MomentEstimator() = default;
  MomentEstimator(int dim, BetaPair betas, EstimatorMode mode,
                  std::vector<double> v0_star = {});

  /// beta1 = (t-1)/t and beta2 = (tK-K-1)/(tK-1) with no bias correction.
  /// The estimates are then the pooled sample mean and unbiased variance
  /// of everything seen so far (from t = 2 when K = 1).
  static MomentEstimator running_average(int dim);

  /// `batch` is row-major K x dim.
  void update(std::span<const double> batch, int K);

  int dim() const { return dim_; }
  int steps() const { return t_; }
  bool has_prior() const { return has_prior_; }
  const std::vector<double>& mean() const { return m_hat_; }
  /// Bias-corrected variance, floored at kVarianceFloor.
  const std::vector<double>& variance() const { return v_hat_; }

 private:
  int dim_ = 0;
  BetaPair betas_;
  EstimatorMode mode_ = EstimatorMode::kTesting;
  bool running_ = false;
  bool has_prior_ = false;
  int t_ = 0;
  double b1t_ = 1.0;
  double b2t_ = 1.0;
  std::vector<double> v0_, m_, v_, m_hat_, v_hat_;
};

struct AdaptiveConfig {
  BetaPair theta{0.99, 0.995};
  BetaPair energy{0.99, 0.998};
  EstimatorMode mode = EstimatorMode::kTesting;
  /// Prior variance of each state dimension. Empty means none.
  std::vector<double> v0_star;
};

/// Scale estimates feeding the AM-SGHMC input normalization: sigma_i per
/// state dimension and the mean / std of the potential energy.
class AdaptiveStats {
 public:
  AdaptiveStats() = default;
  AdaptiveStats(int dim, AdaptiveConfig config);

  /// Values used until the first update. sigma_i comes from v0* when given,
  /// else from the batch; mu_U and sigma_U come from the batch.
  void initialize(std::span<const double> theta_batch,
                  std::span<const double> u_batch, int K);
  /// One estimator step on a K-batch. Throws PreconditionError once frozen.
  void update(std::span<const double> theta_batch,
              std::span<const double> u_batch, int K);
  void freeze() { frozen_ = true; }
  /// Overwrites the current values, e.g. to restore a snapshot.
  void set(std::vector<double> sigma, double mu_U, double sigma_U);

  int dim() const { return dim_; }
  bool initialized() const { return initialized_; }
  bool frozen() const { return frozen_; }
  int steps() const { return theta_.steps(); }
  const AdaptiveConfig& config() const { return config_; }

  double mu_U() const { return mu_U_; }
  double sigma_U() const { return sigma_U_; }
  double sigma(int i) const { return sigma_[i]; }
  const std::vector<double>& sigmas() const { return sigma_; }

  /// Mean of sigma_i^2 over the dimensions of each category.
  std::vector<double> category_variance(std::span<const int> categories,
                                        int num_categories) const;

 private:
  int dim_ = 0;
  AdaptiveConfig config_;
  MomentEstimator theta_, energy_;
  bool initialized_ = false;
  bool frozen_ = false;
  std::vector<double> sigma_;
  double mu_U_ = 0.0;
  double sigma_U_ = 1.0;
};

}  // namespace amsghmc
