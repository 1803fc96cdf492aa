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

#include "amsghmc/adaptive_stats.hpp"

#include <algorithm>
#include <cmath>

#include "amsghmc/error.hpp"

namespace amsghmc {

MomentEstimator::MomentEstimator(int dim, BetaPair betas, EstimatorMode mode,
                                 std::vector<double> v0_star)
    : dim_(dim), betas_(betas), mode_(mode) {
  if (dim < 1) throw PreconditionError("estimator dimension must be >= 1");
  for (double b : {betas.beta1, betas.beta2}) {
    if (!(b >= 0.0 && b < 1.0)) {
      throw PreconditionError("decay rates must lie in [0, 1)");
    }
  }
  has_prior_ = !v0_star.empty();
  if (has_prior_ && static_cast<int>(v0_star.size()) != dim) {
    throw PreconditionError("prior variance has wrong dimension");
  }
  v0_ = has_prior_ ? std::move(v0_star) : std::vector<double>(dim, 0.0);
  m_.assign(dim, 0.0);
  v_ = v0_;
  m_hat_.assign(dim, 0.0);
  v_hat_.resize(dim);
  for (int i = 0; i < dim; ++i) v_hat_[i] = std::max(v0_[i], kVarianceFloor);
}

MomentEstimator MomentEstimator::running_average(int dim) {
  MomentEstimator e(dim, BetaPair{0.0, 0.0}, EstimatorMode::kTesting);
  e.running_ = true;
  return e;
}

void MomentEstimator::update(std::span<const double> batch, int K) {
  if (K < 1 || batch.size() != static_cast<std::size_t>(K) * dim_) {
    throw PreconditionError("batch size mismatch");
  }
  ++t_;
  double b1 = betas_.beta1, b2 = betas_.beta2;
  if (running_) {
    const double tk = static_cast<double>(t_) * K;
    b1 = (t_ - 1.0) / t_;
    // A single sample has no variance; beta2 is 0 at t = 2 in that case.
    b2 = tk > 1.0 ? (tk - K - 1.0) / (tk - 1.0) : 0.0;
  }
  b1t_ *= b1;
  b2t_ *= b2;

  for (int i = 0; i < dim_; ++i) {
    double ybar = 0.0;
    for (int k = 0; k < K; ++k) ybar += batch[static_cast<std::size_t>(k) * dim_ + i];
    ybar /= K;
    m_[i] = b1 * m_[i] + (1.0 - b1) * ybar;

    double m_hat;
    if (running_) {
      m_hat = m_[i];
    } else if (mode_ == EstimatorMode::kTraining) {
      m_hat = m_[i] * (1.0 + b1t_);
    } else {
      m_hat = m_[i] / (1.0 - b1t_);
    }
    const double m_prev = t_ == 1 ? m_hat : m_hat_[i];
    const double shift = (m_hat - m_prev) * (m_hat - m_prev);

    double ss = shift;
    for (int k = 0; k < K; ++k) {
      const double e = batch[static_cast<std::size_t>(k) * dim_ + i] - m_hat;
      ss += e * e;
    }
    const double v_prime = shift + v_[i];
    v_[i] = b2 * v_prime + (1.0 - b2) * (ss / K);

    double v_hat;
    if (running_) {
      v_hat = v_[i];
    } else if (has_prior_ || mode_ == EstimatorMode::kTraining) {
      v_hat = v_[i] + b2t_ * (v_[i] - v0_[i]);
    } else {
      v_hat = v_[i] / (1.0 - b2t_);
    }
    m_hat_[i] = m_hat;
    v_hat_[i] = std::max(v_hat, kVarianceFloor);
  }
}

AdaptiveStats::AdaptiveStats(int dim, AdaptiveConfig config)
    : dim_(dim), config_(std::move(config)) {
  if (!config_.v0_star.empty()) {
    for (double v : config_.v0_star) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw PreconditionError("prior variances must be positive");
      }
    }
  }
  theta_ = MomentEstimator(dim, config_.theta, config_.mode, config_.v0_star);
  energy_ = MomentEstimator(1, config_.energy, config_.mode);
  sigma_.assign(dim, 1.0);
}

namespace {

// Mean and population std of column i of a row-major K x dim batch.
std::pair<double, double> column_moments(std::span<const double> batch,
                                         int K, int dim, int i) {
  double mean = 0.0;
  for (int k = 0; k < K; ++k) mean += batch[static_cast<std::size_t>(k) * dim + i];
  mean /= K;
  double ss = 0.0;
  for (int k = 0; k < K; ++k) {
    const double e = batch[static_cast<std::size_t>(k) * dim + i] - mean;
    ss += e * e;
  }
  return {mean, K > 1 ? std::sqrt(ss / (K - 1)) : 0.0};
}

}  // namespace

void AdaptiveStats::initialize(std::span<const double> theta_batch,
                               std::span<const double> u_batch, int K) {
  if (K < 1 || theta_batch.size() != static_cast<std::size_t>(K) * dim_ ||
      u_batch.size() != static_cast<std::size_t>(K)) {
    throw PreconditionError("batch size mismatch");
  }
  for (int i = 0; i < dim_; ++i) {
    if (!config_.v0_star.empty()) {
      sigma_[i] = std::sqrt(config_.v0_star[i]);
    } else {
      const double s = column_moments(theta_batch, K, dim_, i).second;
      sigma_[i] = s > 0.0 ? s : 1.0;
    }
  }
  const auto [mu, s] = column_moments(u_batch, K, 1, 0);
  mu_U_ = mu;
  // A standard Gaussian posterior in D dimensions has std(U) = sqrt(D / 2).
  sigma_U_ = s > 0.0 ? s : std::sqrt(0.5 * dim_);
  initialized_ = true;
}

void AdaptiveStats::update(std::span<const double> theta_batch,
                           std::span<const double> u_batch, int K) {
  if (frozen_) throw PreconditionError("adaptive statistics are frozen");
  theta_.update(theta_batch, K);
  energy_.update(u_batch, K);
  for (int i = 0; i < dim_; ++i) sigma_[i] = std::sqrt(theta_.variance()[i]);
  mu_U_ = energy_.mean()[0];
  sigma_U_ = std::sqrt(energy_.variance()[0]);
  initialized_ = true;
}

void AdaptiveStats::set(std::vector<double> sigma, double mu_U,
                        double sigma_U) {
  if (static_cast<int>(sigma.size()) != dim_) {
    throw PreconditionError("sigma has wrong dimension");
  }
  for (double& s : sigma) s = std::max(s, std::sqrt(kVarianceFloor));
  sigma_ = std::move(sigma);
  mu_U_ = mu_U;
  sigma_U_ = std::max(sigma_U, std::sqrt(kVarianceFloor));
  initialized_ = true;
}

std::vector<double> AdaptiveStats::category_variance(
    std::span<const int> categories, int num_categories) const {
  std::vector<double> sum(num_categories, 0.0);
  std::vector<int> count(num_categories, 0);
  for (int i = 0; i < dim_; ++i) {
    sum[categories[i]] += sigma_[i] * sigma_[i];
    ++count[categories[i]];
  }
  for (int c = 0; c < num_categories; ++c) {
    sum[c] = count[c] > 0 ? sum[c] / count[c] : 0.0;
  }
  return sum;
}

}  // namespace amsghmc
