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
#include <string>
#include <vector>

#include "amsghmc/sampler.hpp"

namespace amsghmc {

/// All chains of a trace stacked into one n x D matrix, with energies.
struct PooledSamples {
  Eigen::MatrixXd theta;
  Eigen::VectorXd U;
};
PooledSamples pool(const Trace& trace);

struct KdeOptions {
  /// Larger sets are subsampled for the bandwidth fit and the result is
  /// rescaled by (m / n)^(2 / (D + 4)).
  int max_fit_samples = 2000;
  /// Larger sets are subsampled as evaluation points in naive_loss.
  int max_eval_points = 5000;
  std::uint64_t seed = 0;
};

/// Equal-weight Gaussian mixture with one kernel per sample and shared
/// covariance c_op * Sigma, Sigma being the sample covariance.
class KdeModel {
 public:
  int dim() const { return static_cast<int>(covariance_.rows()); }
  int size() const { return static_cast<int>(centers_.rows()); }
  double c_op() const { return c_op_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  Eigen::MatrixXd kernel_covariance() const { return c_op_ * covariance_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  friend KdeModel fit_cop(const Eigen::MatrixXd&, const KdeOptions&);
  Eigen::MatrixXd centers_;   // whitened, n x D
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;      // lower Cholesky factor of covariance_
  double c_op_ = 1.0;
  double log_det_ = 0.0;      // log det covariance_
  std::vector<std::string> warnings_;
};

/// Mean leave-one-out log density of the samples under kernel covariance
/// c * Sigma. Samples equal in value to the evaluation point are left out.
double loo_objective(const Eigen::MatrixXd& samples, double c);

/// Chooses c_op by maximizing loo_objective (golden-section search, then
/// bisection on its derivative). Needs two distinct samples.
KdeModel fit_cop(const Eigen::MatrixXd& samples, const KdeOptions& options = {});

/// Mean of U + log q(theta) over the samples, q being the full-sample KDE.
double naive_loss(const Eigen::MatrixXd& samples, const Eigen::VectorXd& U,
                  const KdeModel& kde, const KdeOptions& options = {});

struct EssResult {
  std::vector<double> ess;       // per dimension
  std::vector<bool> degenerate;  // zero-variance dimensions (ess = T)
};

/// Per-dimension ESS of one chain (T x D). Lags run to floor(T/3) - 1,
/// stopping at lag 1000 or at the first even lag s with rho_{s-1} + rho_s
/// < 0. Results are clamped to T.
EssResult effective_sample_size(const Eigen::MatrixXd& chain);

enum class EssAggregate { kMeanOfMinimum, kSumOfMinimum };
EssAggregate parse_ess_aggregate(const std::string& name);
std::string to_string(EssAggregate a);

struct TraceEss {
  std::vector<EssResult> chains;
  std::vector<double> mean_per_dim;  // averaged over chains
  double aggregate = 0.0;
};
TraceEss trace_ess(const Trace& trace,
                   EssAggregate aggregate = EssAggregate::kMeanOfMinimum);

struct Pca {
  Eigen::VectorXd mean;
  Eigen::VectorXd variances;   // descending
  Eigen::MatrixXd components;  // column j is component j
  Eigen::MatrixXd projected;   // n x D
};

/// Eigen-decomposition of the sample covariance. Each component's largest
/// magnitude loading is positive.
Pca pca_project(const Eigen::MatrixXd& samples);

struct SurfaceGrid {
  double x_min = -1.0, x_max = 1.0;
  int nx = 41;
  double y_min = -1.0, y_max = 1.0;
  int ny = 41;
  double x(int a) const;
  double y(int b) const;
};

/// Grid over mean +- half_width standard deviations of columns i and j.
SurfaceGrid default_grid(const Eigen::MatrixXd& samples, int i, int j,
                         int nodes = 41, double half_width = 2.0);

struct Surface {
  SurfaceGrid grid;
  Eigen::MatrixXd values;  // nx x ny, NaN where missing
  Eigen::MatrixXi counts;  // neighbourhood sizes
  bool missing(int a, int b) const { return counts(a, b) == 0; }
};

/// E(x_k | x_i, x_j) at each grid node: the mean of x_k over samples whose
/// (x_i, x_j) lie within `threshold` standard deviations of the node, then
/// `iterations` passes of 3 x 3 averaging over present nodes.
Surface conditional_mean_surface(const Eigen::MatrixXd& samples, int i, int j,
                                 int k, const SurfaceGrid& grid,
                                 double threshold = 0.3, int iterations = 3);

void write_surface_csv(const Surface& surface, const std::string& path);
void write_matrix_csv(const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header,
                      const std::string& path);

}  // namespace amsghmc
