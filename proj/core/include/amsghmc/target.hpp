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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "amsghmc/rng.hpp"
#include "amsghmc/structural_model.hpp"

namespace amsghmc {

/// Smooth monotone squashing of one coordinate. Identity on [b1, b2], with
/// tanh tails of width d1 / d2 so the image is (b1 - d1, b2 + d2). Either
/// side may be absent.
struct BoundedTransform {
  bool has_lower = true;
  double b1 = 0.0, d1 = 1.0;
  bool has_upper = true;
  double b2 = 0.0, d2 = 1.0;

  static BoundedTransform two_sided(double b1, double d1, double b2,
                                    double d2);
  static BoundedTransform identity();

  void validate() const;
  double map(double theta) const;
  double inverse(double w) const;
  /// dw/dtheta.
  double slope(double theta) const;
  /// log(dw/dtheta), computed without cancellation in the tails.
  double log_jacobian(double theta) const;
  /// d/dtheta of log_jacobian.
  double log_jacobian_derivative(double theta) const;
};

std::vector<double> map_state_to_params(std::span<const double> theta,
                                        std::span<const BoundedTransform> tr);
double log_jacobian(std::span<const double> theta,
                    std::span<const BoundedTransform> tr);

/// Truncated univariate prior. Log densities omit normalizing constants.
struct Prior {
  enum class Kind { kTruncatedGaussian, kTruncatedLognormal };
  Kind kind = Kind::kTruncatedGaussian;
  double center = 1.0;  // mean (Gaussian) or median (lognormal)
  double spread = 0.3;  // c.o.v. (Gaussian) or log-std (lognormal)
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static Prior truncated_gaussian(double mean, double cov, double lo,
                                  double hi);
  static Prior truncated_lognormal(double median, double s0, double lo,
                                   double hi);

  void validate() const;
  double log_density(double w) const;
  double log_density_derivative(double w) const;
  /// Normalized CDF of the truncated distribution.
  double cdf(double w) const;
  double sample(Stream& rng) const;

 private:
  bool cdf_mass_positive() const;
};

double log_prior(std::span<const double> w, std::span<const Prior> priors);

/// A potential-energy field U(theta) over an unbounded state space.
class Target {
 public:
  virtual ~Target() = default;
  virtual int dim() const = 0;
  /// Returns U(theta); fills `grad` with dU/dtheta when it is non-empty.
  virtual double potential(std::span<const double> theta,
                           std::span<double> grad) const = 0;
  /// Category index of each dimension, into category_names().
  virtual std::vector<int> categories() const;
  virtual std::vector<std::string> category_names() const;
  virtual std::vector<double> sample_initial(Stream& rng) const;
};

struct CategoryPrior {
  Prior prior;
  BoundedTransform transform;
};

/// Settings of the shear-building updating problem.
struct ProblemSpec {
  int n_stories = 2;
  double k0 = 2e7;
  double c0 = 6e4;
  double sigma0 = 1.0;
  double mass = 2e4;
  CategoryPrior stiffness{
      Prior::truncated_gaussian(1.0, 0.3, 0.499, 1.501),
      BoundedTransform::two_sided(0.5, 0.001, 1.5, 0.001)};
  CategoryPrior damping{
      Prior::truncated_gaussian(1.0, 0.3, -0.502, 3.002),
      BoundedTransform::two_sided(-0.5, 0.002, 3.0, 0.002)};
  CategoryPrior noise{
      Prior::truncated_lognormal(1.0, 0.3, 0.098, 3.002),
      BoundedTransform::two_sided(0.1, 0.002, 3.0, 0.002)};
  std::vector<int> observed_dofs;  // empty: first floor and roof
  bool flat_likelihood = false;
};

inline const std::vector<std::string>& shear_building_categories() {
  static const std::vector<std::string> names{"stiffness", "damping", "noise"};
  return names;
}

/// Bayesian updating of stiffness ratios, damping ratios and the noise
/// ratio of a shear building. D = 2N + 1, laid out as
/// [k_1/k0 .. k_N/k0, c_1/c0 .. c_N/c0, sigma/sigma0].
class UpdatingProblem final : public Target {
 public:
  UpdatingProblem(ProblemSpec spec, Dataset data);

  int dim() const override { return 2 * spec_.n_stories + 1; }
  double potential(std::span<const double> theta,
                   std::span<double> grad) const override;
  std::vector<int> categories() const override;
  std::vector<std::string> category_names() const override {
    return shear_building_categories();
  }
  std::vector<double> sample_initial(Stream& rng) const override;

  const ProblemSpec& spec() const { return spec_; }
  const Dataset& dataset() const { return data_; }
  const std::vector<Prior>& priors() const { return priors_; }
  const std::vector<BoundedTransform>& transforms() const {
    return transforms_;
  }

  std::vector<double> to_params(std::span<const double> theta) const;
  std::vector<double> to_state(std::span<const double> w) const;
  ShearBuilding building(std::span<const double> w) const;

  /// Gaussian log likelihood of the dataset; fills d/dw when grad non-empty.
  double log_likelihood(std::span<const double> w,
                        std::span<double> grad = {}) const;

 private:
  ProblemSpec spec_;
  Dataset data_;
  std::vector<Prior> priors_;
  std::vector<BoundedTransform> transforms_;
};

/// Gaussian target U = (x - mean)^T P (x - mean) / 2.
class GaussianTarget final : public Target {
 public:
  GaussianTarget(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  int dim() const override { return static_cast<int>(mean_.size()); }
  double potential(std::span<const double> theta,
                   std::span<double> grad) const override;
  std::vector<double> sample_initial(Stream& rng) const override;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd precision_;
};

/// Smooth, unbounded, non-Gaussian target with coupled dimensions:
/// U = sum_i (x_i^2 / 2 + a x_i^4 / 4) + c sum_i x_i x_{i+1}.
class QuarticTarget final : public Target {
 public:
  explicit QuarticTarget(int dim, double quartic = 0.1, double coupling = 0.3);

  int dim() const override { return dim_; }
  double potential(std::span<const double> theta,
                   std::span<double> grad) const override;

 private:
  int dim_;
  double quartic_;
  double coupling_;
};

/// Target in the coordinates theta' = scale * theta + shift of a base target.
class AffineTarget final : public Target {
 public:
  AffineTarget(const Target& base, std::vector<double> scale,
               std::vector<double> shift);

  int dim() const override { return base_.dim(); }
  double potential(std::span<const double> theta,
                   std::span<double> grad) const override;
  std::vector<int> categories() const override { return base_.categories(); }
  std::vector<std::string> category_names() const override {
    return base_.category_names();
  }
  std::vector<double> sample_initial(Stream& rng) const override;

 private:
  const Target& base_;
  std::vector<double> scale_;
  std::vector<double> shift_;
};

}  // namespace amsghmc
