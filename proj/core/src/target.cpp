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

#include "amsghmc/target.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "amsghmc/error.hpp"

namespace amsghmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log sech^2(x), stable for large |x|.
double log_sech2(double x) {
  const double a = std::abs(x);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

// ---------------------------------------------------------------------------
// BoundedTransform

BoundedTransform BoundedTransform::two_sided(double b1, double d1, double b2,
                                             double d2) {
  BoundedTransform t{true, b1, d1, true, b2, d2};
  t.validate();
  return t;
}

BoundedTransform BoundedTransform::identity() {
  return {false, 0.0, 1.0, false, 0.0, 1.0};
}

void BoundedTransform::validate() const {
  if (has_lower && !(d1 > 0.0)) throw ConfigError("transform width d1 <= 0");
  if (has_upper && !(d2 > 0.0)) throw ConfigError("transform width d2 <= 0");
  if (has_lower && has_upper && b1 > b2) {
    throw ConfigError("transform knots require b1 <= b2");
  }
}

double BoundedTransform::map(double theta) const {
  if (has_lower && theta < b1) return b1 + d1 * std::tanh((theta - b1) / d1);
  if (has_upper && theta > b2) return b2 + d2 * std::tanh((theta - b2) / d2);
  return theta;
}

double BoundedTransform::inverse(double w) const {
  if (has_lower && w < b1) {
    if (!(w > b1 - d1)) throw PreconditionError("value below transform range");
    return b1 + d1 * std::atanh((w - b1) / d1);
  }
  if (has_upper && w > b2) {
    if (!(w < b2 + d2)) throw PreconditionError("value above transform range");
    return b2 + d2 * std::atanh((w - b2) / d2);
  }
  return w;
}

double BoundedTransform::slope(double theta) const {
  double t = 0.0;
  if (has_lower && theta < b1) {
    t = std::tanh((theta - b1) / d1);
  } else if (has_upper && theta > b2) {
    t = std::tanh((theta - b2) / d2);
  } else {
    return 1.0;
  }
  return 1.0 - t * t;
}

double BoundedTransform::log_jacobian(double theta) const {
  if (has_lower && theta < b1) return log_sech2((theta - b1) / d1);
  if (has_upper && theta > b2) return log_sech2((theta - b2) / d2);
  return 0.0;
}

double BoundedTransform::log_jacobian_derivative(double theta) const {
  if (has_lower && theta < b1) return -2.0 * std::tanh((theta - b1) / d1) / d1;
  if (has_upper && theta > b2) return -2.0 * std::tanh((theta - b2) / d2) / d2;
  return 0.0;
}

std::vector<double> map_state_to_params(std::span<const double> theta,
                                        std::span<const BoundedTransform> tr) {
  if (theta.size() != tr.size()) throw PreconditionError("dimension mismatch");
  std::vector<double> w(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) w[i] = tr[i].map(theta[i]);
  return w;
}

double log_jacobian(std::span<const double> theta,
                    std::span<const BoundedTransform> tr) {
  if (theta.size() != tr.size()) throw PreconditionError("dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s += tr[i].log_jacobian(theta[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Prior

Prior Prior::truncated_gaussian(double mean, double cov, double lo, double hi) {
  Prior p{Kind::kTruncatedGaussian, mean, cov, lo, hi};
  p.validate();
  return p;
}

Prior Prior::truncated_lognormal(double median, double s0, double lo,
                                 double hi) {
  Prior p{Kind::kTruncatedLognormal, median, s0, lo, hi};
  p.validate();
  return p;
}

void Prior::validate() const {
  if (!(spread > 0.0)) throw ConfigError("prior spread must be positive");
  if (!(lo < hi)) throw ConfigError("prior interval is empty");
  if (kind == Kind::kTruncatedGaussian && center == 0.0) {
    throw ConfigError("c.o.v. prior needs a non-zero mean");
  }
  if (kind == Kind::kTruncatedLognormal && !(center > 0.0 && hi > 0.0)) {
    throw ConfigError("lognormal prior needs a positive median and support");
  }
  if (!(cdf_mass_positive())) throw ConfigError("prior interval has no mass");
}

bool Prior::cdf_mass_positive() const {
  auto raw = [&](double w) {
    if (kind == Kind::kTruncatedGaussian) {
      return normal_cdf((w - center) / (spread * std::abs(center)));
    }
    if (w <= 0.0) return 0.0;
    return normal_cdf((std::log(w) - std::log(center)) / spread);
  };
  return raw(hi) - raw(lo) > 0.0;
}

double Prior::log_density(double w) const {
  if (!(w >= lo && w <= hi)) return -kInf;
  if (kind == Kind::kTruncatedGaussian) {
    const double s = spread * std::abs(center);
    const double z = (w - center) / s;
    return -0.5 * z * z;
  }
  if (!(w > 0.0)) return -kInf;
  const double z = (std::log(w) - std::log(center)) / spread;
  return -std::log(w) - 0.5 * z * z;
}

double Prior::log_density_derivative(double w) const {
  if (!(w >= lo && w <= hi)) return 0.0;
  if (kind == Kind::kTruncatedGaussian) {
    const double s = spread * std::abs(center);
    return -(w - center) / (s * s);
  }
  const double z = (std::log(w) - std::log(center)) / spread;
  return -1.0 / w - z / (spread * w);
}

double Prior::cdf(double w) const {
  if (w <= lo) return 0.0;
  if (w >= hi) return 1.0;
  auto raw = [&](double x) {
    if (kind == Kind::kTruncatedGaussian) {
      return normal_cdf((x - center) / (spread * std::abs(center)));
    }
    if (x <= 0.0) return 0.0;
    return normal_cdf((std::log(x) - std::log(center)) / spread);
  };
  const double a = raw(lo);
  return (raw(w) - a) / (raw(hi) - a);
}

double Prior::sample(Stream& rng) const {
  for (;;) {
    const double z = rng.normal();
    const double w = kind == Kind::kTruncatedGaussian
                         ? center + spread * std::abs(center) * z
                         : center * std::exp(spread * z);
    if (w >= lo && w <= hi) return w;
  }
}

double log_prior(std::span<const double> w, std::span<const Prior> priors) {
  if (w.size() != priors.size()) throw PreconditionError("dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += priors[i].log_density(w[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Target

std::vector<int> Target::categories() const {
  return std::vector<int>(dim(), 0);
}

std::vector<std::string> Target::category_names() const { return {"x"}; }

std::vector<double> Target::sample_initial(Stream& rng) const {
  std::vector<double> x(dim());
  for (double& v : x) v = rng.normal();
  return x;
}

// ---------------------------------------------------------------------------
// UpdatingProblem

UpdatingProblem::UpdatingProblem(ProblemSpec spec, Dataset data)
    : spec_(std::move(spec)), data_(std::move(data)) {
  const int n = spec_.n_stories;
  if (n < 1) throw ConfigError("n_stories must be at least 1");
  if (!(spec_.k0 > 0 && spec_.c0 > 0 && spec_.sigma0 > 0 && spec_.mass > 0)) {
    throw ConfigError("nominal k0, c0, sigma0 and mass must be positive");
  }
  if (spec_.observed_dofs.empty()) {
    spec_.observed_dofs = default_observed_dofs(n);
  }
  if (data_.observed_dofs.empty()) data_.observed_dofs = spec_.observed_dofs;
  if (data_.observed_dofs != spec_.observed_dofs) {
    throw ConfigError("dataset sensors do not match the problem definition");
  }
  if (!spec_.flat_likelihood &&
      (data_.measurements.rows() != data_.n_observed() ||
       data_.measurements.cols() != data_.n_steps())) {
    throw ConfigError("dataset measurements have the wrong shape");
  }
  for (const CategoryPrior* c : {&spec_.stiffness, &spec_.damping,
                                 &spec_.noise}) {
    c->prior.validate();
    c->transform.validate();
  }
  for (int i = 0; i < n; ++i) {
    priors_.push_back(spec_.stiffness.prior);
    transforms_.push_back(spec_.stiffness.transform);
  }
  for (int i = 0; i < n; ++i) {
    priors_.push_back(spec_.damping.prior);
    transforms_.push_back(spec_.damping.transform);
  }
  priors_.push_back(spec_.noise.prior);
  transforms_.push_back(spec_.noise.transform);
  if (spec_.noise.prior.lo <= 0.0 &&
      !(spec_.noise.transform.has_lower &&
        spec_.noise.transform.b1 - spec_.noise.transform.d1 >= 0.0)) {
    throw ConfigError("noise ratio must be bounded away from zero");
  }
}

std::vector<int> UpdatingProblem::categories() const {
  const int n = spec_.n_stories;
  std::vector<int> c(dim(), 0);
  for (int i = 0; i < n; ++i) c[n + i] = 1;
  c[2 * n] = 2;
  return c;
}

std::vector<double> UpdatingProblem::to_params(
    std::span<const double> theta) const {
  return map_state_to_params(theta, transforms_);
}

std::vector<double> UpdatingProblem::to_state(std::span<const double> w) const {
  if (static_cast<int>(w.size()) != dim()) {
    throw PreconditionError("dimension mismatch");
  }
  std::vector<double> theta(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    theta[i] = transforms_[i].inverse(w[i]);
  }
  return theta;
}

ShearBuilding UpdatingProblem::building(std::span<const double> w) const {
  const int n = spec_.n_stories;
  ShearBuilding b = ShearBuilding::uniform(n, 0.0, 0.0, spec_.mass);
  for (int i = 0; i < n; ++i) {
    b.stiffness[i] = w[i] * spec_.k0;
    b.damping[i] = w[n + i] * spec_.c0;
  }
  return b;
}

double UpdatingProblem::log_likelihood(std::span<const double> w,
                                       std::span<double> grad) const {
  const int n = spec_.n_stories;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (spec_.flat_likelihood) return 0.0;
  const double sigma = w[2 * n] * spec_.sigma0;
  if (!(sigma > 0.0)) throw PreconditionError("noise level must be positive");
  const ShearBuilding b = building(w);
  const double count =
      static_cast<double>(data_.n_observed()) * data_.n_steps();
  const double var = sigma * sigma;

  if (grad.empty()) {
    const Eigen::MatrixXd y = simulate_accelerations(b, data_);
    const double s = (data_.measurements - y).squaredNorm();
    return -0.5 * count * std::log(2.0 * std::numbers::pi * var) -
           s / (2.0 * var);
  }

  std::vector<ParamRef> wrt;
  for (int i = 0; i < n; ++i) wrt.push_back({ParamKind::kStiffness, i});
  for (int i = 0; i < n; ++i) wrt.push_back({ParamKind::kDamping, i});
  const Sensitivities sens = simulate_with_sensitivities(b, data_, wrt);
  const Eigen::MatrixXd r = data_.measurements - sens.y;
  const double s = r.squaredNorm();
  for (int i = 0; i < n; ++i) {
    grad[i] = (r.array() * sens.dy[i].array()).sum() / var * spec_.k0;
    grad[n + i] = (r.array() * sens.dy[n + i].array()).sum() / var * spec_.c0;
  }
  grad[2 * n] = (-count / sigma + s / (var * sigma)) * spec_.sigma0;
  return -0.5 * count * std::log(2.0 * std::numbers::pi * var) -
         s / (2.0 * var);
}

double UpdatingProblem::potential(std::span<const double> theta,
                                  std::span<double> grad) const {
  const int d = dim();
  if (static_cast<int>(theta.size()) != d) {
    throw PreconditionError("dimension mismatch");
  }
  std::vector<double> w = to_params(theta);
  // Saturated tails can round onto or just past the truncation bounds.
  for (int i = 0; i < d; ++i) {
    w[i] = std::clamp(w[i], priors_[i].lo, priors_[i].hi);
  }
  std::vector<double> gll(grad.empty() ? 0 : d);
  const double ll = log_likelihood(w, gll);
  double lp = 0.0, lj = 0.0;
  for (int i = 0; i < d; ++i) {
    lp += priors_[i].log_density(w[i]);
    lj += transforms_[i].log_jacobian(theta[i]);
  }
  if (!grad.empty()) {
    for (int i = 0; i < d; ++i) {
      grad[i] = -(gll[i] + priors_[i].log_density_derivative(w[i])) *
                    transforms_[i].slope(theta[i]) -
                transforms_[i].log_jacobian_derivative(theta[i]);
    }
  }
  return -ll - lp - lj;
}

std::vector<double> UpdatingProblem::sample_initial(Stream& rng) const {
  std::vector<double> w(dim());
  for (int i = 0; i < dim(); ++i) {
    const BoundedTransform& t = transforms_[i];
    double v = priors_[i].sample(rng);
    if (t.has_lower) v = std::max(v, t.b1 - t.d1 * (1.0 - 1e-9));
    if (t.has_upper) v = std::min(v, t.b2 + t.d2 * (1.0 - 1e-9));
    w[i] = v;
  }
  return to_state(w);
}

// ---------------------------------------------------------------------------
// Synthetic targets

GaussianTarget::GaussianTarget(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw PreconditionError("covariance shape does not match mean");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError("covariance is not positive definite");
  }
  precision_ = llt.solve(Eigen::MatrixXd::Identity(mean_.size(), mean_.size()));
}

double GaussianTarget::potential(std::span<const double> theta,
                                 std::span<double> grad) const {
  Eigen::Map<const Eigen::VectorXd> x(theta.data(), dim());
  const Eigen::VectorXd r = x - mean_;
  const Eigen::VectorXd pr = precision_ * r;
  if (!grad.empty()) Eigen::Map<Eigen::VectorXd>(grad.data(), dim()) = pr;
  return 0.5 * r.dot(pr);
}

std::vector<double> GaussianTarget::sample_initial(Stream& rng) const {
  Eigen::VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = rng.normal();
  Eigen::VectorXd x = mean_ + covariance_.llt().matrixL() * z;
  return {x.data(), x.data() + dim()};
}

QuarticTarget::QuarticTarget(int dim, double quartic, double coupling)
    : dim_(dim), quartic_(quartic), coupling_(coupling) {
  if (dim < 1) throw PreconditionError("dimension must be positive");
}

double QuarticTarget::potential(std::span<const double> x,
                                std::span<double> grad) const {
  double u = 0.0;
  for (int i = 0; i < dim_; ++i) {
    const double x2 = x[i] * x[i];
    u += 0.5 * x2 + 0.25 * quartic_ * x2 * x2;
    if (i + 1 < dim_) u += coupling_ * x[i] * x[i + 1];
  }
  if (!grad.empty()) {
    for (int i = 0; i < dim_; ++i) {
      double g = x[i] + quartic_ * x[i] * x[i] * x[i];
      if (i > 0) g += coupling_ * x[i - 1];
      if (i + 1 < dim_) g += coupling_ * x[i + 1];
      grad[i] = g;
    }
  }
  return u;
}

AffineTarget::AffineTarget(const Target& base, std::vector<double> scale,
                           std::vector<double> shift)
    : base_(base), scale_(std::move(scale)), shift_(std::move(shift)) {
  if (static_cast<int>(scale_.size()) != base_.dim() ||
      static_cast<int>(shift_.size()) != base_.dim()) {
    throw PreconditionError("affine map dimension mismatch");
  }
}

double AffineTarget::potential(std::span<const double> theta,
                               std::span<double> grad) const {
  const int d = dim();
  std::vector<double> x(d);
  for (int i = 0; i < d; ++i) x[i] = (theta[i] - shift_[i]) / scale_[i];
  const double u = base_.potential(x, grad);
  if (!grad.empty()) {
    for (int i = 0; i < d; ++i) grad[i] /= scale_[i];
  }
  return u;
}

std::vector<double> AffineTarget::sample_initial(Stream& rng) const {
  std::vector<double> x = base_.sample_initial(rng);
  for (int i = 0; i < dim(); ++i) x[i] = scale_[i] * x[i] + shift_[i];
  return x;
}

}  // namespace amsghmc
