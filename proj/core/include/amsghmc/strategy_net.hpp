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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "amsghmc/autodiff.hpp"
#include "amsghmc/rng.hpp"

namespace amsghmc {

struct NetConstants {
  double M_Q = 100.0;
  double M_D = 30.0;
  double c1 = 0.01;
  double c2 = 0.01;
  double leaky_slope = 0.01;
};

/// Adaptive statistics frozen at the end of training and reused at test time.
struct FrozenStats {
  bool valid = false;
  std::vector<double> category_variance;  // per category
  double mu_U = 0.0;
  double sigma_U = 1.0;
};

namespace net_detail {

template <class X>
struct Lift {
  template <class W>
  static X from(const W& w) {
    return X(w);
  }
};
template <class T>
struct Lift<ad::Dual<T>> {
  template <class W>
  static ad::Dual<T> from(const W& w) {
    return ad::Dual<T>(T(w), T(0.0));
  }
};

}  // namespace net_detail

// Input squashing. Each maps 0 to 0.
template <class X>
X squash_energy(const X& u_hat) {
  using ad::log;
  using ad::relu;
  X r = relu(u_hat + 1.0);
  return log(r * r + (std::numbers::e - 1.0)) - 1.0;
}
template <class X>
X squash_momentum(const X& p) {
  using ad::sigmoid;
  return 3.0 * sigmoid(p / 10.0) - 1.5;
}
template <class X>
X squash_gradient(const X& g) {
  using ad::sigmoid;
  return 3.0 * sigmoid(g / 30.0) - 1.5;
}

struct SquashedInputs {
  double i_U, i_p, i_G;
  std::vector<double> one_hot;
};

/// Throws ConfigError for an unknown category label.
SquashedInputs squash_inputs(double u_hat, double p, double grad_star,
                             const std::string& category,
                             const std::vector<std::string>& categories);

struct StrategyValues {
  double G;  // sigma_i (c1 + f_Q)
  double C;  // c2 + f_D
};

struct StrategyPartials {
  double dG_dtheta;
  double dC_dp;
  double dG_dp;
};

/// The two strategy networks. Both are MLPs with three hidden layers of ten
/// leaky-ReLU units. The Q network reads (i_U, i_p, one-hot); the D network
/// reads (i_U, i_p, i_G, one-hot). An optional shortcut (linear map plus
/// Gaussian RBF units) adds to each pre-activation output.
class StrategyNetworks {
 public:
  static constexpr int kHidden = 10;
  static constexpr int kLayers = 3;
  static constexpr int kRbfUnits = 8;

  StrategyNetworks() = default;
  StrategyNetworks(std::vector<std::string> categories, NetConstants constants,
                   bool shortcut, std::uint64_t init_seed);

  /// Network with every weight zero: f_Q = M_Q / 2 and f_D = M_D / 2.
  static StrategyNetworks zeros(std::vector<std::string> categories,
                                NetConstants constants, bool shortcut = false);

  const std::vector<std::string>& categories() const { return categories_; }
  int category_index(const std::string& name) const;
  const NetConstants& constants() const { return constants_; }
  bool has_shortcut() const { return shortcut_; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t num_weights() const { return weights_.size(); }

  /// Weight slots belonging to the shortcut (linear and RBF amplitudes).
  bool is_shortcut_weight(std::size_t k) const;
  bool shortcut_frozen() const { return shortcut_frozen_; }
  void set_shortcut_frozen(bool frozen) { shortcut_frozen_ = frozen; }
  bool rbf_initialized() const { return rbf_initialized_; }

  /// Picks RBF centers from observed (Q, D) input vectors, excluding the
  /// one-hot part, and sets the width to the median center distance.
  void initialize_rbf(const std::vector<std::vector<double>>& q_inputs,
                      const std::vector<std::vector<double>>& d_inputs,
                      Stream& rng);

  /// Raw f_Q = M_Q sigmoid(5 o_Q).
  template <class W, class X>
  X f_q(std::span<const W> w, const X& i_u, const X& i_p, int cat) const {
    const X in[2] = {i_u, i_p};
    return constants_.M_Q * sigmoid5(net_output(w, q_, in, cat));
  }

  /// Raw f_D = M_D sigmoid(5 o_D).
  template <class W, class X>
  X f_d(std::span<const W> w, const X& i_u, const X& i_p, const X& i_g,
        int cat) const {
    const X in[3] = {i_u, i_p, i_g};
    return constants_.M_D * sigmoid5(net_output(w, d_, in, cat));
  }

  StrategyValues forward(double u_hat, double p, double grad_star, int cat,
                         double sigma) const;
  /// du_dtheta is dU_hat/dtheta_i, the only theta_i dependence of f_Q.
  StrategyPartials partials(double u_hat, double p, double grad_star, int cat,
                            double sigma, double du_dtheta) const;

  /// Same networks with categories reordered: new category j is old
  /// category perm[j].
  StrategyNetworks permute_categories(const std::vector<int>& perm) const;

  FrozenStats& frozen_stats() { return stats_; }
  const FrozenStats& frozen_stats() const { return stats_; }

  void save(const std::string& path) const;
  static StrategyNetworks load(const std::string& path);
  std::string to_json() const;
  static StrategyNetworks from_json(const std::string& text);

 private:
  struct Layout {
    int n_cont = 0;            // continuous inputs
    std::size_t mlp = 0;       // offset of MLP weights
    std::size_t linear = 0;    // offset of shortcut linear weights
    std::size_t rbf_amp = 0;   // offset of RBF amplitudes
    std::size_t end = 0;
    std::vector<double> centers;  // kRbfUnits x n_cont
    double width = 1.0;
  };

  void build_layout();
  int n_in(const Layout& l) const {
    return l.n_cont + static_cast<int>(categories_.size());
  }

  template <class X>
  static X sigmoid5(const X& o) {
    using ad::sigmoid;
    return sigmoid(5.0 * o);
  }

  template <class W, class X>
  X net_output(std::span<const W> w, const Layout& l, const X* in,
               int cat) const;

  std::vector<std::string> categories_;
  NetConstants constants_;
  bool shortcut_ = false;
  bool shortcut_frozen_ = false;
  bool rbf_initialized_ = false;
  Layout q_, d_;
  std::vector<double> weights_;
  FrozenStats stats_;
};

template <class W, class X>
X StrategyNetworks::net_output(std::span<const W> w, const Layout& l,
                               const X* in, int cat) const {
  using ad::exp;
  using ad::leaky_relu;
  using Lift = net_detail::Lift<X>;
  const double slope = constants_.leaky_slope;

  // Each unit stores [continuous inputs, one-hot inputs, bias].
  std::size_t k = l.mlp;
  X h[kHidden];
  X prev[kHidden];
  for (int o = 0; o < kHidden; ++o) {
    const std::size_t base = k + static_cast<std::size_t>(o) * (n_in(l) + 1);
    X acc = Lift::from(w[base + n_in(l)]);
    for (int j = 0; j < l.n_cont; ++j) acc = acc + w[base + j] * in[j];
    acc = acc + Lift::from(w[base + l.n_cont + cat]);
    h[o] = leaky_relu(acc, slope);
  }
  k += static_cast<std::size_t>(kHidden) * (n_in(l) + 1);
  for (int layer = 1; layer < kLayers; ++layer) {
    for (int o = 0; o < kHidden; ++o) prev[o] = h[o];
    for (int o = 0; o < kHidden; ++o) {
      const std::size_t base = k + static_cast<std::size_t>(o) * (kHidden + 1);
      X acc = Lift::from(w[base + kHidden]);
      for (int j = 0; j < kHidden; ++j) acc = acc + w[base + j] * prev[j];
      h[o] = leaky_relu(acc, slope);
    }
    k += static_cast<std::size_t>(kHidden) * (kHidden + 1);
  }
  X out = Lift::from(w[k + kHidden]);
  for (int j = 0; j < kHidden; ++j) out = out + w[k + j] * h[j];

  if (shortcut_) {
    const std::size_t lin = l.linear;
    for (int j = 0; j < l.n_cont; ++j) out = out + w[lin + j] * in[j];
    out = out + Lift::from(w[lin + l.n_cont + cat]);
    if (rbf_initialized_) {
      const double inv = -0.5 / (l.width * l.width);
      for (int u = 0; u < kRbfUnits; ++u) {
        const double* c = &l.centers[static_cast<std::size_t>(u) * l.n_cont];
        X d2 = (in[0] - c[0]) * (in[0] - c[0]);
        for (int j = 1; j < l.n_cont; ++j) d2 = d2 + (in[j] - c[j]) * (in[j] - c[j]);
        out = out + w[l.rbf_amp + u] * exp(d2 * inv);
      }
    }
  }
  return out;
}

/// Warnings when eta M_Q is far from 3 or eta M_D exceeds 1.
std::vector<std::string> check_step_scale(double eta, const NetConstants& c);

}  // namespace amsghmc
