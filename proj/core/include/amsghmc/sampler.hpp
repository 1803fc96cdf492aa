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
#include <span>
#include <string>
#include <vector>

#include "amsghmc/adaptive_stats.hpp"
#include "amsghmc/rng.hpp"
#include "amsghmc/strategy_net.hpp"
#include "amsghmc/target.hpp"

namespace amsghmc {

enum class SamplerKind { kHmc, kSghmc, kAmSghmc };

std::string to_string(SamplerKind kind);
/// Accepts "hmc", "sghmc" and "am-sghmc". Throws ConfigError otherwise.
SamplerKind parse_sampler(const std::string& name);

/// Position, momentum and the cached potential at the position.
struct ChainState {
  std::vector<double> theta;
  std::vector<double> p;
  double U = 0.0;
  std::vector<double> grad;
  bool diverged = false;
};

/// Builds a state and evaluates U and its gradient at theta.
ChainState make_chain(const Target& target, std::vector<double> theta,
                      std::vector<double> p);
/// Re-evaluates the cache. Flags divergence on any non-finite value.
void refresh(ChainState& state, const Target& target);

struct NormalizedInputs {
  double u_hat = 0.0;
  std::vector<double> du_hat;     // dU_hat / dtheta_i
  std::vector<double> grad_star;  // sigma_i dU_hat / dtheta_i
};

/// U_hat = (U - mu_U) / (sqrt(2D) sigma_U), D = grad.size().
NormalizedInputs normalize_inputs(double U, std::span<const double> grad,
                                  std::span<const double> sigma, double mu_U,
                                  double sigma_U);
NormalizedInputs normalize_inputs(double U, std::span<const double> grad,
                                  const AdaptiveStats& stats);

/// SGHMC with constant diagonal G and C:
///   p' = (1 - eta C) p - eta G grad U + N(0, 2 eta C)
///   theta' = theta + eta G p'
void sghmc_step(ChainState& state, const Target& target, double eta,
                std::span<const double> G, std::span<const double> C,
                Stream& rng);

/// Everything an AM-SGHMC step needs besides the state and the weights.
struct AmStepParams {
  const StrategyNetworks* nets = nullptr;
  std::span<const int> categories;  // network category of each dimension
  std::span<const double> sigma;
  double mu_U = 0.0;
  double sigma_U = 1.0;
  double eta = 0.0;
  /// Treat the correction terms as constants with respect to the weights.
  bool detach_gamma = false;
};

/// One AM-SGHMC update of every dimension with the given standard normal
/// noise. W = double samples; W = ad::Var records the new state as a
/// function of the weights on their tape.
template <class W>
void am_sghmc_update(std::span<const W> weights, const AmStepParams& params,
                     std::span<const double> theta, std::span<const double> p,
                     double U, std::span<const double> grad,
                     std::span<const double> noise, std::vector<W>& theta_next,
                     std::vector<W>& p_next);

/// Network category of each target dimension, matched by name.
/// Throws ConfigError when the networks lack one of the target's categories.
std::vector<int> network_categories(const Target& target,
                                    const StrategyNetworks& nets);

void am_sghmc_step(ChainState& state, const Target& target,
                   const StrategyNetworks& nets,
                   std::span<const int> categories, const AdaptiveStats& stats,
                   double eta, Stream& rng);

/// L leapfrog steps of size eps with an identity mass matrix.
void leapfrog(const Target& target, std::vector<double>& theta,
              std::vector<double>& p, double& U, std::vector<double>& grad,
              double eps, int L);

struct HmcResult {
  bool accepted = false;
  double accept_prob = 0.0;
};

/// Fresh N(0, I) momentum, L leapfrog steps, Metropolis correction on
/// H = U + p.p / 2. Non-finite H is rejected.
HmcResult hmc_step(ChainState& state, const Target& target, double eps,
                   int L, Stream& rng);

/// Nesterov dual averaging of log step size toward a target acceptance.
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target_accept);
  void update(double accept_prob);
  double step() const { return step_; }
  /// Averaged step size to use after adaptation.
  double final_step() const { return std::exp(log_avg_); }

 private:
  double mu_, target_;
  double h_bar_ = 0.0;
  double log_avg_ = 0.0;
  double step_;
  int m_ = 0;
};

struct SpsaConfig {
  int steps = 4000;
  /// Size of the first move; sets the gain a from the initial gradient.
  double initial_step = 0.1;
  double perturbation = 0.01;
  double alpha = 0.602;
  double gamma = 0.101;
  double stability_fraction = 0.1;
};

/// Simultaneous-perturbation minimization of U. Returns the lowest-U iterate.
std::vector<double> spsa_optimize(const Target& target,
                                  std::vector<double> start,
                                  const SpsaConfig& config, Stream& rng);

struct RunConfig {
  SamplerKind sampler = SamplerKind::kAmSghmc;
  int chains = 32;
  int steps = 9000;
  int burn_in = 3000;
  int thin = 1;
  std::uint64_t seed = 0;

  double eta = 0.03;  // SGHMC and AM-SGHMC step size
  double sghmc_G = 1.0;
  double sghmc_C = 0.5;

  double hmc_step = 0.01;
  int hmc_leapfrog = 10;
  double hmc_target_accept = 0.7;
  bool hmc_adapt = true;
  int spsa_steps = 4000;

  /// Adaptive estimates update for window_start <= t < window_end.
  int window_start = 300;
  int window_end = 2800;
  AdaptiveConfig stats;
  /// Multiplies the default prior variances taken from the checkpoint.
  double v0_scale = 1.0;

  /// Optional K x D initial positions; drawn from the target when empty.
  std::vector<std::vector<double>> initial_theta;
};

struct StatsSnapshot {
  std::vector<double> sigma;
  double mu_U = 0.0;
  double sigma_U = 1.0;
  int updates = 0;
};

struct Trace {
  std::string sampler;
  int chains = 0;  // requested chain count K
  int steps = 0;
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;
  int dim = 0;

  std::vector<int> chain_ids;  // original index of each kept chain
  std::vector<std::vector<std::vector<double>>> samples;  // [chain][s][i]
  std::vector<std::vector<double>> energies;               // [chain][s]
  std::vector<int> diverged;

  StatsSnapshot stats;
  double acceptance = 0.0;  // HMC only
  std::vector<double> step_sizes;

  int samples_per_chain() const {
    return samples.empty() ? 0 : static_cast<int>(samples.front().size());
  }
  /// Step index (1-based) of sample s.
  int step_of(int s) const { return burn_in + (s + 1) * thin; }
};

/// Initial state of chain k: drawn from the target with stream (seed, k).
ChainState initial_chain(const Target& target, std::uint64_t seed, int k);

/// Runs K chains for T steps and keeps every thin-th post-burn-in state.
/// Diverged chains are dropped; throws DivergenceError when none remain.
/// `nets` is required for AM-SGHMC.
Trace run_chains(const Target& target, const RunConfig& config,
                 const StrategyNetworks* nets = nullptr);

/// One CSV per chain (step, theta_1..theta_D, U) plus trace.json.
void write_trace(const Trace& trace, const std::string& directory);
Trace read_trace(const std::string& directory);

}  // namespace amsghmc
