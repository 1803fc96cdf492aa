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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "amsghmc/error.hpp"

namespace amsghmc {

using Json = nlohmann::json;

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kHmc:
      return "hmc";
    case SamplerKind::kSghmc:
      return "sghmc";
    case SamplerKind::kAmSghmc:
      return "am-sghmc";
  }
  return "unknown";
}

SamplerKind parse_sampler(const std::string& name) {
  if (name == "hmc") return SamplerKind::kHmc;
  if (name == "sghmc") return SamplerKind::kSghmc;
  if (name == "am-sghmc") return SamplerKind::kAmSghmc;
  throw ConfigError("unknown sampler '" + name + "'");
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

std::vector<double> normals(Stream& rng, int n) {
  std::vector<double> out(n);
  for (double& x : out) x = rng.normal();
  return out;
}

}  // namespace

ChainState make_chain(const Target& target, std::vector<double> theta,
                      std::vector<double> p) {
  if (static_cast<int>(theta.size()) != target.dim() ||
      p.size() != theta.size()) {
    throw PreconditionError("state dimension does not match the target");
  }
  ChainState s;
  s.theta = std::move(theta);
  s.p = std::move(p);
  refresh(s, target);
  return s;
}

void refresh(ChainState& state, const Target& target) {
  state.grad.assign(state.theta.size(), 0.0);
  if (!all_finite(state.theta) || !all_finite(state.p)) {
    state.diverged = true;
    return;
  }
  state.U = target.potential(state.theta, state.grad);
  if (!std::isfinite(state.U) || !all_finite(state.grad)) state.diverged = true;
}

NormalizedInputs normalize_inputs(double U, std::span<const double> grad,
                                  std::span<const double> sigma, double mu_U,
                                  double sigma_U) {
  if (!(sigma_U > 0.0)) throw PreconditionError("sigma_U must be positive");
  if (sigma.size() != grad.size()) throw PreconditionError("dimension mismatch");
  const double scale = std::sqrt(2.0 * static_cast<double>(grad.size())) * sigma_U;
  NormalizedInputs out;
  out.u_hat = (U - mu_U) / scale;
  out.du_hat.resize(grad.size());
  out.grad_star.resize(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.du_hat[i] = grad[i] / scale;
    out.grad_star[i] = sigma[i] * out.du_hat[i];
  }
  return out;
}

NormalizedInputs normalize_inputs(double U, std::span<const double> grad,
                                  const AdaptiveStats& stats) {
  return normalize_inputs(U, grad, stats.sigmas(), stats.mu_U(),
                          stats.sigma_U());
}

void sghmc_step(ChainState& state, const Target& target, double eta,
                std::span<const double> G, std::span<const double> C,
                Stream& rng) {
  const std::size_t D = state.theta.size();
  if (!(eta > 0.0)) throw PreconditionError("step size must be positive");
  if (G.size() != D || C.size() != D) {
    throw PreconditionError("G and C must match the state dimension");
  }
  for (double c : C) {
    if (!(c >= 0.0)) throw PreconditionError("C must be non-negative");
  }
  const std::vector<double> xi = normals(rng, static_cast<int>(D));
  for (std::size_t i = 0; i < D; ++i) {
    const double pn = (1.0 - eta * C[i]) * state.p[i] -
                      eta * G[i] * state.grad[i] +
                      std::sqrt(2.0 * eta * C[i]) * xi[i];
    state.p[i] = pn;
    state.theta[i] = state.theta[i] + eta * G[i] * pn;
  }
  refresh(state, target);
}

template <class W>
void am_sghmc_update(std::span<const W> weights, const AmStepParams& params,
                     std::span<const double> theta, std::span<const double> p,
                     double U, std::span<const double> grad,
                     std::span<const double> noise, std::vector<W>& theta_next,
                     std::vector<W>& p_next) {
  using std::sqrt;
  using ad::sqrt;
  using X = ad::Dual<W>;
  const StrategyNetworks& nets = *params.nets;
  const NetConstants& k = nets.constants();
  const std::size_t D = theta.size();
  const double eta = params.eta;
  const double scale = std::sqrt(2.0 * static_cast<double>(D)) * params.sigma_U;
  const double u_hat = (U - params.mu_U) / scale;
  const X iu(W(squash_energy(u_hat)), W(0.0));

  theta_next.resize(D);
  p_next.resize(D);
  for (std::size_t i = 0; i < D; ++i) {
    const double sigma = params.sigma[i];
    const int cat = params.categories[i];
    const double du = grad[i] / scale;
    const X ig(W(squash_gradient(sigma * du)), W(0.0));

    // G and dG/dtheta_i at z_t; theta_i enters only through U_hat.
    const X fq = nets.f_q(weights, squash_energy(X(W(u_hat), W(du))),
                          X(W(squash_momentum(p[i])), W(0.0)), cat);
    const W G = sigma * (k.c1 + fq.primal);
    W dG = sigma * fq.tangent;

    // C and dC/dp_i at z_t.
    const X fd = nets.f_d(weights, iu, squash_momentum(X(W(p[i]), W(1.0))), ig,
                          cat);
    const W C = k.c2 + fd.primal;
    W dC = fd.tangent;
    if (params.detach_gamma) {
      dG = W(ad::value(dG));
      dC = W(ad::value(dC));
    }

    const W pn = (1.0 - eta * C) * p[i] - eta * G * grad[i] +
                 sqrt(2.0 * eta * C) * noise[i] + eta * (dG + dC);

    // G and dG/dp_i at (theta_t, p_{t+1}).
    const X fq_hat = nets.f_q(weights, iu, squash_momentum(X(pn, W(1.0))), cat);
    const W G_hat = sigma * (k.c1 + fq_hat.primal);
    W dG_hat = sigma * fq_hat.tangent;
    if (params.detach_gamma) dG_hat = W(ad::value(dG_hat));

    p_next[i] = pn;
    theta_next[i] = theta[i] + eta * G_hat * pn - eta * dG_hat;
  }
}

template void am_sghmc_update<double>(std::span<const double>,
                                      const AmStepParams&,
                                      std::span<const double>,
                                      std::span<const double>, double,
                                      std::span<const double>,
                                      std::span<const double>,
                                      std::vector<double>&,
                                      std::vector<double>&);
template void am_sghmc_update<ad::Var>(std::span<const ad::Var>,
                                       const AmStepParams&,
                                       std::span<const double>,
                                       std::span<const double>, double,
                                       std::span<const double>,
                                       std::span<const double>,
                                       std::vector<ad::Var>&,
                                       std::vector<ad::Var>&);

std::vector<int> network_categories(const Target& target,
                                    const StrategyNetworks& nets) {
  const std::vector<std::string> names = target.category_names();
  std::vector<int> out;
  for (int c : target.categories()) {
    if (c < 0 || c >= static_cast<int>(names.size())) {
      throw PreconditionError("target category index out of range");
    }
    out.push_back(nets.category_index(names[c]));
  }
  return out;
}

void am_sghmc_step(ChainState& state, const Target& target,
                   const StrategyNetworks& nets,
                   std::span<const int> categories, const AdaptiveStats& stats,
                   double eta, Stream& rng) {
  const int D = static_cast<int>(state.theta.size());
  if (!(eta > 0.0)) throw PreconditionError("step size must be positive");
  if (static_cast<int>(categories.size()) != D || stats.dim() != D) {
    throw PreconditionError("categories and statistics must match the state");
  }
  AmStepParams params;
  params.nets = &nets;
  params.categories = categories;
  params.sigma = stats.sigmas();
  params.mu_U = stats.mu_U();
  params.sigma_U = stats.sigma_U();
  params.eta = eta;
  const std::vector<double> xi = normals(rng, D);
  std::vector<double> theta_next, p_next;
  am_sghmc_update<double>(nets.weights(), params, state.theta, state.p,
                          state.U, state.grad, xi, theta_next, p_next);
  state.theta = std::move(theta_next);
  state.p = std::move(p_next);
  refresh(state, target);
}

void leapfrog(const Target& target, std::vector<double>& theta,
              std::vector<double>& p, double& U, std::vector<double>& grad,
              double eps, int L) {
  const std::size_t D = theta.size();
  for (int l = 0; l < L; ++l) {
    for (std::size_t i = 0; i < D; ++i) p[i] -= 0.5 * eps * grad[i];
    for (std::size_t i = 0; i < D; ++i) theta[i] += eps * p[i];
    if (!all_finite(theta)) {
      U = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    U = target.potential(theta, grad);
    for (std::size_t i = 0; i < D; ++i) p[i] -= 0.5 * eps * grad[i];
  }
}

HmcResult hmc_step(ChainState& state, const Target& target, double eps,
                   int L, Stream& rng) {
  if (!(eps > 0.0) || L < 1) {
    throw PreconditionError("HMC needs a positive step size and L >= 1");
  }
  const int D = static_cast<int>(state.theta.size());
  state.p = normals(rng, D);
  auto energy = [](double U, const std::vector<double>& p) {
    double k = 0.0;
    for (double x : p) k += x * x;
    return U + 0.5 * k;
  };
  const double h0 = energy(state.U, state.p);
  std::vector<double> theta = state.theta, p = state.p, grad = state.grad;
  double U = state.U;
  leapfrog(target, theta, p, U, grad, eps, L);
  const double h1 = energy(U, p);
  const double u = rng.uniform();

  HmcResult r;
  if (!std::isfinite(h1) || !all_finite(grad)) return r;
  r.accept_prob = std::min(1.0, std::exp(h0 - h1));
  if (u < r.accept_prob) {
    r.accepted = true;
    state.theta = std::move(theta);
    state.p = std::move(p);
    state.U = U;
    state.grad = std::move(grad);
  }
  return r;
}

namespace {
constexpr double kDaGamma = 0.05;
constexpr double kDaT0 = 10.0;
constexpr double kDaKappa = 0.75;
}  // namespace

DualAveraging::DualAveraging(double initial_step, double target_accept)
    : mu_(std::log(10.0 * initial_step)),
      target_(target_accept),
      step_(initial_step) {
  if (!(initial_step > 0.0) || !(target_accept > 0.0 && target_accept < 1.0)) {
    throw PreconditionError("invalid dual averaging settings");
  }
}

void DualAveraging::update(double accept_prob) {
  ++m_;
  const double w = 1.0 / (m_ + kDaT0);
  h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_prob);
  const double log_step = mu_ - std::sqrt(static_cast<double>(m_)) / kDaGamma * h_bar_;
  const double decay = std::pow(static_cast<double>(m_), -kDaKappa);
  log_avg_ = decay * log_step + (1.0 - decay) * log_avg_;
  step_ = std::exp(log_step);
}

std::vector<double> spsa_optimize(const Target& target,
                                  std::vector<double> start,
                                  const SpsaConfig& config, Stream& rng) {
  if (config.steps < 1) throw PreconditionError("SPSA needs steps >= 1");
  if (!(config.perturbation > 0.0) || !(config.initial_step > 0.0)) {
    throw PreconditionError("SPSA gains must be positive");
  }
  const std::size_t D = start.size();
  auto value = [&](const std::vector<double>& x) {
    return target.potential(x, {});
  };
  std::vector<double> delta(D), plus(D), minus(D);
  auto perturb = [&](double c) {
    for (std::size_t i = 0; i < D; ++i) {
      delta[i] = (rng.next() & 1U) ? 1.0 : -1.0;
      plus[i] = start[i] + c * delta[i];
      minus[i] = start[i] - c * delta[i];
    }
    return value(plus) - value(minus);
  };

  std::vector<double> best = start;
  double best_u = value(start);

  // Gain a chosen so the first move has roughly the requested size.
  constexpr int kCalibration = 10;
  const double A = config.stability_fraction * config.steps;
  double magnitude = 0.0;
  int used = 0;
  for (int j = 0; j < kCalibration; ++j) {
    const double d = perturb(config.perturbation);
    if (std::isfinite(d)) {
      magnitude += std::abs(d) / (2.0 * config.perturbation);
      ++used;
    }
  }
  if (used == 0 || !(magnitude > 0.0)) return best;
  magnitude /= used;
  const double a = config.initial_step * std::pow(A + 1.0, config.alpha) / magnitude;

  std::vector<double> next(D);
  for (int k = 0; k < config.steps; ++k) {
    const double ak = a / std::pow(k + 1.0 + A, config.alpha);
    const double ck = config.perturbation / std::pow(k + 1.0, config.gamma);
    const double d = perturb(ck);
    if (!std::isfinite(d)) continue;
    for (std::size_t i = 0; i < D; ++i) {
      next[i] = start[i] - ak * d / (2.0 * ck * delta[i]);
    }
    const double u = value(next);
    if (!std::isfinite(u)) continue;
    start = next;
    if (u < best_u) {
      best_u = u;
      best = start;
    }
  }
  return best;
}

ChainState initial_chain(const Target& target, std::uint64_t seed, int k) {
  Stream rng(seed, static_cast<std::uint64_t>(k));
  std::vector<double> theta = target.sample_initial(rng);
  std::vector<double> p = normals(rng, target.dim());
  return make_chain(target, std::move(theta), std::move(p));
}

namespace {

void validate(const RunConfig& c, int dim) {
  if (c.chains < 1) throw ConfigError("chains must be >= 1");
  if (c.steps < 1) throw ConfigError("steps must be >= 1");
  if (c.burn_in < 0 || c.burn_in >= c.steps) {
    throw ConfigError("burn_in must lie in [0, steps)");
  }
  if (c.thin < 1) throw ConfigError("thin must be >= 1");
  if (!(c.eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(c.hmc_step > 0.0) || c.hmc_leapfrog < 1) {
    throw ConfigError("HMC needs a positive step and at least one leapfrog");
  }
  if (!(c.sghmc_C >= 0.0) || !(c.sghmc_G > 0.0)) {
    throw ConfigError("SGHMC needs G > 0 and C >= 0");
  }
  if (!(c.v0_scale > 0.0)) throw ConfigError("v0_scale must be positive");
  if (!c.initial_theta.empty()) {
    if (static_cast<int>(c.initial_theta.size()) != c.chains) {
      throw ConfigError("initial_theta needs one row per chain");
    }
    for (const auto& row : c.initial_theta) {
      if (static_cast<int>(row.size()) != dim) {
        throw ConfigError("initial_theta row has the wrong dimension");
      }
    }
  }
}

void gather(const std::vector<ChainState>& states, std::vector<double>& theta,
            std::vector<double>& u) {
  theta.clear();
  u.clear();
  for (const ChainState& s : states) {
    if (s.diverged) continue;
    theta.insert(theta.end(), s.theta.begin(), s.theta.end());
    u.push_back(s.U);
  }
}

}  // namespace

Trace run_chains(const Target& target, const RunConfig& config,
                 const StrategyNetworks* nets) {
  const int D = target.dim();
  validate(config, D);
  const int K = config.chains;
  const bool am = config.sampler == SamplerKind::kAmSghmc;
  const bool hmc = config.sampler == SamplerKind::kHmc;
  if (am && nets == nullptr) {
    throw ConfigError("am-sghmc needs strategy networks");
  }

  std::vector<int> cats;
  AdaptiveConfig stats_cfg = config.stats;
  if (am) {
    cats = network_categories(target, *nets);
    const FrozenStats& frozen = nets->frozen_stats();
    if (stats_cfg.v0_star.empty() && frozen.valid) {
      for (int i = 0; i < D; ++i) {
        stats_cfg.v0_star.push_back(frozen.category_variance.at(cats[i]) *
                                    config.v0_scale);
      }
    }
  }

  std::vector<Stream> rng;
  std::vector<ChainState> states;
  rng.reserve(K);
  states.reserve(K);
  for (int k = 0; k < K; ++k) {
    rng.emplace_back(config.seed, static_cast<std::uint64_t>(k));
    std::vector<double> theta = config.initial_theta.empty()
                                    ? target.sample_initial(rng[k])
                                    : config.initial_theta[k];
    std::vector<double> p = normals(rng[k], D);
    if (hmc && config.spsa_steps > 0) {
      SpsaConfig sc;
      sc.steps = config.spsa_steps;
      theta = spsa_optimize(target, std::move(theta), sc, rng[k]);
    }
    states.push_back(make_chain(target, std::move(theta), std::move(p)));
  }

  AdaptiveStats stats(D, stats_cfg);
  std::vector<double> batch_theta, batch_u;
  if (am) {
    gather(states, batch_theta, batch_u);
    if (batch_u.empty()) throw DivergenceError("every chain started diverged");
    stats.initialize(batch_theta, batch_u,
                     static_cast<int>(batch_u.size()));
    if (config.window_end <= config.window_start) {
      // No test-time window: the training statistics are used as they are.
      const FrozenStats& frozen = nets->frozen_stats();
      if (frozen.valid && config.stats.v0_star.empty()) {
        std::vector<double> sigma(D);
        for (int i = 0; i < D; ++i) sigma[i] = std::sqrt(stats_cfg.v0_star[i]);
        stats.set(std::move(sigma), frozen.mu_U, frozen.sigma_U);
      }
      stats.freeze();
    }
  }

  std::vector<DualAveraging> adapt;
  std::vector<double> step_size(K, config.hmc_step);
  if (hmc) {
    for (int k = 0; k < K; ++k) {
      adapt.emplace_back(config.hmc_step, config.hmc_target_accept);
    }
  }
  const std::vector<double> G(D, config.sghmc_G), C(D, config.sghmc_C);

  Trace trace;
  trace.sampler = to_string(config.sampler);
  trace.chains = K;
  trace.steps = config.steps;
  trace.burn_in = config.burn_in;
  trace.thin = config.thin;
  trace.seed = config.seed;
  trace.dim = D;
  std::vector<std::vector<std::vector<double>>> samples(K);
  std::vector<std::vector<double>> energies(K);
  long accepted = 0, proposals = 0;

  for (int t = 1; t <= config.steps; ++t) {
    for (int k = 0; k < K; ++k) {
      ChainState& s = states[k];
      if (s.diverged) continue;
      switch (config.sampler) {
        case SamplerKind::kSghmc:
          sghmc_step(s, target, config.eta, G, C, rng[k]);
          break;
        case SamplerKind::kAmSghmc:
          am_sghmc_step(s, target, *nets, cats, stats, config.eta, rng[k]);
          break;
        case SamplerKind::kHmc: {
          const HmcResult r =
              hmc_step(s, target, step_size[k], config.hmc_leapfrog, rng[k]);
          if (t <= config.burn_in && config.hmc_adapt) {
            adapt[k].update(r.accept_prob);
            step_size[k] = t == config.burn_in ? adapt[k].final_step()
                                               : adapt[k].step();
          } else {
            ++proposals;
            accepted += r.accepted;
          }
          break;
        }
      }
    }
    if (am && !stats.frozen() && t >= config.window_start &&
        t < config.window_end) {
      gather(states, batch_theta, batch_u);
      if (!batch_u.empty()) {
        stats.update(batch_theta, batch_u, static_cast<int>(batch_u.size()));
      }
      if (t + 1 >= config.window_end) stats.freeze();
    }
    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      for (int k = 0; k < K; ++k) {
        if (states[k].diverged) continue;
        samples[k].push_back(states[k].theta);
        energies[k].push_back(states[k].U);
      }
    }
  }

  for (int k = 0; k < K; ++k) {
    if (states[k].diverged) {
      trace.diverged.push_back(k);
      continue;
    }
    trace.chain_ids.push_back(k);
    trace.samples.push_back(std::move(samples[k]));
    trace.energies.push_back(std::move(energies[k]));
  }
  if (trace.chain_ids.empty()) {
    throw DivergenceError("all " + std::to_string(K) +
                          " chains diverged (non-finite state or energy)");
  }
  if (am) {
    trace.stats = {stats.sigmas(), stats.mu_U(), stats.sigma_U(),
                   stats.steps()};
  }
  if (hmc) {
    trace.acceptance =
        proposals > 0 ? static_cast<double>(accepted) / proposals : 0.0;
    trace.step_sizes = step_size;
  }
  return trace;
}

void write_trace(const Trace& trace, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory + ": " + ec.message());
  for (std::size_t c = 0; c < trace.samples.size(); ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "chain_%03d.csv", trace.chain_ids[c]);
    const fs::path path = fs::path(directory) / name;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step";
    for (int i = 1; i <= trace.dim; ++i) out << ",theta_" << i;
    out << ",U\n";
    char buf[32];
    for (std::size_t s = 0; s < trace.samples[c].size(); ++s) {
      out << trace.step_of(static_cast<int>(s));
      for (double x : trace.samples[c][s]) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g", trace.energies[c][s]);
      out << ',' << buf << '\n';
    }
  }
  Json meta{{"version", 1},
            {"sampler", trace.sampler},
            {"chains", trace.chains},
            {"steps", trace.steps},
            {"burn_in", trace.burn_in},
            {"thin", trace.thin},
            {"seed", trace.seed},
            {"dim", trace.dim},
            {"chain_ids", trace.chain_ids},
            {"diverged", trace.diverged},
            {"acceptance", trace.acceptance},
            {"step_sizes", trace.step_sizes},
            {"stats",
             {{"sigma", trace.stats.sigma},
              {"mu_U", trace.stats.mu_U},
              {"sigma_U", trace.stats.sigma_U},
              {"updates", trace.stats.updates}}}};
  const fs::path path = fs::path(directory) / "trace.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << meta.dump(2) << '\n';
}

Trace read_trace(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path meta_path = fs::path(directory) / "trace.json";
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot read " + meta_path.string());
  Trace t;
  try {
    const Json meta = Json::parse(in);
    if (meta.at("version").get<int>() != 1) {
      throw IoError("unsupported trace version");
    }
    t.sampler = meta.at("sampler").get<std::string>();
    t.chains = meta.at("chains").get<int>();
    t.steps = meta.at("steps").get<int>();
    t.burn_in = meta.at("burn_in").get<int>();
    t.thin = meta.at("thin").get<int>();
    t.seed = meta.at("seed").get<std::uint64_t>();
    t.dim = meta.at("dim").get<int>();
    t.chain_ids = meta.at("chain_ids").get<std::vector<int>>();
    t.diverged = meta.at("diverged").get<std::vector<int>>();
    t.acceptance = meta.at("acceptance").get<double>();
    t.step_sizes = meta.at("step_sizes").get<std::vector<double>>();
    const Json& st = meta.at("stats");
    t.stats.sigma = st.at("sigma").get<std::vector<double>>();
    t.stats.mu_U = st.at("mu_U").get<double>();
    t.stats.sigma_U = st.at("sigma_U").get<double>();
    t.stats.updates = st.at("updates").get<int>();
  } catch (const Json::exception& e) {
    throw IoError("malformed trace metadata: " + std::string(e.what()));
  }

  for (int id : t.chain_ids) {
    char name[32];
    std::snprintf(name, sizeof name, "chain_%03d.csv", id);
    const fs::path path = fs::path(directory) / name;
    std::ifstream csv(path);
    if (!csv) throw IoError("cannot read " + path.string());
    std::string line;
    std::getline(csv, line);
    std::vector<std::vector<double>> rows;
    std::vector<double> us;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(ss, cell, ',')) {
        try {
          vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw IoError("bad number '" + cell + "' in " + path.string());
        }
      }
      if (static_cast<int>(vals.size()) != t.dim + 2) {
        throw IoError("wrong column count in " + path.string());
      }
      rows.emplace_back(vals.begin() + 1, vals.end() - 1);
      us.push_back(vals.back());
    }
    t.samples.push_back(std::move(rows));
    t.energies.push_back(std::move(us));
  }
  return t;
}

}  // namespace amsghmc
