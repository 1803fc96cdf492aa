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

#include "amsghmc/training.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "amsghmc/error.hpp"

namespace amsghmc {
namespace {

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      d.push_back((x.row(a) - x.row(b)).norm());
    }
  }
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + mid));
  }
  return med > 0.0 ? med : 1.0;
}

// Log density at x[row] of a Gaussian KDE over x with a diagonal Silverman
// bandwidth.
double silverman_log_density(const Eigen::MatrixXd& x, Eigen::Index row) {
  const Eigen::Index n = x.rows();
  const Eigen::Index D = x.cols();
  const double dd = static_cast<double>(D);
  const double factor = std::pow(4.0 / (dd + 2.0), 2.0 / (dd + 4.0)) *
                        std::pow(static_cast<double>(n), -2.0 / (dd + 4.0));
  Eigen::VectorXd h2(D);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  for (Eigen::Index i = 0; i < D; ++i) {
    const double var = n > 1 ? (x.col(i).array() - mean(i)).square().sum() /
                                   static_cast<double>(n - 1)
                             : 0.0;
    h2(i) = factor * std::max(var, 1e-12);
  }
  const double log_norm = -0.5 * dd * std::log(2.0 * std::numbers::pi) -
                          0.5 * h2.array().log().sum();
  std::vector<double> terms(static_cast<std::size_t>(n));
  double peak = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double q =
        ((x.row(row) - x.row(j)).array().square() / h2.transpose().array())
            .sum();
    terms[j] = -0.5 * q;
    peak = std::max(peak, terms[j]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - peak);
  return log_norm + peak + std::log(s / static_cast<double>(n));
}

}  // namespace

SteinResult stein_gradient(const Eigen::MatrixXd& samples,
                           const SteinOptions& options) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw PreconditionError("Stein estimator needs two samples");
  if (!samples.allFinite()) {
    throw PreconditionError("Stein estimator given non-finite samples");
  }
  SteinResult r;
  r.bandwidth = median_pairwise_distance(samples);
  const double h2 = r.bandwidth * r.bandwidth;

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    K(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double v =
          std::exp(-0.5 * (samples.row(a) - samples.row(b)).squaredNorm() / h2);
      K(a, b) = v;
      K(b, a) = v;
    }
  }
  // Row i: sum_j K_ij (x_i - x_j) / h^2.
  Eigen::MatrixXd grad_k =
      (K.rowwise().sum().asDiagonal() * samples - K * samples) / h2;

  r.ridge = options.ridge * K.trace() / static_cast<double>(n);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += r.ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      r.scores = -llt.solve(grad_k);
      if (r.scores.allFinite()) return r;
    }
    r.ridge = r.ridge > 0.0 ? 10.0 * r.ridge : 1e-8;
    r.warnings.push_back("kernel matrix not positive definite; ridge raised to " +
                         std::to_string(r.ridge));
  }
  throw EvaluationError("Stein kernel system could not be solved", -1);
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate),
      b1_(beta1),
      b2_(beta2),
      eps_(epsilon),
      m_(size, 0.0),
      v_(size, 0.0) {
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("invalid Adam settings");
  }
}

void Adam::step(std::vector<double>& weights, std::span<const double> grad) {
  if (weights.size() != m_.size() || grad.size() != m_.size()) {
    throw PreconditionError("Adam shapes do not match");
  }
  ++t_;
  b1t_ *= b1_;
  b2t_ *= b2_;
  for (std::size_t k = 0; k < m_.size(); ++k) {
    m_[k] = b1_ * m_[k] + (1.0 - b1_) * grad[k];
    v_[k] = b2_ * v_[k] + (1.0 - b2_) * grad[k] * grad[k];
    const double m_hat = m_[k] / (1.0 - b1t_);
    const double v_hat = v_[k] / (1.0 - b2t_);
    weights[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(std::vector<double> theta, std::vector<double> p) {
  Entry e{std::move(theta), std::move(p)};
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(e));
  } else {
    entries_[next_] = std::move(e);
    next_ = (next_ + 1) % capacity_;
  }
}

const ReplayBuffer::Entry& ReplayBuffer::draw(Stream& rng) const {
  if (entries_.empty()) throw PreconditionError("replay buffer is empty");
  return entries_[rng.next() % entries_.size()];
}

LossTerms training_loss(const Segment& segment, int skipped,
                        const SteinOptions& stein) {
  const int K = segment.chains();
  const int S = segment.samples();
  if (K < 1 || S < 1) throw ConfigError("empty loss segment");
  if (skipped < 0 || skipped >= S) {
    throw ConfigError("loss segment has no entropy terms after skipping");
  }
  const int D = static_cast<int>(segment.theta[0][0].size());
  for (int k = 0; k < K; ++k) {
    if (static_cast<int>(segment.theta[k].size()) != S + 1 ||
        static_cast<int>(segment.U[k].size()) != S + 1 ||
        static_cast<int>(segment.grad[k].size()) != S + 1) {
      throw PreconditionError("ragged loss segment");
    }
  }

  LossTerms out;
  out.seeds.assign(K, std::vector<std::vector<double>>(
                          S, std::vector<double>(D, 0.0)));
  const double we = 1.0 / (static_cast<double>(K) * S);
  const double wh = 1.0 / (static_cast<double>(K) * (S - skipped));
  for (int k = 0; k < K; ++k) {
    for (int s = 1; s <= S; ++s) {
      out.energy += we * segment.U[k][s];
      for (int i = 0; i < D; ++i) {
        out.seeds[k][s - 1][i] += we * segment.grad[k][s][i];
      }
    }
  }

  for (int s = skipped + 1; s <= S; ++s) {
    // Samples 0..s of every chain, ordered by index then chain.
    const int n = (s + 1) * K;
    Eigen::MatrixXd x(n, D);
    for (int t = 0; t <= s; ++t) {
      for (int k = 0; k < K; ++k) {
        for (int i = 0; i < D; ++i) x(t * K + k, i) = segment.theta[k][t][i];
      }
    }
    const SteinResult score = stein_gradient(x, stein);
    for (int k = 0; k < K; ++k) {
      const Eigen::Index row = s * K + k;
      out.entropy += wh * silverman_log_density(x, row);
      for (int i = 0; i < D; ++i) {
        out.seeds[k][s - 1][i] += wh * score.scores(row, i);
      }
    }
  }
  return out;
}

std::vector<double> segment_gradient(const StrategyNetworks& nets,
                                     std::span<const int> categories,
                                     double eta, bool detach_gamma,
                                     const Segment& segment,
                                     const LossTerms& loss) {
  std::vector<double> total(nets.num_weights(), 0.0);
  ad::Tape tape;
  std::vector<ad::Var> theta_next, p_next;
  for (int k = 0; k < segment.chains(); ++k) {
    if (segment.steps[k].size() != static_cast<std::size_t>(segment.samples())) {
      throw PreconditionError("segment is missing step records");
    }
    for (int s = 0; s < segment.samples(); ++s) {
      const StepRecord& r = segment.steps[k][s];
      tape.clear();
      const std::vector<ad::Var> w = tape.variables(nets.weights());
      AmStepParams params;
      params.nets = &nets;
      params.categories = categories;
      params.sigma = r.sigma;
      params.mu_U = r.mu_U;
      params.sigma_U = r.sigma_U;
      params.eta = eta;
      params.detach_gamma = detach_gamma;
      am_sghmc_update<ad::Var>(w, params, r.theta, r.p, r.U, r.grad, r.noise,
                               theta_next, p_next);
      const std::vector<double> g =
          tape.leaf_gradient(theta_next, loss.seeds[k][s]);
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += g[j];
    }
  }
  return total;
}

void TrainingConfig::validate() const {
  if (chains < 1 || epochs < 1 || sub_epochs < 1 || steps_per_sub_epoch < 1) {
    throw ConfigError("training schedule sizes must be positive");
  }
  if (segment_length < 1 || thin < 1) {
    throw ConfigError("segment length and thinning must be positive");
  }
  if (segment_length > steps_per_sub_epoch) {
    throw ConfigError("segment length exceeds the sub-epoch");
  }
  if (skipped < 0 || skipped >= segment_length / thin) {
    throw ConfigError("skipped entropy terms must be fewer than segment samples");
  }
  if (loss_chains < 1 || loss_chains > chains) {
    throw ConfigError("loss chains must be between 1 and the chain count");
  }
  if (!(replay_prob >= 0.0 && replay_prob <= 1.0) || replay_capacity < 1) {
    throw ConfigError("invalid replay settings");
  }
  if (!(eta > 0.0) || !(learning_rate > 0.0) || !(clip_norm > 0.0)) {
    throw ConfigError("step size, learning rate and clip norm must be positive");
  }
  if (adapt_epochs < 0 || adapt_last_sub_epochs < 1 ||
      adapt_last_sub_epochs > sub_epochs) {
    throw ConfigError("invalid adaptive window");
  }
  if (!(divergence_abort_fraction > 0.0 && divergence_abort_fraction <= 1.0)) {
    throw ConfigError("divergence abort fraction must be in (0, 1]");
  }
}

namespace {

struct Batch {
  std::vector<double> theta, U;
  int K = 0;
};

Batch live_batch(const std::vector<ChainState>& chains) {
  Batch b;
  for (const ChainState& c : chains) {
    if (c.diverged) continue;
    b.theta.insert(b.theta.end(), c.theta.begin(), c.theta.end());
    b.U.push_back(c.U);
    ++b.K;
  }
  return b;
}

bool finite_state(const ChainState& c) {
  if (c.diverged || !std::isfinite(c.U)) return false;
  for (double v : c.theta) {
    if (!std::isfinite(v)) return false;
  }
  for (double v : c.p) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

TrainingResult train(const Target& problem, StrategyNetworks nets,
                     const TrainingConfig& cfg,
                     const TrainingProgress& progress) {
  cfg.validate();
  const int D = problem.dim();
  const int K0 = cfg.chains;
  const std::vector<int> cats = network_categories(problem, nets);
  const int ncat = static_cast<int>(nets.categories().size());

  std::vector<ChainState> chains;
  for (int k = 0; k < K0; ++k) chains.push_back(initial_chain(problem, cfg.seed, k));
  std::vector<Stream> rngs;
  for (int k = 0; k < K0; ++k) rngs.emplace_back(cfg.seed, 1000 + k);
  Stream control(cfg.seed, 1);

  Batch init = live_batch(chains);
  if (init.K == 0) throw DivergenceError("every initial chain is non-finite");
  AdaptiveConfig acfg;
  acfg.theta = cfg.theta_betas;
  acfg.energy = cfg.energy_betas;
  acfg.mode = EstimatorMode::kTraining;
  {
    // Prior variance: the spread of the initial states.
    std::vector<double> v0(D, 0.0);
    if (init.K > 1) {
      for (int i = 0; i < D; ++i) {
        double m = 0.0;
        for (int k = 0; k < init.K; ++k) m += init.theta[k * D + i];
        m /= init.K;
        double v = 0.0;
        for (int k = 0; k < init.K; ++k) {
          const double e = init.theta[k * D + i] - m;
          v += e * e;
        }
        v0[i] = std::max(v / (init.K - 1), kVarianceFloor);
      }
      acfg.v0_star = v0;
    }
  }
  AdaptiveStats stats(D, acfg);
  stats.initialize(init.theta, init.U, init.K);

  Adam adam(nets.num_weights(), cfg.learning_rate, cfg.adam_beta1,
            cfg.adam_beta2);
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
  TrainingResult result;

  const int seg_samples = cfg.segment_length / cfg.thin;
  const int seg_steps = seg_samples * cfg.thin;
  const int segments = cfg.steps_per_sub_epoch / seg_steps;
  std::vector<double> noise(D);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int sub = 0; sub < cfg.sub_epochs; ++sub) {
      const bool active = epoch < cfg.adapt_epochs &&
                          sub >= cfg.sub_epochs - cfg.adapt_last_sub_epochs;
      if (!active && epoch >= cfg.adapt_epochs && !stats.frozen()) {
        stats.freeze();
        nets.set_shortcut_frozen(true);
      }
      if (active && nets.has_shortcut() && !nets.rbf_initialized()) {
        std::vector<std::vector<double>> qs, ds;
        for (const ChainState& c : chains) {
          if (c.diverged) continue;
          const NormalizedInputs in = normalize_inputs(c.U, c.grad, stats);
          const double iu = squash_energy(in.u_hat);
          for (int i = 0; i < D; ++i) {
            const double ip = squash_momentum(c.p[i]);
            qs.push_back({iu, ip});
            ds.push_back({iu, ip, squash_gradient(in.grad_star[i])});
          }
        }
        nets.initialize_rbf(qs, ds, control);
      }

      AmStepParams params;
      params.nets = &nets;
      params.categories = cats;
      params.eta = cfg.eta;
      params.detach_gamma = cfg.detach_gamma;

      std::vector<double> grad_sum(nets.num_weights(), 0.0);
      int grad_segments = 0;
      double loss_energy = 0.0, loss_entropy = 0.0;

      // One sampler step of every live chain; records steps of `recorded`.
      auto advance = [&](std::vector<int>& recorded, Segment* seg, bool keep) {
        std::vector<double> theta_next, p_next;
        const std::vector<double> sigma = stats.sigmas();
        params.sigma = sigma;
        params.mu_U = stats.mu_U();
        params.sigma_U = stats.sigma_U();
        for (int k = 0; k < K0; ++k) {
          ChainState& c = chains[k];
          if (c.diverged) continue;
          for (int i = 0; i < D; ++i) noise[i] = rngs[k].normal();
          const auto pos = std::find(recorded.begin(), recorded.end(), k);
          const bool rec = seg != nullptr && pos != recorded.end() && keep;
          if (rec) {
            StepRecord r{c.theta, c.p, c.grad, noise, c.U, sigma,
                         params.mu_U, params.sigma_U};
            seg->steps[pos - recorded.begin()].push_back(std::move(r));
          }
          am_sghmc_update<double>(nets.weights(), params, c.theta, c.p, c.U,
                                  c.grad, noise, theta_next, p_next);
          c.theta = theta_next;
          c.p = p_next;
          refresh(c, problem);
        }
        if (active) {
          Batch b = live_batch(chains);
          if (b.K > 0) stats.update(b.theta, b.U, b.K);
        }
      };

      int step = 0;
      for (int g = 0; g < segments; ++g) {
        std::vector<int> live;
        for (int k = 0; k < K0; ++k) {
          if (!chains[k].diverged) live.push_back(k);
        }
        if (live.empty()) throw DivergenceError("every training chain diverged");
        std::shuffle(live.begin(), live.end(), control.engine());
        const int Kl = std::min<int>(cfg.loss_chains, static_cast<int>(live.size()));
        std::vector<int> chosen(live.begin(), live.begin() + Kl);

        Segment seg;
        seg.theta.resize(Kl);
        seg.U.resize(Kl);
        seg.grad.resize(Kl);
        seg.steps.resize(Kl);
        auto snapshot = [&]() {
          for (int j = 0; j < Kl; ++j) {
            const ChainState& c = chains[chosen[j]];
            seg.theta[j].push_back(c.theta);
            seg.U[j].push_back(c.U);
            seg.grad[j].push_back(c.grad);
          }
        };
        snapshot();
        for (int s = 0; s < seg_samples; ++s) {
          for (int t = 0; t < cfg.thin; ++t) {
            // Only the step producing a kept sample carries weight gradients.
            advance(chosen, &seg, t == cfg.thin - 1);
            ++step;
          }
          snapshot();
        }

        // Keep chains that stayed finite through the segment.
        Segment ok;
        for (int j = 0; j < Kl; ++j) {
          if (!finite_state(chains[chosen[j]])) continue;
          ok.theta.push_back(std::move(seg.theta[j]));
          ok.U.push_back(std::move(seg.U[j]));
          ok.grad.push_back(std::move(seg.grad[j]));
          ok.steps.push_back(std::move(seg.steps[j]));
        }
        if (ok.chains() == 0) continue;
        const LossTerms loss = training_loss(ok, cfg.skipped, cfg.stein);
        const std::vector<double> g2 =
            segment_gradient(nets, cats, cfg.eta, cfg.detach_gamma, ok, loss);
        bool finite = std::isfinite(loss.total());
        for (double v : g2) finite = finite && std::isfinite(v);
        if (!finite) continue;
        for (std::size_t j = 0; j < grad_sum.size(); ++j) grad_sum[j] += g2[j];
        loss_energy += loss.energy;
        loss_entropy += loss.entropy;
        ++grad_segments;
      }
      std::vector<int> none;
      for (; step < cfg.steps_per_sub_epoch; ++step) advance(none, nullptr, false);

      SubEpochLog entry;
      entry.epoch = epoch;
      entry.sub_epoch = sub;
      for (const ChainState& c : chains) entry.diverged_chains += c.diverged;
      if (grad_segments > 0) {
        const bool train_shortcut = active && !nets.shortcut_frozen();
        double norm2 = 0.0;
        for (std::size_t j = 0; j < grad_sum.size(); ++j) {
          grad_sum[j] /= grad_segments;
          if (!train_shortcut && nets.is_shortcut_weight(j)) grad_sum[j] = 0.0;
          norm2 += grad_sum[j] * grad_sum[j];
        }
        entry.grad_norm = std::sqrt(norm2);
        entry.loss_energy = loss_energy / grad_segments;
        entry.loss_entropy = loss_entropy / grad_segments;
        if (entry.grad_norm > cfg.clip_norm) {
          const double f = cfg.clip_norm / entry.grad_norm;
          for (double& v : grad_sum) v *= f;
        }
        adam.step(nets.weights(), grad_sum);
      } else {
        entry.loss_energy = std::numeric_limits<double>::quiet_NaN();
        entry.loss_entropy = std::numeric_limits<double>::quiet_NaN();
      }
      for (const ChainState& c : chains) {
        if (!c.diverged) replay.push(c.theta, c.p);
      }
      result.log.push_back(entry);
      if (progress) progress(entry);
    }

    int diverged = 0;
    for (const ChainState& c : chains) diverged += c.diverged;
    if (diverged > cfg.divergence_abort_fraction * K0) {
      throw DivergenceError("training aborted in epoch " + std::to_string(epoch) +
                            ": " + std::to_string(diverged) + " of " +
                            std::to_string(K0) + " chains diverged");
    }
    for (int k = 0; k < K0; ++k) {
      ChainState& c = chains[k];
      if (!c.diverged && !(control.uniform() < cfg.replay_prob)) continue;
      if (replay.empty()) {
        c = initial_chain(problem, cfg.seed + 7919 * (epoch + 1), k);
      } else {
        const ReplayBuffer::Entry& e = replay.draw(control);
        c = make_chain(problem, e.theta, e.p);
      }
    }
  }

  if (!stats.frozen()) {
    stats.freeze();
    nets.set_shortcut_frozen(true);
  }
  FrozenStats& fs = nets.frozen_stats();
  fs.valid = true;
  fs.category_variance = stats.category_variance(cats, ncat);
  fs.mu_U = stats.mu_U();
  fs.sigma_U = stats.sigma_U();
  result.nets = std::move(nets);
  return result;
}

void write_training_log(const std::vector<SubEpochLog>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,sub_epoch,loss_energy,loss_entropy,grad_norm,diverged_chains\n";
  char buf[256];
  for (const SubEpochLog& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%d\n", e.epoch,
                  e.sub_epoch, e.loss_energy, e.loss_entropy, e.grad_norm,
                  e.diverged_chains);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace amsghmc
