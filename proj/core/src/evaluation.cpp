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

#include "amsghmc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "amsghmc/error.hpp"

namespace amsghmc {

PooledSamples pool(const Trace& trace) {
  std::size_t n = 0;
  for (const auto& c : trace.samples) n += c.size();
  PooledSamples out;
  out.theta.resize(static_cast<Eigen::Index>(n), trace.dim);
  out.U.resize(static_cast<Eigen::Index>(n));
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < trace.samples.size(); ++c) {
    for (std::size_t s = 0; s < trace.samples[c].size(); ++s, ++r) {
      for (int i = 0; i < trace.dim; ++i) out.theta(r, i) = trace.samples[c][s][i];
      out.U(r) = trace.energies[c][s];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel density estimate

namespace {

// Row indices in lexicographic order of the rows.
std::vector<int> sorted_rows(const Eigen::MatrixXd& x) {
  std::vector<int> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
      if (x(a, d) != x(b, d)) return x(a, d) < x(b, d);
    }
    return false;
  });
  return idx;
}

// `m` of the given (ordered) rows chosen by a seeded partial shuffle, kept in
// their original relative order.
std::vector<int> subsample(std::vector<int> rows, int m, std::uint64_t seed) {
  if (static_cast<int>(rows.size()) <= m) return rows;
  Stream rng(seed, 0x6b6465ULL);
  for (int a = 0; a < m; ++a) {
    const std::size_t span = rows.size() - a;
    const std::size_t b = a + static_cast<std::size_t>(rng.next() % span);
    std::swap(rows[a], rows[b]);
  }
  rows.resize(m);
  std::sort(rows.begin(), rows.end());
  return rows;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(r) = x.row(rows[r]);
  return out;
}

struct Whitening {
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd chol;
  double log_det = 0.0;
  bool regularized = false;
};

Whitening whitening(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), D = x.cols();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Whitening w;
  w.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  const double trace = w.covariance.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) {
    throw PreconditionError("KDE needs samples with non-zero spread");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w.covariance);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    w.covariance += Eigen::MatrixXd::Identity(D, D) * (1e-10 * trace / D);
    w.regularized = true;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(w.covariance);
  if (llt.info() != Eigen::Success) {
    throw EvaluationError("sample covariance is not positive definite", -1);
  }
  w.chol = llt.matrixL();
  w.log_det = 2.0 * w.chol.diagonal().array().log().sum();
  return w;
}

Eigen::MatrixXd whiten(const Eigen::MatrixXd& x, const Eigen::MatrixXd& chol) {
  return chol.triangularView<Eigen::Lower>().solve(x.transpose()).transpose();
}

// Leave-one-out objective on whitened points. Points equal in value to the
// evaluation point are excluded, so duplicating a sample set leaves the
// optimum of c * Sigma unchanged.
class LooObjective {
 public:
  LooObjective(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& white,
               double log_det)
      : n_(static_cast<int>(raw.rows())),
        D_(static_cast<int>(raw.cols())),
        log_det_(log_det),
        d2_(n_, n_),
        group_(n_) {
    const std::vector<int> order = sorted_rows(raw);
    int g = -1;
    for (int r = 0; r < n_; ++r) {
      if (r == 0 || raw.row(order[r]) != raw.row(order[r - 1])) ++g;
      group_[order[r]] = g;
    }
    std::vector<int> group_size(g + 1, 0);
    for (int r = 0; r < n_; ++r) ++group_size[group_[r]];
    others_.resize(n_);
    for (int r = 0; r < n_; ++r) others_[r] = n_ - group_size[group_[r]];
    if (g < 1) throw PreconditionError("KDE needs two distinct samples");
    for (int a = 0; a < n_; ++a) {
      d2_(a, a) = 0.0;
      for (int b = a + 1; b < n_; ++b) {
        const double d = (white.row(a) - white.row(b)).squaredNorm();
        d2_(a, b) = d;
        d2_(b, a) = d;
      }
    }
  }

  // Objective and derivative with respect to log c.
  std::pair<double, double> operator()(double log_c) const {
    const double c = std::exp(log_c);
    const double norm = 0.5 * D_ * std::log(2.0 * std::numbers::pi * c) + 0.5 * log_det_;
    double total = 0.0, slope = 0.0;
    for (int a = 0; a < n_; ++a) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int b = 0; b < n_; ++b) {
        if (group_[b] != group_[a]) mx = std::max(mx, -0.5 * d2_(a, b) / c);
      }
      double sum = 0.0, wsum = 0.0;
      for (int b = 0; b < n_; ++b) {
        if (group_[b] == group_[a]) continue;
        const double e = std::exp(-0.5 * d2_(a, b) / c - mx);
        sum += e;
        wsum += e * (0.5 * d2_(a, b) / c);
      }
      total += mx + std::log(sum) - std::log(static_cast<double>(others_[a])) - norm;
      slope += wsum / sum - 0.5 * D_;
    }
    return {total / n_, slope / n_};
  }

 private:
  int n_, D_;
  double log_det_;
  Eigen::MatrixXd d2_;
  std::vector<int> group_;
  std::vector<int> others_;
};

double maximize_log_c(const LooObjective& f) {
  // Coarse scan, golden-section refinement, then bisection on the slope.
  const double lo = std::log(1e-8), hi = std::log(1e2);
  constexpr int kScan = 31;
  double best = -std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 0; k < kScan; ++k) {
    const double v = f(lo + (hi - lo) * k / (kScan - 1)).first;
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  const double step = (hi - lo) / (kScan - 1);
  double a = lo + step * std::max(best_k - 1, 0);
  double b = lo + step * std::min(best_k + 1, kScan - 1);

  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1).first, f2 = f(x2).first;
  for (int it = 0; it < 30; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2).first;
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1).first;
    }
  }
  if (f(a).second > 0.0 && f(b).second < 0.0) {
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double m = 0.5 * (a + b);
      if (f(m).second > 0.0) {
        a = m;
      } else {
        b = m;
      }
    }
  }
  return 0.5 * (a + b);
}

double log_sum_exp_density(const Eigen::MatrixXd& centers,
                           const Eigen::VectorXd& y, double c) {
  const Eigen::Index n = centers.rows();
  Eigen::VectorXd e(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    e[k] = -0.5 * (centers.row(k).transpose() - y).squaredNorm() / c;
  }
  const double mx = e.maxCoeff();
  return mx + std::log((e.array() - mx).exp().sum());
}

}  // namespace

double loo_objective(const Eigen::MatrixXd& samples, double c) {
  if (samples.rows() < 2) throw PreconditionError("KDE needs >= 2 samples");
  if (!(c > 0.0)) throw PreconditionError("c must be positive");
  const Whitening w = whitening(samples);
  return LooObjective(samples, whiten(samples, w.chol), w.log_det)(std::log(c)).first;
}

KdeModel fit_cop(const Eigen::MatrixXd& samples, const KdeOptions& options) {
  const Eigen::Index n = samples.rows();
  const int D = static_cast<int>(samples.cols());
  if (n < 2 || D < 1) throw PreconditionError("KDE needs >= 2 samples");
  if (!samples.allFinite()) throw PreconditionError("KDE samples must be finite");
  KdeModel model;
  const Whitening w = whitening(samples);
  model.covariance_ = w.covariance;
  model.chol_ = w.chol;
  model.log_det_ = w.log_det;
  if (w.regularized) {
    model.warnings_.push_back("near-singular sample covariance; ridge added");
  }
  const std::vector<int> order = sorted_rows(samples);
  model.centers_ = whiten(take_rows(samples, order), w.chol);

  const std::vector<int> fit_rows = subsample(order, options.max_fit_samples, options.seed);
  const Eigen::MatrixXd fit_raw = take_rows(samples, fit_rows);
  const LooObjective objective(fit_raw, whiten(fit_raw, w.chol), w.log_det);
  double c = std::exp(maximize_log_c(objective));
  const double m = static_cast<double>(fit_rows.size());
  if (m < n) {
    c *= std::pow(m / static_cast<double>(n), 2.0 / (D + 4.0));
    model.warnings_.push_back("bandwidth fitted on a subsample of " +
                              std::to_string(fit_rows.size()) + " points");
  }
  model.c_op_ = c;
  return model;
}

double KdeModel::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw PreconditionError("KDE dimension mismatch");
  const Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(x);
  const double norm = 0.5 * dim() * std::log(2.0 * std::numbers::pi * c_op_) +
                      0.5 * log_det_ + std::log(static_cast<double>(size()));
  return log_sum_exp_density(centers_, y, c_op_) - norm;
}

double naive_loss(const Eigen::MatrixXd& samples, const Eigen::VectorXd& U,
                  const KdeModel& kde, const KdeOptions& options) {
  if (samples.rows() != U.size() || samples.rows() == 0) {
    throw PreconditionError("energies must align with samples");
  }
  const std::vector<int> rows =
      subsample(sorted_rows(samples), options.max_eval_points, options.seed);
  double total = 0.0;
  for (int r : rows) total += U[r] + kde.log_density(samples.row(r).transpose());
  return total / static_cast<double>(rows.size());
}

// ---------------------------------------------------------------------------
// Effective sample size

EssResult effective_sample_size(const Eigen::MatrixXd& chain) {
  const Eigen::Index T = chain.rows();
  if (T < 10) throw PreconditionError("ESS needs at least 10 samples");
  const double Td = static_cast<double>(T);
  const Eigen::Index max_lag = std::min<Eigen::Index>(T / 3 - 1, 999);
  EssResult out;
  for (Eigen::Index d = 0; d < chain.cols(); ++d) {
    const Eigen::VectorXd x = chain.col(d).array() - chain.col(d).mean();
    const double rho0 = x.squaredNorm() / Td;
    if (!(rho0 > 0.0)) {
      out.ess.push_back(Td);
      out.degenerate.push_back(true);
      continue;
    }
    auto rho = [&](Eigen::Index s) {
      return x.tail(T - s).dot(x.head(T - s)) / static_cast<double>(T - s) / rho0;
    };
    double sum = 0.0;
    for (Eigen::Index s = 1; s <= max_lag; s += 2) {
      const double r1 = rho(s);
      if (s + 1 > max_lag) {
        sum += (1.0 - s / Td) * r1;
        break;
      }
      const double r2 = rho(s + 1);
      if (r1 + r2 < 0.0) break;
      sum += (1.0 - s / Td) * r1 + (1.0 - (s + 1) / Td) * r2;
    }
    const double denom = 1.0 + 2.0 * sum;
    out.ess.push_back(denom > 1.0 ? Td / denom : Td);
    out.degenerate.push_back(false);
  }
  return out;
}

EssAggregate parse_ess_aggregate(const std::string& name) {
  if (name == "mean_of_min") return EssAggregate::kMeanOfMinimum;
  if (name == "sum_of_min") return EssAggregate::kSumOfMinimum;
  throw ConfigError("unknown ESS aggregate '" + name + "'");
}

std::string to_string(EssAggregate a) {
  return a == EssAggregate::kMeanOfMinimum ? "mean_of_min" : "sum_of_min";
}

TraceEss trace_ess(const Trace& trace, EssAggregate aggregate) {
  TraceEss out;
  out.mean_per_dim.assign(trace.dim, 0.0);
  double acc = 0.0;
  for (const auto& samples : trace.samples) {
    Eigen::MatrixXd chain(static_cast<Eigen::Index>(samples.size()), trace.dim);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      for (int i = 0; i < trace.dim; ++i) chain(s, i) = samples[s][i];
    }
    EssResult r = effective_sample_size(chain);
    for (int i = 0; i < trace.dim; ++i) out.mean_per_dim[i] += r.ess[i];
    acc += *std::min_element(r.ess.begin(), r.ess.end());
    out.chains.push_back(std::move(r));
  }
  const double nc = static_cast<double>(out.chains.size());
  for (double& v : out.mean_per_dim) v /= nc;
  out.aggregate = aggregate == EssAggregate::kMeanOfMinimum ? acc / nc : acc;
  return out;
}

// ---------------------------------------------------------------------------
// PCA and conditional-mean surfaces

Pca pca_project(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows(), D = samples.cols();
  if (n < D + 1) throw PreconditionError("PCA needs at least D + 1 samples");
  Pca out;
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  out.variances = eig.eigenvalues().reverse();
  out.components = eig.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < D; ++j) {
    Eigen::Index arg = 0;
    out.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, j) < 0.0) out.components.col(j) *= -1.0;
  }
  out.projected = centered * out.components;
  return out;
}

double SurfaceGrid::x(int a) const {
  return nx == 1 ? x_min : x_min + (x_max - x_min) * a / (nx - 1);
}
double SurfaceGrid::y(int b) const {
  return ny == 1 ? y_min : y_min + (y_max - y_min) * b / (ny - 1);
}

namespace {
double column_std(const Eigen::MatrixXd& m, int c) {
  const Eigen::VectorXd x = m.col(c).array() - m.col(c).mean();
  return std::sqrt(x.squaredNorm() / static_cast<double>(m.rows() - 1));
}
}  // namespace

SurfaceGrid default_grid(const Eigen::MatrixXd& samples, int i, int j,
                         int nodes, double half_width) {
  if (nodes < 1 || samples.rows() < 2) {
    throw PreconditionError("grid needs nodes and samples");
  }
  SurfaceGrid g;
  const double mi = samples.col(i).mean(), mj = samples.col(j).mean();
  const double si = column_std(samples, i), sj = column_std(samples, j);
  g.x_min = mi - half_width * si;
  g.x_max = mi + half_width * si;
  g.y_min = mj - half_width * sj;
  g.y_max = mj + half_width * sj;
  g.nx = g.ny = nodes;
  return g;
}

Surface conditional_mean_surface(const Eigen::MatrixXd& samples, int i, int j,
                                 int k, const SurfaceGrid& grid,
                                 double threshold, int iterations) {
  const int D = static_cast<int>(samples.cols());
  for (int c : {i, j, k}) {
    if (c < 0 || c >= D) throw PreconditionError("surface index out of range");
  }
  if (!(threshold > 0.0) || iterations < 0 || grid.nx < 1 || grid.ny < 1) {
    throw PreconditionError("invalid surface settings");
  }
  if (samples.rows() < 2) throw PreconditionError("surface needs samples");
  const double si = column_std(samples, i), sj = column_std(samples, j);
  if (!(si > 0.0) || !(sj > 0.0)) {
    throw PreconditionError("conditioning coordinates have no spread");
  }

  // Hash of samples into cells of one threshold width in standardized units.
  auto cell = [&](double u) { return static_cast<long long>(std::floor(u / threshold)); };
  auto key = [](long long a, long long b) { return a * 1000003LL + b; };
  std::unordered_map<long long, std::vector<Eigen::Index>> cells;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    cells[key(cell(samples(r, i) / si), cell(samples(r, j) / sj))].push_back(r);
  }

  Surface out;
  out.grid = grid;
  out.values = Eigen::MatrixXd::Constant(grid.nx, grid.ny,
                                         std::numeric_limits<double>::quiet_NaN());
  out.counts = Eigen::MatrixXi::Zero(grid.nx, grid.ny);
  const double t2 = threshold * threshold;
  for (int a = 0; a < grid.nx; ++a) {
    const double ua = grid.x(a) / si;
    for (int b = 0; b < grid.ny; ++b) {
      const double ub = grid.y(b) / sj;
      double sum = 0.0;
      int count = 0;
      for (long long ca = cell(ua) - 1; ca <= cell(ua) + 1; ++ca) {
        for (long long cb = cell(ub) - 1; cb <= cell(ub) + 1; ++cb) {
          const auto it = cells.find(key(ca, cb));
          if (it == cells.end()) continue;
          for (Eigen::Index r : it->second) {
            const double da = samples(r, i) / si - ua, db = samples(r, j) / sj - ub;
            if (da * da + db * db <= t2) {
              sum += samples(r, k);
              ++count;
            }
          }
        }
      }
      out.counts(a, b) = count;
      if (count > 0) out.values(a, b) = sum / count;
    }
  }

  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd next = out.values;
    for (int a = 0; a < grid.nx; ++a) {
      for (int b = 0; b < grid.ny; ++b) {
        if (out.missing(a, b)) continue;
        double sum = 0.0;
        int n = 0;
        for (int da = -1; da <= 1; ++da) {
          for (int db = -1; db <= 1; ++db) {
            const int x = a + da, y = b + db;
            if (x < 0 || y < 0 || x >= grid.nx || y >= grid.ny || out.missing(x, y)) continue;
            sum += out.values(x, y);
            ++n;
          }
        }
        next(a, b) = sum / n;
      }
    }
    out.values = std::move(next);
  }
  return out;
}

void write_surface_csv(const Surface& surface, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "x,y,value,count\n";
  char buf[96];
  for (int a = 0; a < surface.grid.nx; ++a) {
    for (int b = 0; b < surface.grid.ny; ++b) {
      if (surface.missing(a, b)) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,,0\n", surface.grid.x(a),
                      surface.grid.y(b));
      } else {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", surface.grid.x(a),
                      surface.grid.y(b), surface.values(a, b), surface.counts(a, b));
      }
      out << buf;
    }
  }
}

void write_matrix_csv(const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace amsghmc
