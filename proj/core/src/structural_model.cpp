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

#include "amsghmc/structural_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "amsghmc/error.hpp"

namespace amsghmc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_sizes(const ShearBuilding& b) {
  const std::size_t n = b.stiffness.size();
  if (n == 0) throw PreconditionError("shear building has no stories");
  if (b.damping.size() != n || b.mass.size() != n) {
    throw PreconditionError("shear building parameter vectors differ in size");
  }
}

// Chain assembly without sign checks. Damping may legitimately be negative
// while a sampler explores the prior support.
MatrixXd chain_matrix(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  MatrixXd A = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = v[i] + (i + 1 < n ? v[i + 1] : 0.0);
    if (i + 1 < n) {
      A(i, i + 1) = -v[i + 1];
      A(i + 1, i) = -v[i + 1];
    }
  }
  return A;
}

// d(chain_matrix(v))/d v[story]
MatrixXd chain_derivative(int n, int story) {
  MatrixXd A = MatrixXd::Zero(n, n);
  A(story, story) = 1.0;
  if (story > 0) {
    A(story - 1, story - 1) = 1.0;
    A(story - 1, story) = -1.0;
    A(story, story - 1) = -1.0;
  }
  return A;
}

struct Continuous {
  int n;
  VectorXd inv_mass;
  MatrixXd K, C;
  MatrixXd A;     // 2n x 2n
  MatrixXd Cout;  // N_o x 2n
};

Continuous build(const ShearBuilding& b, const std::vector<int>& dofs) {
  check_sizes(b);
  Continuous s;
  s.n = b.n_stories();
  s.inv_mass.resize(s.n);
  for (int i = 0; i < s.n; ++i) {
    if (!(b.mass[i] > 0.0)) throw PreconditionError("non-positive floor mass");
    s.inv_mass[i] = 1.0 / b.mass[i];
  }
  s.K = chain_matrix(b.stiffness);
  s.C = chain_matrix(b.damping);
  const int n = s.n;
  s.A = MatrixXd::Zero(2 * n, 2 * n);
  s.A.topRightCorner(n, n).setIdentity();
  s.A.bottomLeftCorner(n, n) = -(s.inv_mass.asDiagonal() * s.K);
  s.A.bottomRightCorner(n, n) = -(s.inv_mass.asDiagonal() * s.C);
  s.Cout.resize(static_cast<Eigen::Index>(dofs.size()), 2 * n);
  for (std::size_t r = 0; r < dofs.size(); ++r) {
    if (dofs[r] < 0 || dofs[r] >= n) {
      throw PreconditionError("observed dof out of range");
    }
    s.Cout.row(r) = s.A.row(n + dofs[r]);
  }
  return s;
}

struct Discrete {
  MatrixXd Ad;
  VectorXd Bd;
};

// Zero-order-hold discretization via exp([[A, B], [0, 0]] dt).
Discrete discretize(const MatrixXd& A, double dt) {
  const Eigen::Index m = A.rows();
  MatrixXd F = MatrixXd::Zero(m + 1, m + 1);
  F.topLeftCorner(m, m) = A;
  F.block(m / 2, m, m / 2, 1).setConstant(-1.0);
  MatrixXd Phi = (F * dt).exp();
  return {Phi.topLeftCorner(m, m), Phi.block(0, m, m, 1)};
}

// Derivative of the ZOH discretization along dA, from the block-triangular
// exponential exp([[F, dF], [0, F]] dt).
Discrete discretize_derivative(const MatrixXd& A, const MatrixXd& dA,
                               double dt) {
  const Eigen::Index m = A.rows();
  const Eigen::Index q = m + 1;
  MatrixXd F = MatrixXd::Zero(q, q);
  F.topLeftCorner(m, m) = A;
  F.block(m / 2, m, m / 2, 1).setConstant(-1.0);
  MatrixXd dF = MatrixXd::Zero(q, q);
  dF.topLeftCorner(m, m) = dA;
  MatrixXd big = MatrixXd::Zero(2 * q, 2 * q);
  big.topLeftCorner(q, q) = F;
  big.topRightCorner(q, q) = dF;
  big.bottomRightCorner(q, q) = F;
  MatrixXd Phi = (big * dt).exp();
  MatrixXd dPhi = Phi.topRightCorner(q, q);
  return {dPhi.topLeftCorner(m, m), dPhi.block(0, m, m, 1)};
}

void check_dataset(const Dataset& d) {
  if (!(d.dt > 0.0)) throw PreconditionError("dataset dt must be positive");
}

}  // namespace

ShearBuilding ShearBuilding::uniform(int n, double k, double c, double m) {
  return {std::vector<double>(n, k), std::vector<double>(n, c),
          std::vector<double>(n, m)};
}

SystemMatrices assemble_system(const ShearBuilding& b) {
  check_sizes(b);
  for (int i = 0; i < b.n_stories(); ++i) {
    if (!(b.stiffness[i] > 0.0) || !(b.damping[i] > 0.0) ||
        !(b.mass[i] > 0.0)) {
      throw PreconditionError("shear building parameters must be positive");
    }
  }
  SystemMatrices s;
  s.K = chain_matrix(b.stiffness);
  s.C = chain_matrix(b.damping);
  s.M = Eigen::Map<const VectorXd>(b.mass.data(), b.n_stories()).asDiagonal();
  return s;
}

std::vector<int> default_observed_dofs(int n_stories) {
  if (n_stories <= 1) return {0};
  return {0, n_stories - 1};
}

Eigen::MatrixXd simulate_accelerations(const ShearBuilding& b,
                                       const Dataset& d) {
  check_dataset(d);
  const Continuous s = build(b, d.observed_dofs);
  const Discrete z = discretize(s.A, d.dt);
  const int nt = d.n_steps();
  MatrixXd y(s.Cout.rows(), nt);
  VectorXd x = VectorXd::Zero(2 * s.n);
  VectorXd next(2 * s.n);
  for (int j = 0; j < nt; ++j) {
    y.col(j).noalias() = s.Cout * x;
    next.noalias() = z.Ad * x;
    next += z.Bd * d.ground[j];
    x.swap(next);
  }
  return y;
}

Sensitivities simulate_with_sensitivities(const ShearBuilding& b,
                                          const Dataset& d,
                                          std::span<const ParamRef> wrt) {
  check_dataset(d);
  const Continuous s = build(b, d.observed_dofs);
  const int n = s.n;
  const Discrete z = discretize(s.A, d.dt);
  const int np = static_cast<int>(wrt.size());

  std::vector<Discrete> dz;
  std::vector<MatrixXd> dCout;
  for (const ParamRef& p : wrt) {
    if (p.story < 0 || p.story >= n) {
      throw PreconditionError("sensitivity parameter out of range");
    }
    MatrixXd dA = MatrixXd::Zero(2 * n, 2 * n);
    dA.block(n, p.kind == ParamKind::kStiffness ? 0 : n, n, n) =
        -(s.inv_mass.asDiagonal() * chain_derivative(n, p.story));
    dz.push_back(discretize_derivative(s.A, dA, d.dt));
    MatrixXd dc(s.Cout.rows(), 2 * n);
    for (Eigen::Index r = 0; r < dc.rows(); ++r) {
      dc.row(r) = dA.row(n + d.observed_dofs[r]);
    }
    dCout.push_back(std::move(dc));
  }

  const int nt = d.n_steps();
  Sensitivities out;
  out.y.resize(s.Cout.rows(), nt);
  out.dy.assign(np, MatrixXd(s.Cout.rows(), nt));
  VectorXd x = VectorXd::Zero(2 * n);
  VectorXd next(2 * n);
  MatrixXd S = MatrixXd::Zero(2 * n, np);
  MatrixXd S_next(2 * n, np);
  for (int j = 0; j < nt; ++j) {
    const double a = d.ground[j];
    out.y.col(j).noalias() = s.Cout * x;
    S_next.noalias() = z.Ad * S;
    for (int p = 0; p < np; ++p) {
      out.dy[p].col(j).noalias() = s.Cout * S.col(p);
      out.dy[p].col(j).noalias() += dCout[p] * x;
      S_next.col(p).noalias() += dz[p].Ad * x;
      S_next.col(p) += dz[p].Bd * a;
    }
    S.swap(S_next);
    next.noalias() = z.Ad * x;
    next += z.Bd * a;
    x.swap(next);
  }
  return out;
}

GeneratedData generate_dataset(const ShearBuilding& nominal,
                               const GenerationConfig& cfg, Stream& rng) {
  check_sizes(nominal);
  if (!(cfg.dt > 0.0) || !(cfg.duration > 0.0)) {
    throw PreconditionError("duration and dt must be positive");
  }
  const double steps = cfg.duration / cfg.dt;
  const long nt = std::lround(steps);
  if (std::abs(steps - static_cast<double>(nt)) > 1e-9 * steps || nt < 1) {
    throw PreconditionError("duration must be a multiple of dt");
  }
  if (cfg.noise_ratio < 0.0 || cfg.perturbation_cov < 0.0) {
    throw PreconditionError("noise ratio and c.o.v. must be non-negative");
  }

  GeneratedData g;
  g.truth = nominal;
  auto perturb = [&](std::vector<double>& v) {
    for (double& x : v) {
      double w;
      do {
        w = x * (1.0 + cfg.perturbation_cov * rng.normal());
      } while (!(w > 0.0));
      x = w;
    }
  };
  perturb(g.truth.stiffness);
  perturb(g.truth.damping);

  Dataset& d = g.dataset;
  d.dt = cfg.dt;
  d.noise_ratio = cfg.noise_ratio;
  d.observed_dofs = cfg.observed_dofs.empty()
                        ? default_observed_dofs(nominal.n_stories())
                        : cfg.observed_dofs;
  d.ground.resize(nt);
  for (double& a : d.ground) a = cfg.ground_std * rng.normal();

  g.clean = simulate_accelerations(g.truth, d);
  double rms = 0.0;
  for (Eigen::Index r = 0; r < g.clean.rows(); ++r) {
    rms += std::sqrt(g.clean.row(r).squaredNorm() / g.clean.cols());
  }
  rms /= static_cast<double>(g.clean.rows());
  g.noise_std = rms * cfg.noise_ratio;

  d.measurements = g.clean;
  if (g.noise_std > 0.0) {
    for (Eigen::Index j = 0; j < d.measurements.cols(); ++j) {
      for (Eigen::Index r = 0; r < d.measurements.rows(); ++r) {
        d.measurements(r, j) += g.noise_std * rng.normal();
      }
    }
  }
  return g;
}

void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "time,ground";
  for (int r = 0; r < d.n_observed(); ++r) out << ",y_" << (r + 1);
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (int j = 0; j < d.n_steps(); ++j) {
    put(j * d.dt);
    out << ',';
    put(d.ground[j]);
    for (int r = 0; r < d.n_observed(); ++r) {
      out << ',';
      put(d.measurements(r, j));
    }
    out << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path,
                         std::vector<int> observed_dofs) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty dataset file");
  const std::size_t columns =
      static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (line.rfind("time,ground", 0) != 0 || columns < 3) {
    throw IoError(path + ": expected header time,ground,y_1,...");
  }
  const std::size_t no = columns - 2;
  if (observed_dofs.size() != no) {
    throw ConfigError(path + ": observed dof count does not match columns");
  }
  std::vector<double> time;
  std::vector<double> ground;
  std::vector<std::vector<double>> y(no);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != columns) throw IoError(path + ": ragged row");
    time.push_back(row[0]);
    ground.push_back(row[1]);
    for (std::size_t r = 0; r < no; ++r) y[r].push_back(row[2 + r]);
  }
  if (time.size() < 2) throw IoError(path + ": need at least two rows");
  Dataset d;
  d.dt = time[1] - time[0];
  d.ground = std::move(ground);
  d.observed_dofs = std::move(observed_dofs);
  d.measurements.resize(static_cast<Eigen::Index>(no),
                        static_cast<Eigen::Index>(time.size()));
  for (std::size_t r = 0; r < no; ++r) {
    for (std::size_t j = 0; j < time.size(); ++j) {
      d.measurements(r, j) = y[r][j];
    }
  }
  return d;
}

}  // namespace amsghmc
