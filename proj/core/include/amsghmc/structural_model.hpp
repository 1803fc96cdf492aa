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
#include <span>
#include <string>
#include <vector>

#include "amsghmc/rng.hpp"

namespace amsghmc {

/// Linear N-story shear building. Story i connects floor i to floor i-1
/// (floor -1 is the ground).
struct ShearBuilding {
  std::vector<double> stiffness;  // N/m
  std::vector<double> damping;    // N s/m
  std::vector<double> mass;       // kg

  int n_stories() const { return static_cast<int>(stiffness.size()); }

  static ShearBuilding uniform(int n, double k, double c, double m);
};

struct SystemMatrices {
  Eigen::MatrixXd M, C, K;
};

/// Throws PreconditionError on a non-positive parameter or size mismatch.
SystemMatrices assemble_system(const ShearBuilding& b);

struct Dataset {
  double dt = 0.01;
  std::vector<double> ground;      // ground acceleration, one value per step
  std::vector<int> observed_dofs;  // 0-based floor indices
  Eigen::MatrixXd measurements;    // N_o x N_T
  double noise_ratio = 0.0;

  int n_steps() const { return static_cast<int>(ground.size()); }
  int n_observed() const { return static_cast<int>(observed_dofs.size()); }
};

/// Default sensor layout: first floor and roof.
std::vector<int> default_observed_dofs(int n_stories);

/// Total floor accelerations at the observed dofs, N_o x N_T.
/// Zero initial state; y(t_0) = 0; ground motion held constant over each dt.
/// Throws PreconditionError on a non-positive mass.
Eigen::MatrixXd simulate_accelerations(const ShearBuilding& b,
                                       const Dataset& d);

enum class ParamKind { kStiffness, kDamping };

struct ParamRef {
  ParamKind kind;
  int story;
};

struct Sensitivities {
  Eigen::MatrixXd y;
  std::vector<Eigen::MatrixXd> dy;  // one N_o x N_T matrix per ParamRef
};

Sensitivities simulate_with_sensitivities(const ShearBuilding& b,
                                          const Dataset& d,
                                          std::span<const ParamRef> wrt);

struct GenerationConfig {
  double duration = 3.0;
  double dt = 0.01;
  double noise_ratio = 1.0;
  double perturbation_cov = 0.1;
  double ground_std = 1.0;
  std::vector<int> observed_dofs;  // empty: default_observed_dofs
};

struct GeneratedData {
  Dataset dataset;
  ShearBuilding truth;
  Eigen::MatrixXd clean;
  double noise_std = 0.0;
};

GeneratedData generate_dataset(const ShearBuilding& nominal,
                               const GenerationConfig& cfg, Stream& rng);

/// CSV with header `time,ground,y_1,...`; one row per step.
void write_dataset_csv(const std::string& path, const Dataset& d);
Dataset read_dataset_csv(const std::string& path,
                         std::vector<int> observed_dofs);

}  // namespace amsghmc
