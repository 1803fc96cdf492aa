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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "amsghmc/evaluation.hpp"
#include "amsghmc/sampler.hpp"
#include "amsghmc/strategy_net.hpp"
#include "amsghmc/structural_model.hpp"
#include "amsghmc/target.hpp"
#include "amsghmc/training.hpp"

namespace amsghmc {

enum class Stage { kGenerate, kTrain, kSample, kEvaluate, kCompare };

std::string to_string(Stage stage);
/// Throws ConfigError on an unknown stage name.
Stage parse_stage(const std::string& name);

struct ProblemConfig {
  int n_stories = 2;
  double k0 = 2e7;
  double c0 = 6e4;
  double sigma0 = 1.0;
  double mass = 2e4;
  /// Dataset CSV. Empty: a dataset is generated from the run seed.
  std::string dataset;
  std::vector<int> observed_dofs;  // empty: first floor and roof
  bool flat_likelihood = false;
};

struct NetworkConfig {
  NetConstants constants;
  bool shortcut = false;
  std::uint64_t init_seed = 0;
};

struct SurfaceRequest {
  int i = 0, j = 1, k = 2;
};

struct EvaluationConfig {
  KdeOptions kde;
  EssAggregate ess_aggregate = EssAggregate::kMeanOfMinimum;
  bool pca = true;
  std::vector<SurfaceRequest> surfaces;
  double surface_threshold = 0.3;
  int surface_iterations = 3;
  int surface_nodes = 41;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output = "out";
  SamplerKind sampler = SamplerKind::kAmSghmc;
  std::string checkpoint;  // strategy networks for am-sghmc
  std::string trace;       // trace directory for evaluate; empty: output/trace
  /// Record wall time and ESS per hour. Off makes reports reproducible
  /// byte for byte.
  bool timing = true;
  std::vector<SamplerKind> compare{SamplerKind::kHmc, SamplerKind::kSghmc,
                                   SamplerKind::kAmSghmc};

  ProblemConfig problem;
  GenerationConfig generate;
  RunConfig run;
  NetworkConfig network;
  TrainingConfig training;
  EvaluationConfig evaluation;
};

/// Parses a JSON config. Missing keys keep their defaults; unknown keys and
/// wrongly typed values throw ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved config as JSON; parse_config(to_json(c)) reproduces c.
std::string to_json(const ExperimentConfig& config);

/// Checks that every file the stage reads exists and parses, before any
/// compute. Throws ConfigError or IoError.
void check_inputs(const ExperimentConfig& config, Stage stage);

/// The problem of the config, with its dataset loaded or generated.
std::unique_ptr<UpdatingProblem> build_problem(const ExperimentConfig& config);

struct StageReport {
  std::string path;  // report file
  std::string json;  // report contents
};

/// Runs one stage and writes its outputs and report.json under
/// config.output. A failure leaves error.json there and rethrows.
StageReport run_experiment(const ExperimentConfig& config, Stage stage);

/// Machine-readable description of an exception. `partial` flags outputs
/// left behind by a stage that failed after it started writing.
std::string error_json(const std::exception& e, const std::string& stage,
                       bool partial = false);

}  // namespace amsghmc
