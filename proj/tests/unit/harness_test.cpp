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

#include "amsghmc/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "amsghmc/error.hpp"

namespace amsghmc {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("amsghmc_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A desk-sized 2-story experiment.
ExperimentConfig small_config(const fs::path& out) {
  Json j = {
      {"seed", 5},
      {"output", out.string()},
      {"timing", false},
      {"problem", {{"n_stories", 2}}},
      {"generate", {{"duration", 0.5}, {"dt", 0.01}}},
      {"run",
       {{"K", 3}, {"T", 500}, {"burn_in", 200}, {"eta", 0.001},
        {"spsa_steps", 50}, {"window", {20, 180}}}},
      {"training",
       {{"K0", 6}, {"epochs", 1}, {"sub_epochs", 2}, {"steps_per_sub_epoch", 10},
        {"T_T", 5}, {"K", 3}, {"M", 1}, {"eta", 0.001}, {"adapt_epochs", 1},
        {"adapt_last_sub_epochs", 1}}},
  };
  return parse_config(j.dump());
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig a = parse_config("{}");
  EXPECT_EQ(a.run.chains, 32);
  EXPECT_EQ(a.training.segment_length, 15);
  EXPECT_EQ(a.training.theta_betas.beta2, 0.999);
  EXPECT_EQ(a.run.stats.theta.beta2, 0.995);
  const ExperimentConfig b = parse_config(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Config, ValuesRoundTrip) {
  const ExperimentConfig a = small_config("somewhere");
  const ExperimentConfig b = parse_config(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.run.chains, 3);
  EXPECT_EQ(b.run.seed, 5u);
  EXPECT_EQ(b.training.seed, 5u);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_config(R"({"sed": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"run": {"eta": 0.1, "etta": 2}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"training": {"T": 3}})"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse_config(R"({"run": {"eta": "fast"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"sampler": "nuts"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seed": -1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"run": {"burn_in": 9000}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"training": {"M": 15}})"), ConfigError);
  EXPECT_THROW(parse_config("{"), ConfigError);
}

TEST(Harness, GenerateFiveStoryDataset) {
  const fs::path out = scratch("generate");
  ExperimentConfig c = parse_config(Json{{"output", out.string()},
                                         {"problem", {{"n_stories", 5}}}}
                                        .dump());
  const StageReport r = run_experiment(c, Stage::kGenerate);
  const Json rep = Json::parse(r.json);
  EXPECT_EQ(rep["dataset"]["N_T"], 300);
  EXPECT_EQ(rep["dataset"]["N_o"], 2);
  const Dataset d = read_dataset_csv((out / "dataset.csv").string(), {0, 4});
  EXPECT_EQ(d.n_steps(), 300);
  EXPECT_EQ(rep["config"]["problem"]["n_stories"], 5);
  fs::remove_all(out);
}

TEST(Harness, TrainSampleEvaluateAndCompare) {
  const fs::path out = scratch("pipeline");
  ExperimentConfig c = small_config(out);
  run_experiment(c, Stage::kTrain);
  ASSERT_TRUE(fs::exists(out / "checkpoint.json"));
  ASSERT_TRUE(fs::exists(out / "training_log.csv"));

  c.checkpoint = (out / "checkpoint.json").string();
  c.evaluation.surfaces = {{0, 1, 2}};
  run_experiment(c, Stage::kSample);
  const StageReport ev = run_experiment(c, Stage::kEvaluate);
  const Json m = Json::parse(ev.json)["metrics"];
  EXPECT_TRUE(m["naive_loss"].is_number());
  EXPECT_EQ(m["ess_per_dim"].size(), 5u);
  EXPECT_TRUE(fs::exists(out / "pca.csv"));
  EXPECT_TRUE(fs::exists(out / "surface_0_1_2.csv"));

  c.compare = {SamplerKind::kHmc, SamplerKind::kAmSghmc};
  c.evaluation.surfaces.clear();
  const StageReport cmp = run_experiment(c, Stage::kCompare);
  const Json rep = Json::parse(cmp.json);
  for (const char* name : {"hmc", "am-sghmc"}) {
    EXPECT_TRUE(rep["samplers"][name]["naive_loss"].is_number()) << name;
    EXPECT_TRUE(rep["samplers"][name]["ess_aggregate"].is_number()) << name;
  }
  EXPECT_EQ(rep["ratios"]["hmc"]["ess_aggregate"], 1.0);

  // The embedded config reproduces the run.
  const ExperimentConfig again = parse_config(rep["config"].dump());
  const StageReport cmp2 = run_experiment(again, Stage::kCompare);
  EXPECT_EQ(cmp.json, cmp2.json);
  fs::remove_all(out);
}

TEST(Harness, CheckpointTransfersToTallerBuilding) {
  const fs::path out = scratch("transfer");
  ExperimentConfig c = small_config(out);
  run_experiment(c, Stage::kTrain);
  c.checkpoint = (out / "checkpoint.json").string();
  c.problem.n_stories = 3;
  c.evaluation.pca = false;
  const StageReport r = run_experiment(c, Stage::kSample);
  EXPECT_EQ(Json::parse(r.json)["run"]["sampler"], "am-sghmc");
  fs::remove_all(out);
}

TEST(Harness, FailureWritesErrorJson) {
  const fs::path out = scratch("error");
  ExperimentConfig c = small_config(out);
  c.checkpoint = (out / "missing.json").string();
  EXPECT_THROW(run_experiment(c, Stage::kSample), IoError);
  const Json err = Json::parse(slurp(out / "error.json"));
  EXPECT_EQ(err["error"]["kind"], "io");
  EXPECT_EQ(err["error"]["stage"], "sample");
  EXPECT_FALSE(fs::exists(out / "trace"));
  fs::remove_all(out);
}

TEST(Harness, EvaluateNeedsTrace) {
  const fs::path out = scratch("notrace");
  ExperimentConfig c = small_config(out);
  EXPECT_THROW(check_inputs(c, Stage::kEvaluate), IoError);
  fs::remove_all(out);
}

}  // namespace
}  // namespace amsghmc
