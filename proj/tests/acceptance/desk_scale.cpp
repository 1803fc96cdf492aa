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

#include "desk_scale.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <json.hpp>

#include "amsghmc/harness.hpp"

namespace amsghmc {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct TaskMetrics {
  double hmc_loss = 0.0, am_loss = 0.0, base_loss = 0.0;
  double hmc_ess = 0.0, am_ess = 0.0, base_ess = 0.0;
  double hmc_rate = 0.0, am_rate = 0.0;
};

Json compare(ExperimentConfig c, const std::string& out,
             const std::string& checkpoint, std::vector<SamplerKind> kinds) {
  c.output = out;
  c.checkpoint = checkpoint;
  c.compare = std::move(kinds);
  return Json::parse(run_experiment(c, Stage::kCompare).json)["samplers"];
}

TaskMetrics evaluate_task(const ExperimentConfig& c, const fs::path& dir,
                          const std::string& trained,
                          const std::string& constant) {
  const Json main = compare(c, (dir / "trained").string(), trained,
                            {SamplerKind::kHmc, SamplerKind::kAmSghmc});
  const Json base =
      compare(c, (dir / "constant").string(), constant, {SamplerKind::kAmSghmc});
  TaskMetrics m;
  m.hmc_loss = main["hmc"]["naive_loss"];
  m.am_loss = main["am-sghmc"]["naive_loss"];
  m.hmc_ess = main["hmc"]["ess_aggregate"];
  m.am_ess = main["am-sghmc"]["ess_aggregate"];
  m.base_ess = base["am-sghmc"]["ess_aggregate"];
  m.base_loss = base["am-sghmc"]["naive_loss"];
  m.hmc_rate = main["hmc"]["ess_per_hour"];
  m.am_rate = main["am-sghmc"]["ess_per_hour"];
  return m;
}

std::string describe(const char* name, const TaskMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s: naive loss AM %.3f vs HMC %.3f (rel %.2e, constant %.3f), "
                "ESS AM %.1f vs constant %.1f (x%.2f), HMC ESS %.1f, ESS/h "
                "ratio vs HMC %.2f",
                name, m.am_loss, m.hmc_loss,
                std::abs(m.am_loss - m.hmc_loss) / std::abs(m.hmc_loss),
                m.base_loss, m.am_ess,
                m.base_ess, m.am_ess / m.base_ess, m.hmc_ess,
                m.am_rate / m.hmc_rate);
  return buf;
}

}  // namespace

DeskScaleResult run_desk_scale(const DeskScaleOptions& o) {
  const fs::path root(o.output);
  ExperimentConfig c;
  c.seed = o.seed;
  c.problem.n_stories = 2;
  c.generate.duration = 1.0;
  c.training.epochs = o.epochs;
  c.network.constants.M_D = o.m_d;
  c.training.eta = o.train_eta;
  c.training.thin = o.train_thin;
  c.training.segment_length = 15 * o.train_thin;
  c.training.steps_per_sub_epoch = o.train_steps;
  c.training.adapt_epochs = std::max(1, o.epochs / 2);
  c.training.seed = o.seed;
  c.run.eta = o.run_eta;
  c.run.chains = o.chains;
  c.run.steps = o.steps;
  c.run.burn_in = o.burn_in;
  c.run.seed = o.seed;
  // Sample with the statistics frozen at the end of training.
  c.run.window_start = 0;
  c.run.window_end = 0;

  c.output = (root / "train").string();
  run_experiment(c, Stage::kTrain);
  const std::string trained = (root / "train" / "checkpoint.json").string();

  // Baseline: default constants, every weight zero (constant f_Q and f_D),
  // and the statistics frozen by training.
  const StrategyNetworks learned = StrategyNetworks::load(trained);
  StrategyNetworks constant =
      StrategyNetworks::zeros(learned.categories(), NetConstants{});
  constant.frozen_stats() = learned.frozen_stats();
  const std::string constant_path = (root / "constant.json").string();
  constant.save(constant_path);

  const TaskMetrics two = evaluate_task(c, root / "story2", trained, constant_path);
  ExperimentConfig c3 = c;
  c3.problem.n_stories = 3;
  const TaskMetrics three =
      evaluate_task(c3, root / "story3", trained, constant_path);

  const bool loss_ok =
      std::abs(two.am_loss - two.hmc_loss) <= 0.01 * std::abs(two.hmc_loss);
  const bool ess_ok =
      two.am_ess >= 1.2 * two.base_ess && three.am_ess >= 1.2 * three.base_ess;
  DeskScaleResult r;
  r.pass = loss_ok && ess_ok;
  r.summary = std::string("loss ") + (loss_ok ? "ok" : "FAILED") + ", ESS " +
              (ess_ok ? "ok" : "FAILED") + "; " + describe("2-story", two) +
              "; " + describe("3-story", three);
  return r;
}

}  // namespace amsghmc
