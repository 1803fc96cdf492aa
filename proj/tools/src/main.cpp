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

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "amsghmc/error.hpp"
#include "amsghmc/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string sampler;
  std::string trace;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "strategy network checkpoint");
  cmd->add_option("--sampler", o.sampler, "hmc, sghmc or am-sghmc");
}

amsghmc::ExperimentConfig resolve(const Options& o) {
  amsghmc::ExperimentConfig c = o.config.empty()
                                    ? amsghmc::parse_config("{}")
                                    : amsghmc::load_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.run.seed = *o.seed;
    c.training.seed = *o.seed;
  }
  if (!o.out.empty()) c.output = o.out;
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  if (!o.sampler.empty()) c.sampler = amsghmc::parse_sampler(o.sampler);
  if (!o.trace.empty()) c.trace = o.trace;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned SG-MCMC for Bayesian updating of shear buildings"};
  app.require_subcommand(1);
  Options opts;
  const char* verbs[][2] = {
      {"generate", "simulate a noisy acceleration dataset"},
      {"train", "meta-train the strategy networks"},
      {"sample", "run a sampler and write its trace"},
      {"evaluate", "naive loss, ESS, PCA and surfaces of a trace"},
      {"compare", "run several samplers on one dataset side by side"},
  };
  for (const auto& v : verbs) {
    CLI::App* cmd = app.add_subcommand(v[0], v[1]);
    add_common(cmd, opts);
    if (std::string(v[0]) == "evaluate") {
      cmd->add_option("--trace", opts.trace, "trace directory");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    const amsghmc::ExperimentConfig cfg = resolve(opts);
    const amsghmc::StageReport r =
        amsghmc::run_experiment(cfg, amsghmc::parse_stage(verb));
    std::cout << r.path << '\n';
    return 0;
  } catch (const amsghmc::ConfigError& e) {
    std::cerr << amsghmc::error_json(e, verb) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << amsghmc::error_json(e, verb) << '\n';
    return 1;
  }
}
