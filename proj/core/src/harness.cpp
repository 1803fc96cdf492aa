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

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "amsghmc/error.hpp"

namespace amsghmc {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kGenerate: return "generate";
    case Stage::kTrain: return "train";
    case Stage::kSample: return "sample";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kCompare: return "compare";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::kGenerate, Stage::kTrain, Stage::kSample,
                  Stage::kEvaluate, Stage::kCompare}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + name + "'");
}

namespace {

// Reads keys of one JSON object, rejecting any key never asked for.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && it->is_number_integer() &&
            !it->is_number_unsigned() && it->template get<long long>() < 0) {
          throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(name_ + "." + key + " has the wrong type");
    }
  }

  void betas(const char* key, BetaPair& out) {
    std::vector<double> v{out.beta1, out.beta2};
    get(key, v);
    if (v.size() != 2) throw ConfigError(name_ + "." + key + " needs two values");
    out = {v[0], v[1]};
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown key '" + name_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

Json betas_json(const BetaPair& b) { return Json::array({b.beta1, b.beta2}); }

Json config_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["sampler"] = to_string(c.sampler);
  j["checkpoint"] = c.checkpoint;
  j["trace"] = c.trace;
  j["timing"] = c.timing;
  Json cmp = Json::array();
  for (SamplerKind k : c.compare) cmp.push_back(to_string(k));
  j["compare"] = cmp;

  const ProblemConfig& p = c.problem;
  j["problem"] = {{"n_stories", p.n_stories}, {"k0", p.k0},
                  {"c0", p.c0},               {"sigma0", p.sigma0},
                  {"mass", p.mass},           {"dataset", p.dataset},
                  {"observed_dofs", p.observed_dofs},
                  {"flat_likelihood", p.flat_likelihood}};
  const GenerationConfig& g = c.generate;
  j["generate"] = {{"duration", g.duration},
                   {"dt", g.dt},
                   {"noise_ratio", g.noise_ratio},
                   {"perturbation_cov", g.perturbation_cov},
                   {"ground_std", g.ground_std}};
  const RunConfig& r = c.run;
  j["run"] = {{"K", r.chains},
              {"T", r.steps},
              {"burn_in", r.burn_in},
              {"tau", r.thin},
              {"eta", r.eta},
              {"G", r.sghmc_G},
              {"C", r.sghmc_C},
              {"hmc_step", r.hmc_step},
              {"L", r.hmc_leapfrog},
              {"target_accept", r.hmc_target_accept},
              {"adapt_step", r.hmc_adapt},
              {"spsa_steps", r.spsa_steps},
              {"window", {r.window_start, r.window_end}},
              {"betas_theta", betas_json(r.stats.theta)},
              {"betas_U", betas_json(r.stats.energy)},
              {"v0_scale", r.v0_scale}};
  const NetworkConfig& n = c.network;
  j["network"] = {{"M_Q", n.constants.M_Q},
                  {"M_D", n.constants.M_D},
                  {"c1", n.constants.c1},
                  {"c2", n.constants.c2},
                  {"leaky_slope", n.constants.leaky_slope},
                  {"shortcut", n.shortcut},
                  {"init_seed", n.init_seed}};
  const TrainingConfig& t = c.training;
  j["training"] = {{"K0", t.chains},
                   {"epochs", t.epochs},
                   {"sub_epochs", t.sub_epochs},
                   {"steps_per_sub_epoch", t.steps_per_sub_epoch},
                   {"T_T", t.segment_length},
                   {"K", t.loss_chains},
                   {"M", t.skipped},
                   {"tau", t.thin},
                   {"replay_prob", t.replay_prob},
                   {"replay_capacity", t.replay_capacity},
                   {"learning_rate", t.learning_rate},
                   {"adam_betas", {t.adam_beta1, t.adam_beta2}},
                   {"clip_norm", t.clip_norm},
                   {"eta", t.eta},
                   {"adapt_epochs", t.adapt_epochs},
                   {"adapt_last_sub_epochs", t.adapt_last_sub_epochs},
                   {"betas_theta", betas_json(t.theta_betas)},
                   {"betas_U", betas_json(t.energy_betas)},
                   {"detach_gamma", t.detach_gamma},
                   {"stein_ridge", t.stein.ridge},
                   {"divergence_abort_fraction", t.divergence_abort_fraction}};
  const EvaluationConfig& e = c.evaluation;
  Json surf = Json::array();
  for (const SurfaceRequest& s : e.surfaces) surf.push_back({s.i, s.j, s.k});
  j["evaluation"] = {{"max_fit_samples", e.kde.max_fit_samples},
                     {"max_eval_points", e.kde.max_eval_points},
                     {"ess_aggregate", to_string(e.ess_aggregate)},
                     {"pca", e.pca},
                     {"surfaces", surf},
                     {"surface_threshold", e.surface_threshold},
                     {"surface_iterations", e.surface_iterations},
                     {"surface_nodes", e.surface_nodes}};
  return j;
}

void validate(const ExperimentConfig& c) {
  const ProblemConfig& p = c.problem;
  if (p.n_stories < 1) throw ConfigError("problem.n_stories must be positive");
  if (!(p.k0 > 0 && p.c0 > 0 && p.sigma0 > 0 && p.mass > 0)) {
    throw ConfigError("problem k0, c0, sigma0 and mass must be positive");
  }
  for (int d : p.observed_dofs) {
    if (d < 0 || d >= p.n_stories) {
      throw ConfigError("problem.observed_dofs out of range");
    }
  }
  const RunConfig& r = c.run;
  if (r.chains < 1 || r.steps < 1 || r.thin < 1 || r.burn_in < 0 ||
      r.burn_in >= r.steps) {
    throw ConfigError("run needs K, T, tau >= 1 and 0 <= burn_in < T");
  }
  if (r.window_start < 0 || r.window_end < r.window_start) {
    throw ConfigError("run.window must satisfy 0 <= start <= end");
  }
  c.training.validate();
  if (c.output.empty()) throw ConfigError("output directory must be set");
  for (const SurfaceRequest& s : c.evaluation.surfaces) {
    if (s.i == s.j || s.i == s.k || s.j == s.k || s.i < 0 || s.j < 0 || s.k < 0) {
      throw ConfigError("evaluation.surfaces needs three distinct indices");
    }
  }
  if (c.evaluation.surface_nodes < 2 || c.evaluation.surface_iterations < 0 ||
      !(c.evaluation.surface_threshold > 0.0)) {
    throw ConfigError("invalid surface settings");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<int> observed_dofs(const ProblemConfig& p) {
  return p.observed_dofs.empty() ? default_observed_dofs(p.n_stories)
                                 : p.observed_dofs;
}

ShearBuilding nominal_building(const ProblemConfig& p) {
  return ShearBuilding::uniform(p.n_stories, p.k0, p.c0, p.mass);
}

GeneratedData generate(const ExperimentConfig& c) {
  GenerationConfig g = c.generate;
  g.observed_dofs = observed_dofs(c.problem);
  Stream rng(c.seed, 0x6e6e);
  return generate_dataset(nominal_building(c.problem), g, rng);
}

fs::path trace_dir(const ExperimentConfig& c) {
  return c.trace.empty() ? fs::path(c.output) / "trace" : fs::path(c.trace);
}

StrategyNetworks load_nets(const ExperimentConfig& c) {
  if (c.checkpoint.empty()) {
    throw ConfigError("the am-sghmc sampler needs a checkpoint");
  }
  return StrategyNetworks::load(c.checkpoint);
}

struct SampleRun {
  Trace trace;
  double wall_time_s = 0.0;
};

SampleRun sample(const ExperimentConfig& c, const Target& problem,
                 SamplerKind kind) {
  RunConfig run = c.run;
  run.sampler = kind;
  run.seed = c.seed;
  StrategyNetworks nets;
  const StrategyNetworks* np = nullptr;
  if (kind == SamplerKind::kAmSghmc) {
    nets = load_nets(c);
    np = &nets;
  }
  SampleRun out;
  const auto start = std::chrono::steady_clock::now();
  out.trace = run_chains(problem, run, np);
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

Json sample_summary(const Trace& t) {
  Json j;
  j["sampler"] = t.sampler;
  j["chains_requested"] = t.chains;
  j["chains_kept"] = static_cast<int>(t.samples.size());
  j["diverged_chains"] = t.diverged;
  j["samples_per_chain"] = t.samples_per_chain();
  if (t.sampler == "hmc") {
    j["acceptance"] = t.acceptance;
    j["step_sizes"] = t.step_sizes;
  }
  return j;
}

// Metrics of one trace; writes PCA and surface CSVs under `dir`.
Json metrics(const ExperimentConfig& c, const Trace& trace, double wall_time_s,
             const fs::path& dir) {
  const EvaluationConfig& e = c.evaluation;
  const PooledSamples pooled = pool(trace);
  KdeOptions kde = e.kde;
  kde.seed = c.seed;
  Json j;
  const KdeModel model = fit_cop(pooled.theta, kde);
  j["naive_loss"] = naive_loss(pooled.theta, pooled.U, model, kde);
  j["c_op"] = model.c_op();
  j["kde_warnings"] = model.warnings();
  const TraceEss ess = trace_ess(trace, e.ess_aggregate);
  j["ess_per_dim"] = ess.mean_per_dim;
  j["ess_aggregate"] = ess.aggregate;
  j["ess_aggregate_rule"] = to_string(e.ess_aggregate);
  if (c.timing) {
    j["wall_time_s"] = wall_time_s;
    j["ess_per_hour"] = wall_time_s > 0.0 ? ess.aggregate * 3600.0 / wall_time_s
                                          : 0.0;
  } else {
    j["wall_time_s"] = nullptr;
    j["ess_per_hour"] = nullptr;
  }
  j["samples"] = static_cast<int>(pooled.theta.rows());

  Json files = Json::array();
  if (e.pca && pooled.theta.rows() > 1) {
    const Pca pca = pca_project(pooled.theta);
    std::vector<std::string> header;
    for (Eigen::Index i = 0; i < pca.projected.cols(); ++i) {
      header.push_back("pc" + std::to_string(i + 1));
    }
    write_matrix_csv(pca.projected, header, (dir / "pca.csv").string());
    files.push_back("pca.csv");
    j["pca_variances"] = std::vector<double>(
        pca.variances.data(), pca.variances.data() + pca.variances.size());
  }
  for (const SurfaceRequest& s : e.surfaces) {
    const int D = static_cast<int>(pooled.theta.cols());
    if (s.i >= D || s.j >= D || s.k >= D) {
      throw ConfigError("surface index exceeds the state dimension");
    }
    const SurfaceGrid grid =
        default_grid(pooled.theta, s.i, s.j, e.surface_nodes);
    const Surface surf = conditional_mean_surface(
        pooled.theta, s.i, s.j, s.k, grid, e.surface_threshold,
        e.surface_iterations);
    const std::string name = "surface_" + std::to_string(s.i) + "_" +
                             std::to_string(s.j) + "_" + std::to_string(s.k) +
                             ".csv";
    write_surface_csv(surf, (dir / name).string());
    files.push_back(name);
  }
  j["files"] = files;
  return j;
}

double read_wall_time(const fs::path& dir) {
  const fs::path p = dir / "timing.json";
  if (!fs::exists(p)) return 0.0;
  try {
    return Json::parse(read_text(p.string())).at("wall_time_s").get<double>();
  } catch (const Json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

void write_timing(const fs::path& dir, double wall_time_s) {
  write_text(dir / "timing.json",
             Json{{"wall_time_s", wall_time_s}}.dump(2) + "\n");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(j, "config");
  top.get("seed", c.seed);
  top.get("output", c.output);
  std::string sampler = to_string(c.sampler);
  top.get("sampler", sampler);
  c.sampler = parse_sampler(sampler);
  top.get("checkpoint", c.checkpoint);
  top.get("trace", c.trace);
  top.get("timing", c.timing);
  std::vector<std::string> cmp;
  for (SamplerKind k : c.compare) cmp.push_back(to_string(k));
  top.get("compare", cmp);
  c.compare.clear();
  for (const std::string& s : cmp) c.compare.push_back(parse_sampler(s));

  if (const Json* pj = top.child("problem")) {
    Section s(*pj, "problem");
    ProblemConfig& p = c.problem;
    s.get("n_stories", p.n_stories);
    s.get("k0", p.k0);
    s.get("c0", p.c0);
    s.get("sigma0", p.sigma0);
    s.get("mass", p.mass);
    s.get("dataset", p.dataset);
    s.get("observed_dofs", p.observed_dofs);
    s.get("flat_likelihood", p.flat_likelihood);
    s.finish();
  }
  if (const Json* gj = top.child("generate")) {
    Section s(*gj, "generate");
    GenerationConfig& g = c.generate;
    s.get("duration", g.duration);
    s.get("dt", g.dt);
    s.get("noise_ratio", g.noise_ratio);
    s.get("perturbation_cov", g.perturbation_cov);
    s.get("ground_std", g.ground_std);
    s.finish();
  }
  if (const Json* rj = top.child("run")) {
    Section s(*rj, "run");
    RunConfig& r = c.run;
    s.get("K", r.chains);
    s.get("T", r.steps);
    s.get("burn_in", r.burn_in);
    s.get("tau", r.thin);
    s.get("eta", r.eta);
    s.get("G", r.sghmc_G);
    s.get("C", r.sghmc_C);
    s.get("hmc_step", r.hmc_step);
    s.get("L", r.hmc_leapfrog);
    s.get("target_accept", r.hmc_target_accept);
    s.get("adapt_step", r.hmc_adapt);
    s.get("spsa_steps", r.spsa_steps);
    std::vector<int> window{r.window_start, r.window_end};
    s.get("window", window);
    if (window.size() != 2) throw ConfigError("run.window needs two values");
    r.window_start = window[0];
    r.window_end = window[1];
    s.betas("betas_theta", r.stats.theta);
    s.betas("betas_U", r.stats.energy);
    s.get("v0_scale", r.v0_scale);
    s.finish();
  }
  if (const Json* nj = top.child("network")) {
    Section s(*nj, "network");
    NetworkConfig& n = c.network;
    s.get("M_Q", n.constants.M_Q);
    s.get("M_D", n.constants.M_D);
    s.get("c1", n.constants.c1);
    s.get("c2", n.constants.c2);
    s.get("leaky_slope", n.constants.leaky_slope);
    s.get("shortcut", n.shortcut);
    s.get("init_seed", n.init_seed);
    s.finish();
  }
  if (const Json* tj = top.child("training")) {
    Section s(*tj, "training");
    TrainingConfig& t = c.training;
    s.get("K0", t.chains);
    s.get("epochs", t.epochs);
    s.get("sub_epochs", t.sub_epochs);
    s.get("steps_per_sub_epoch", t.steps_per_sub_epoch);
    s.get("T_T", t.segment_length);
    s.get("K", t.loss_chains);
    s.get("M", t.skipped);
    s.get("tau", t.thin);
    s.get("replay_prob", t.replay_prob);
    s.get("replay_capacity", t.replay_capacity);
    s.get("learning_rate", t.learning_rate);
    BetaPair adam{t.adam_beta1, t.adam_beta2};
    s.betas("adam_betas", adam);
    t.adam_beta1 = adam.beta1;
    t.adam_beta2 = adam.beta2;
    s.get("clip_norm", t.clip_norm);
    s.get("eta", t.eta);
    s.get("adapt_epochs", t.adapt_epochs);
    s.get("adapt_last_sub_epochs", t.adapt_last_sub_epochs);
    s.betas("betas_theta", t.theta_betas);
    s.betas("betas_U", t.energy_betas);
    s.get("detach_gamma", t.detach_gamma);
    s.get("stein_ridge", t.stein.ridge);
    s.get("divergence_abort_fraction", t.divergence_abort_fraction);
    s.finish();
  }
  if (const Json* ej = top.child("evaluation")) {
    Section s(*ej, "evaluation");
    EvaluationConfig& e = c.evaluation;
    s.get("max_fit_samples", e.kde.max_fit_samples);
    s.get("max_eval_points", e.kde.max_eval_points);
    std::string agg = to_string(e.ess_aggregate);
    s.get("ess_aggregate", agg);
    e.ess_aggregate = parse_ess_aggregate(agg);
    s.get("pca", e.pca);
    std::vector<std::vector<int>> surf;
    for (const SurfaceRequest& r : e.surfaces) surf.push_back({r.i, r.j, r.k});
    s.get("surfaces", surf);
    e.surfaces.clear();
    for (const auto& v : surf) {
      if (v.size() != 3) throw ConfigError("each surface needs (i, j, k)");
      e.surfaces.push_back({v[0], v[1], v[2]});
    }
    s.get("surface_threshold", e.surface_threshold);
    s.get("surface_iterations", e.surface_iterations);
    s.get("surface_nodes", e.surface_nodes);
    s.finish();
  }
  top.finish();
  c.run.seed = c.seed;
  c.training.seed = c.seed;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text(path));
}

std::string to_json(const ExperimentConfig& config) {
  return config_json(config).dump(2);
}

void check_inputs(const ExperimentConfig& c, Stage stage) {
  validate(c);
  if (stage != Stage::kGenerate && !c.problem.dataset.empty()) {
    read_dataset_csv(c.problem.dataset, observed_dofs(c.problem));
  }
  const bool needs_nets =
      (stage == Stage::kSample && c.sampler == SamplerKind::kAmSghmc) ||
      (stage == Stage::kCompare &&
       std::find(c.compare.begin(), c.compare.end(), SamplerKind::kAmSghmc) !=
           c.compare.end());
  if (needs_nets) load_nets(c);
  if (stage == Stage::kCompare && c.compare.empty()) {
    throw ConfigError("compare needs at least one sampler");
  }
  if (stage == Stage::kEvaluate) read_trace(trace_dir(c).string());
}

std::unique_ptr<UpdatingProblem> build_problem(const ExperimentConfig& c) {
  const ProblemConfig& p = c.problem;
  ProblemSpec spec;
  spec.n_stories = p.n_stories;
  spec.k0 = p.k0;
  spec.c0 = p.c0;
  spec.sigma0 = p.sigma0;
  spec.mass = p.mass;
  spec.observed_dofs = observed_dofs(p);
  spec.flat_likelihood = p.flat_likelihood;
  Dataset data = p.dataset.empty() ? generate(c).dataset
                                   : read_dataset_csv(p.dataset, spec.observed_dofs);
  return std::make_unique<UpdatingProblem>(spec, std::move(data));
}

StageReport run_experiment(const ExperimentConfig& c, Stage stage) {
  const fs::path out(c.output);
  bool started = false;
  try {
    check_inputs(c, stage);
    started = true;
    fs::create_directories(out);
    fs::remove(out / "error.json");

    Json report;
    report["stage"] = to_string(stage);
    report["seed"] = c.seed;
    report["config"] = config_json(c);

    switch (stage) {
      case Stage::kGenerate: {
        const GeneratedData g = generate(c);
        write_dataset_csv((out / "dataset.csv").string(), g.dataset);
        report["dataset"] = {{"file", "dataset.csv"},
                             {"N_T", g.dataset.n_steps()},
                             {"N_o", g.dataset.n_observed()},
                             {"observed_dofs", g.dataset.observed_dofs},
                             {"noise_std", g.noise_std},
                             {"true_stiffness", g.truth.stiffness},
                             {"true_damping", g.truth.damping}};
        break;
      }
      case Stage::kTrain: {
        const auto problem = build_problem(c);
        StrategyNetworks nets(problem->category_names(), c.network.constants,
                              c.network.shortcut, c.network.init_seed);
        const TrainingResult r = train(*problem, std::move(nets), c.training);
        r.nets.save((out / "checkpoint.json").string());
        write_training_log(r.log, (out / "training_log.csv").string());
        const FrozenStats& fz = r.nets.frozen_stats();
        report["checkpoint"] = "checkpoint.json";
        report["training_log"] = "training_log.csv";
        report["sub_epochs"] = static_cast<int>(r.log.size());
        if (!r.log.empty()) {
          report["final_loss_energy"] = r.log.back().loss_energy;
          report["final_loss_entropy"] = r.log.back().loss_entropy;
        }
        report["frozen_stats"] = {{"category_variance", fz.category_variance},
                                  {"mu_U", fz.mu_U},
                                  {"sigma_U", fz.sigma_U}};
        break;
      }
      case Stage::kSample: {
        const auto problem = build_problem(c);
        const SampleRun run = sample(c, *problem, c.sampler);
        const fs::path dir = trace_dir(c);
        write_trace(run.trace, dir.string());
        if (c.timing) write_timing(dir, run.wall_time_s);
        report["trace"] = dir.string();
        report["run"] = sample_summary(run.trace);
        report["wall_time_s"] =
            c.timing ? Json(run.wall_time_s) : Json(nullptr);
        break;
      }
      case Stage::kEvaluate: {
        const fs::path dir = trace_dir(c);
        const Trace trace = read_trace(dir.string());
        report["trace"] = dir.string();
        report["run"] = sample_summary(trace);
        report["metrics"] = metrics(c, trace, read_wall_time(dir), out);
        break;
      }
      case Stage::kCompare: {
        const auto problem = build_problem(c);
        Json table = Json::object();
        for (SamplerKind kind : c.compare) {
          const std::string name = to_string(kind);
          const fs::path dir = out / name;
          fs::create_directories(dir);
          const SampleRun run = sample(c, *problem, kind);
          write_trace(run.trace, (dir / "trace").string());
          Json m = metrics(c, run.trace, run.wall_time_s, dir);
          m["run"] = sample_summary(run.trace);
          table[name] = m;
        }
        report["samplers"] = table;
        // Ratios against the first sampler in the list.
        const std::string base = to_string(c.compare.front());
        Json ratios = Json::object();
        for (SamplerKind kind : c.compare) {
          const std::string name = to_string(kind);
          const Json& a = table[name];
          const Json& b = table[base];
          Json r;
          r["ess_aggregate"] = a["ess_aggregate"].get<double>() /
                               b["ess_aggregate"].get<double>();
          r["naive_loss_rel_diff"] =
              (a["naive_loss"].get<double>() - b["naive_loss"].get<double>()) /
              std::abs(b["naive_loss"].get<double>());
          if (c.timing && b["ess_per_hour"].get<double>() > 0.0) {
            r["ess_per_hour"] = a["ess_per_hour"].get<double>() /
                                b["ess_per_hour"].get<double>();
          } else {
            r["ess_per_hour"] = nullptr;
          }
          ratios[name] = r;
        }
        report["ratios_vs"] = base;
        report["ratios"] = ratios;
        break;
      }
    }

    StageReport result;
    result.path = (out / "report.json").string();
    result.json = report.dump(2) + "\n";
    write_text(result.path, result.json);
    return result;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!ec) {
      std::ofstream err(out / "error.json");
      err << error_json(e, to_string(stage), started) << '\n';
    }
    throw;
  }
}

std::string error_json(const std::exception& e, const std::string& stage,
                       bool partial) {
  Json j;
  j["stage"] = stage;
  j["message"] = e.what();
  if (const auto* ae = dynamic_cast<const Error*>(&e)) {
    j["kind"] = ae->kind();
    if (const auto* ev = dynamic_cast<const EvaluationError*>(&e)) {
      j["node"] = ev->node();
    }
  } else {
    j["kind"] = "internal";
  }
  j["partial_outputs"] = partial;
  return Json{{"error", j}}.dump();
}

}  // namespace amsghmc
