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

#include <benchmark/benchmark.h>

#include <memory>

#include "amsghmc/evaluation.hpp"
#include "amsghmc/sampler.hpp"
#include "amsghmc/target.hpp"
#include "amsghmc/training.hpp"

namespace amsghmc {
namespace {

std::unique_ptr<UpdatingProblem> make_problem(int stories, double duration) {
  ProblemSpec spec;
  spec.n_stories = stories;
  GenerationConfig g;
  g.duration = duration;
  Stream rng(1, 0);
  GeneratedData data = generate_dataset(
      ShearBuilding::uniform(stories, spec.k0, spec.c0, spec.mass), g, rng);
  return std::make_unique<UpdatingProblem>(spec, std::move(data.dataset));
}

void BM_Potential(benchmark::State& state) {
  const auto problem = make_problem(static_cast<int>(state.range(0)), 1.0);
  Stream rng(2, 0);
  const std::vector<double> theta = problem->sample_initial(rng);
  std::vector<double> grad(problem->dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(problem->potential(theta, grad));
  }
}
BENCHMARK(BM_Potential)->Arg(2)->Arg(3)->Arg(5);

void BM_SamplerStep(benchmark::State& state) {
  const auto problem = make_problem(2, 1.0);
  const SamplerKind kind = static_cast<SamplerKind>(state.range(0));
  StrategyNetworks nets(problem->category_names(), NetConstants{}, false, 3);
  const std::vector<int> cats = network_categories(*problem, nets);
  AdaptiveStats stats(problem->dim(), AdaptiveConfig{});
  stats.set(std::vector<double>(problem->dim(), 0.1), 80.0, 3.0);
  const std::vector<double> G(problem->dim(), 1.0), C(problem->dim(), 0.5);
  ChainState s = initial_chain(*problem, 4, 0);
  const ChainState start = s;
  Stream rng(5, 0);
  for (auto _ : state) {
    switch (kind) {
      case SamplerKind::kSghmc:
        sghmc_step(s, *problem, 1e-4, G, C, rng);
        break;
      case SamplerKind::kAmSghmc:
        am_sghmc_step(s, *problem, nets, cats, stats, 1e-3, rng);
        break;
      case SamplerKind::kHmc:
        hmc_step(s, *problem, 1e-3, 10, rng);
        break;
    }
    if (s.diverged) s = start;
  }
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_SamplerStep)
    ->Arg(static_cast<int>(SamplerKind::kHmc))
    ->Arg(static_cast<int>(SamplerKind::kSghmc))
    ->Arg(static_cast<int>(SamplerKind::kAmSghmc));

void BM_SegmentGradient(benchmark::State& state) {
  QuarticTarget target(5);
  StrategyNetworks nets({"x"}, NetConstants{}, false, 6);
  const std::vector<int> cats = network_categories(target, nets);
  const std::vector<double> sigma(5, 1.0);
  AmStepParams params;
  params.nets = &nets;
  params.categories = cats;
  params.sigma = sigma;
  params.eta = 0.005;
  params.detach_gamma = state.range(0) != 0;
  const int K = 10, S = 15;
  Segment seg;
  seg.theta.resize(K);
  seg.U.resize(K);
  seg.grad.resize(K);
  seg.steps.resize(K);
  for (int k = 0; k < K; ++k) {
    ChainState c = initial_chain(target, 7, k);
    Stream rng(7, 100 + k);
    std::vector<double> tn, pn, noise(5);
    for (int s = 0; s <= S; ++s) {
      seg.theta[k].push_back(c.theta);
      seg.U[k].push_back(c.U);
      seg.grad[k].push_back(c.grad);
      if (s == S) break;
      for (double& v : noise) v = rng.normal();
      seg.steps[k].push_back({c.theta, c.p, c.grad, noise, c.U, sigma, 0.0, 1.0});
      am_sghmc_update<double>(nets.weights(), params, c.theta, c.p, c.U,
                              c.grad, noise, tn, pn);
      c.theta = tn;
      c.p = pn;
      refresh(c, target);
    }
  }
  const LossTerms loss = training_loss(seg, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        segment_gradient(nets, cats, 0.005, params.detach_gamma, seg, loss));
  }
  state.SetLabel(params.detach_gamma ? "detached" : "full");
}
BENCHMARK(BM_SegmentGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

Eigen::MatrixXd gaussian_samples(int n, int D, std::uint64_t seed) {
  Stream rng(seed, 0);
  Eigen::MatrixXd x(n, D);
  for (int a = 0; a < n; ++a) {
    for (int i = 0; i < D; ++i) x(a, i) = rng.normal();
  }
  return x;
}

void BM_Stein(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian_samples(static_cast<int>(state.range(0)), 5, 8);
  for (auto _ : state) benchmark::DoNotOptimize(stein_gradient(x).scores);
}
BENCHMARK(BM_Stein)->Arg(160)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FitCop(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian_samples(static_cast<int>(state.range(0)), 5, 9);
  for (auto _ : state) benchmark::DoNotOptimize(fit_cop(x).c_op());
}
BENCHMARK(BM_FitCop)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace amsghmc

BENCHMARK_MAIN();
