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

#include "amsghmc/strategy_net.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "amsghmc/error.hpp"

namespace amsghmc {

using Json = nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

std::size_t mlp_size(int n_in) {
  const std::size_t h = StrategyNetworks::kHidden;
  return h * (n_in + 1) + (StrategyNetworks::kLayers - 1) * h * (h + 1) + h + 1;
}

}  // namespace

SquashedInputs squash_inputs(double u_hat, double p, double grad_star,
                             const std::string& category,
                             const std::vector<std::string>& categories) {
  auto it = std::find(categories.begin(), categories.end(), category);
  if (it == categories.end()) {
    throw ConfigError("unknown parameter category '" + category + "'");
  }
  SquashedInputs s{squash_energy(u_hat), squash_momentum(p),
                   squash_gradient(grad_star),
                   std::vector<double>(categories.size(), 0.0)};
  s.one_hot[it - categories.begin()] = 1.0;
  return s;
}

StrategyNetworks::StrategyNetworks(std::vector<std::string> categories,
                                   NetConstants constants, bool shortcut,
                                   std::uint64_t init_seed)
    : categories_(std::move(categories)),
      constants_(constants),
      shortcut_(shortcut) {
  if (categories_.empty()) throw ConfigError("at least one category needed");
  if (!(constants_.M_Q > 0 && constants_.M_D > 0 && constants_.c1 > 0 &&
        constants_.c2 > 0)) {
    throw ConfigError("M_Q, M_D, c1 and c2 must be positive");
  }
  build_layout();

  // Fan-in scaled normal weights, zero biases, zero shortcut.
  Stream rng(init_seed, 0);
  auto init_mlp = [&](const Layout& l) {
    std::size_t k = l.mlp;
    int fan_in = n_in(l);
    for (int layer = 0; layer <= kLayers; ++layer) {
      const int units = layer == kLayers ? 1 : kHidden;
      const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (int o = 0; o < units; ++o) {
        for (int j = 0; j < fan_in; ++j) weights_[k++] = sd * rng.normal();
        weights_[k++] = 0.0;
      }
      fan_in = kHidden;
    }
  };
  init_mlp(q_);
  init_mlp(d_);
}

StrategyNetworks StrategyNetworks::zeros(std::vector<std::string> categories,
                                         NetConstants constants,
                                         bool shortcut) {
  StrategyNetworks n(std::move(categories), constants, shortcut, 0);
  std::fill(n.weights_.begin(), n.weights_.end(), 0.0);
  return n;
}

void StrategyNetworks::build_layout() {
  const int ncat = static_cast<int>(categories_.size());
  std::size_t offset = 0;
  for (Layout* l : {&q_, &d_}) {
    l->n_cont = l == &q_ ? 2 : 3;
    l->mlp = offset;
    offset += mlp_size(l->n_cont + ncat);
    l->linear = offset;
    l->rbf_amp = offset;
    if (shortcut_) {
      offset += l->n_cont + ncat;
      l->rbf_amp = offset;
      offset += kRbfUnits;
    }
    l->end = offset;
    l->centers.assign(static_cast<std::size_t>(kRbfUnits) * l->n_cont, 0.0);
    l->width = 1.0;
  }
  weights_.assign(offset, 0.0);
}

int StrategyNetworks::category_index(const std::string& name) const {
  auto it = std::find(categories_.begin(), categories_.end(), name);
  if (it == categories_.end()) {
    throw ConfigError("unknown parameter category '" + name + "'");
  }
  return static_cast<int>(it - categories_.begin());
}

bool StrategyNetworks::is_shortcut_weight(std::size_t k) const {
  if (!shortcut_) return false;
  for (const Layout* l : {&q_, &d_}) {
    if (k >= l->linear && k < l->end) return true;
  }
  return false;
}

void StrategyNetworks::initialize_rbf(
    const std::vector<std::vector<double>>& q_inputs,
    const std::vector<std::vector<double>>& d_inputs, Stream& rng) {
  if (!shortcut_) return;
  auto pick = [&](Layout& l, const std::vector<std::vector<double>>& xs) {
    if (xs.empty()) throw PreconditionError("no inputs to place RBF centers");
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int u = 0; u < kRbfUnits; ++u) {
      std::size_t chosen;
      if (static_cast<std::size_t>(u) < idx.size()) {
        const std::size_t r = u + rng.next() % (idx.size() - u);
        std::swap(idx[u], idx[r]);
        chosen = idx[u];
      } else {
        chosen = idx[rng.next() % idx.size()];
      }
      for (int j = 0; j < l.n_cont; ++j) {
        l.centers[static_cast<std::size_t>(u) * l.n_cont + j] = xs[chosen][j];
      }
    }
    std::vector<double> dist;
    for (int a = 0; a < kRbfUnits; ++a) {
      for (int b = a + 1; b < kRbfUnits; ++b) {
        double s = 0.0;
        for (int j = 0; j < l.n_cont; ++j) {
          const double e = l.centers[a * l.n_cont + j] - l.centers[b * l.n_cont + j];
          s += e * e;
        }
        dist.push_back(std::sqrt(s));
      }
    }
    std::nth_element(dist.begin(), dist.begin() + dist.size() / 2, dist.end());
    const double med = dist[dist.size() / 2];
    l.width = med > 1e-6 ? med : 1.0;
  };
  pick(q_, q_inputs);
  pick(d_, d_inputs);
  rbf_initialized_ = true;
}

StrategyValues StrategyNetworks::forward(double u_hat, double p,
                                         double grad_star, int cat,
                                         double sigma) const {
  std::span<const double> w(weights_);
  const double iu = squash_energy(u_hat);
  const double ip = squash_momentum(p);
  const double ig = squash_gradient(grad_star);
  return {sigma * (constants_.c1 + f_q(w, iu, ip, cat)),
          constants_.c2 + f_d(w, iu, ip, ig, cat)};
}

StrategyPartials StrategyNetworks::partials(double u_hat, double p,
                                            double grad_star, int cat,
                                            double sigma,
                                            double du_dtheta) const {
  using D = ad::Dual<double>;
  std::span<const double> w(weights_);
  const D iu_t = squash_energy(D(u_hat, du_dtheta));
  const D iu(squash_energy(u_hat), 0.0);
  const D ip_p = squash_momentum(D(p, 1.0));
  const D ip(squash_momentum(p), 0.0);
  const D ig(squash_gradient(grad_star), 0.0);
  return {sigma * f_q(w, iu_t, ip, cat).tangent,
          f_d(w, iu, ip_p, ig, cat).tangent,
          sigma * f_q(w, iu, ip_p, cat).tangent};
}

StrategyNetworks StrategyNetworks::permute_categories(
    const std::vector<int>& perm) const {
  const int ncat = static_cast<int>(categories_.size());
  if (static_cast<int>(perm.size()) != ncat) {
    throw PreconditionError("permutation size mismatch");
  }
  StrategyNetworks out = *this;
  for (int j = 0; j < ncat; ++j) out.categories_[j] = categories_[perm[j]];
  for (const Layout* l : {&q_, &d_}) {
    const int nin = n_in(*l);
    for (int o = 0; o < kHidden; ++o) {
      const std::size_t base = l->mlp + static_cast<std::size_t>(o) * (nin + 1);
      for (int j = 0; j < ncat; ++j) {
        out.weights_[base + l->n_cont + j] = weights_[base + l->n_cont + perm[j]];
      }
    }
    if (shortcut_) {
      for (int j = 0; j < ncat; ++j) {
        out.weights_[l->linear + l->n_cont + j] =
            weights_[l->linear + l->n_cont + perm[j]];
      }
    }
  }
  if (stats_.valid) {
    for (int j = 0; j < ncat; ++j) {
      out.stats_.category_variance[j] = stats_.category_variance[perm[j]];
    }
  }
  return out;
}

std::string StrategyNetworks::to_json() const {
  Json j;
  j["version"] = kCheckpointVersion;
  j["categories"] = categories_;
  j["constants"] = {{"M_Q", constants_.M_Q},
                    {"M_D", constants_.M_D},
                    {"c1", constants_.c1},
                    {"c2", constants_.c2},
                    {"leaky_slope", constants_.leaky_slope}};
  j["architecture"] = {{"hidden_units", kHidden},
                       {"hidden_layers", kLayers},
                       {"rbf_units", kRbfUnits}};
  j["shortcut"] = {{"enabled", shortcut_},
                   {"frozen", shortcut_frozen_},
                   {"rbf_initialized", rbf_initialized_},
                   {"q_centers", q_.centers},
                   {"q_width", q_.width},
                   {"d_centers", d_.centers},
                   {"d_width", d_.width}};
  j["weights"] = weights_;
  j["stats"] = {{"valid", stats_.valid},
                {"category_variance", stats_.category_variance},
                {"mu_U", stats_.mu_U},
                {"sigma_U", stats_.sigma_U}};
  return j.dump(1);
}

StrategyNetworks StrategyNetworks::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version");
    }
    const Json& a = j.at("architecture");
    if (a.at("hidden_units").get<int>() != kHidden ||
        a.at("hidden_layers").get<int>() != kLayers ||
        a.at("rbf_units").get<int>() != kRbfUnits) {
      throw IoError("checkpoint architecture does not match this build");
    }
    NetConstants c;
    const Json& jc = j.at("constants");
    c.M_Q = jc.at("M_Q");
    c.M_D = jc.at("M_D");
    c.c1 = jc.at("c1");
    c.c2 = jc.at("c2");
    c.leaky_slope = jc.at("leaky_slope");
    const Json& s = j.at("shortcut");
    StrategyNetworks n(j.at("categories").get<std::vector<std::string>>(), c,
                       s.at("enabled").get<bool>(), 0);
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != n.weights_.size()) {
      throw IoError("checkpoint weight count does not match architecture");
    }
    n.weights_ = std::move(w);
    n.shortcut_frozen_ = s.at("frozen");
    n.rbf_initialized_ = s.at("rbf_initialized");
    n.q_.centers = s.at("q_centers").get<std::vector<double>>();
    n.q_.width = s.at("q_width");
    n.d_.centers = s.at("d_centers").get<std::vector<double>>();
    n.d_.width = s.at("d_width");
    const Json& st = j.at("stats");
    n.stats_.valid = st.at("valid");
    n.stats_.category_variance =
        st.at("category_variance").get<std::vector<double>>();
    n.stats_.mu_U = st.at("mu_U");
    n.stats_.sigma_U = st.at("sigma_U");
    return n;
  } catch (const Json::exception& e) {
    throw IoError(std::string("incomplete checkpoint: ") + e.what());
  }
}

void StrategyNetworks::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json() << '\n';
}

StrategyNetworks StrategyNetworks::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<std::string> check_step_scale(double eta, const NetConstants& c) {
  std::vector<std::string> warnings;
  if (std::abs(eta * c.M_Q - 3.0) > 0.5) {
    warnings.push_back("eta * M_Q = " + std::to_string(eta * c.M_Q) +
                       " is far from 3");
  }
  if (eta * c.M_D > 1.0) {
    warnings.push_back("eta * M_D = " + std::to_string(eta * c.M_D) +
                       " exceeds 1");
  }
  return warnings;
}

}  // namespace amsghmc
