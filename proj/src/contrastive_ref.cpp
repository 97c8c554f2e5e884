// Copyright 2026-present the coder-forge authors
//
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

#include "coder_forge/contrastive_ref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coder_forge {

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive");
  }
}

namespace {

double checked_norm(const EmbeddingVector& v) {
  const double n = v.norm();
  if (n == 0.0) throw Error("zero-norm vector");
  return n;
}

void check_instance(const LossInstance& inst, const LossConfig& cfg) {
  cfg.validate();
  if (inst.negs.empty()) throw Error("loss needs at least one negative");
  for (const auto& n : inst.negs) {
    if (n.dim() != inst.q.dim()) throw Error("negative dimension differs from query");
  }
  if (inst.pos.dim() != inst.q.dim()) throw Error("positive dimension differs from query");
}

std::vector<double> logits(const LossInstance& inst, const LossConfig& cfg) {
  std::vector<double> s;
  s.reserve(inst.negs.size() + 1);
  s.push_back(scaled_sim(inst.q, inst.pos, cfg));
  for (const auto& n : inst.negs) s.push_back(scaled_sim(inst.q, n, cfg));
  return s;
}

// d cos(a, b) / d a = b / (|a||b|) - cos * a / |a|^2
void add_cos_grad(const EmbeddingVector& a, const EmbeddingVector& b, double weight,
                  std::vector<double>& out) {
  const double na = checked_norm(a);
  const double nb = checked_norm(b);
  const double c = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.dim(); ++i) {
    out[i] += weight * (b[i] / (na * nb) - c * a[i] / (na * na));
  }
}

}  // namespace

double scaled_sim(const EmbeddingVector& a, const EmbeddingVector& b, const LossConfig& cfg) {
  cfg.validate();
  return dot(a, b) / (checked_norm(a) * checked_norm(b)) / cfg.temperature;
}

double infonce_loss(const LossInstance& inst, const LossConfig& cfg) {
  check_instance(inst, cfg);
  const auto s = logits(inst, cfg);
  const double sp = s[0];
  const double m = *std::max_element(s.begin(), s.end());
  if (m == sp) {
    // log(1 + sum exp(s_j - s+)) keeps full precision when the loss is tiny.
    double acc = 0.0;
    for (std::size_t j = 1; j < s.size(); ++j) acc += std::exp(s[j] - sp);
    return std::log1p(acc);
  }
  double acc = 0.0;
  for (double x : s) acc += std::exp(x - m);
  return (m - sp) + std::log(acc);
}

LossGradients infonce_grad(const LossInstance& inst, const LossConfig& cfg) {
  check_instance(inst, cfg);
  const auto s = logits(inst, cfg);
  const double m = *std::max_element(s.begin(), s.end());
  std::vector<double> p(s.size());
  double z = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) z += (p[j] = std::exp(s[j] - m));
  for (double& x : p) x /= z;
  // dL/ds_0 = p_0 - 1 = -sum_{j>0} p_j, computed without cancellation.
  double neg_mass = 0.0;
  for (std::size_t j = 1; j < p.size(); ++j) neg_mass += p[j];

  const std::size_t dim = inst.q.dim();
  const double inv_t = 1.0 / cfg.temperature;
  LossGradients g;
  g.q.assign(dim, 0.0);
  g.pos.assign(dim, 0.0);
  g.negs.assign(inst.negs.size(), std::vector<double>(dim, 0.0));

  const double w_pos = -neg_mass * inv_t;
  add_cos_grad(inst.q, inst.pos, w_pos, g.q);
  add_cos_grad(inst.pos, inst.q, w_pos, g.pos);
  for (std::size_t j = 0; j < inst.negs.size(); ++j) {
    const double w = p[j + 1] * inv_t;
    add_cos_grad(inst.q, inst.negs[j], w, g.q);
    add_cos_grad(inst.negs[j], inst.q, w, g.negs[j]);
  }
  return g;
}

LossGradients finite_difference_grad(const LossInstance& inst, const LossConfig& cfg, double h) {
  check_instance(inst, cfg);
  auto partials = [&](auto&& get) {
    LossInstance probe = inst;
    EmbeddingVector& target = get(probe);
    const std::vector<double> base = target.values();
    std::vector<double> out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto plus = base;
      auto minus = base;
      plus[i] += h;
      minus[i] -= h;
      target = EmbeddingVector(plus);
      const double lp = infonce_loss(probe, cfg);
      target = EmbeddingVector(minus);
      const double lm = infonce_loss(probe, cfg);
      out[i] = (lp - lm) / (2.0 * h);
    }
    return out;
  };
  LossGradients g;
  g.q = partials([](LossInstance& x) -> EmbeddingVector& { return x.q; });
  g.pos = partials([](LossInstance& x) -> EmbeddingVector& { return x.pos; });
  for (std::size_t j = 0; j < inst.negs.size(); ++j) {
    g.negs.push_back(partials([j](LossInstance& x) -> EmbeddingVector& { return x.negs[j]; }));
  }
  return g;
}

double gradient_relative_error(const LossGradients& a, const LossGradients& b) {
  if (a.negs.size() != b.negs.size()) throw Error("gradient shapes differ");
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  auto acc = [&](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("gradient shapes differ");
    for (std::size_t i = 0; i < x.size(); ++i) {
      diff += (x[i] - y[i]) * (x[i] - y[i]);
      na += x[i] * x[i];
      nb += y[i] * y[i];
    }
  };
  acc(a.q, b.q);
  acc(a.pos, b.pos);
  for (std::size_t j = 0; j < a.negs.size(); ++j) acc(a.negs[j], b.negs[j]);
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), std::numeric_limits<double>::min()});
  return std::sqrt(diff) / denom;
}

LossInstance loss_instance_from_json(const Json& record) {
  LossInstance inst;
  inst.q = EmbeddingVector(record.at("q").get<std::vector<double>>());
  inst.pos = EmbeddingVector(record.at("pos").get<std::vector<double>>());
  for (const auto& n : record.at("negs")) inst.negs.emplace_back(n.get<std::vector<double>>());
  return inst;
}

Json gradients_to_json(const LossGradients& grads) {
  return {{"q", grads.q}, {"pos", grads.pos}, {"negs", grads.negs}};
}

}  // namespace coder_forge
