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

#pragma once

#include <vector>

#include "coder_forge/common.hpp"
#include "coder_forge/embedder.hpp"

namespace coder_forge {

struct LossConfig {
  double temperature = 0.02;

  /// Throws ConfigError unless temperature > 0 and finite.
  void validate() const;
};

struct LossInstance {
  EmbeddingVector q;
  EmbeddingVector pos;
  std::vector<EmbeddingVector> negs;
};

struct LossGradients {
  std::vector<double> q;
  std::vector<double> pos;
  std::vector<std::vector<double>> negs;
};

/// cos(a, b) / temperature. Throws Error for zero-norm inputs.
double scaled_sim(const EmbeddingVector& a, const EmbeddingVector& b, const LossConfig& cfg);

/// -log softmax of the positive logit against the explicit negatives,
/// evaluated with log-sum-exp so it stays finite at small temperatures.
double infonce_loss(const LossInstance& inst, const LossConfig& cfg);

/// Analytic gradients of infonce_loss, including the cosine Jacobian.
LossGradients infonce_grad(const LossInstance& inst, const LossConfig& cfg);

/// Central differences with step h; the oracle for infonce_grad.
LossGradients finite_difference_grad(const LossInstance& inst, const LossConfig& cfg,
                                     double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||, tiny) over all gradient components.
double gradient_relative_error(const LossGradients& a, const LossGradients& b);

LossInstance loss_instance_from_json(const Json& record);
Json gradients_to_json(const LossGradients& grads);

}  // namespace coder_forge
