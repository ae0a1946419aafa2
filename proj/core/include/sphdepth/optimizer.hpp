/*
 * Copyright (c) 2026, the spheredepth authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

#include "sphdepth/sphere_nn.hpp"

namespace sphdepth {

enum class OptimizerKind { SGD, AdamW };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdamW;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled, applied to "weight" tensors only
  double momentum = 0.0;       // SGD
  int decay_every = 0;         // steps between decays; 0 disables
  double decay_factor = 0.9;
  int warmup_steps = 0;

  void validate() const;
};

/// Step-decayed rate with linear warm-up; `step` counts from 1.
double scheduled_rate(const OptimizerConfig& config, int step);

/// Updates a fixed list of parameter matrices in place.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<NamedMatrix> params);

  /// grads must list matrices of the same shapes in the same order.
  void step(const std::vector<NamedMatrix>& grads);
  int steps_taken() const noexcept { return step_; }
  double last_rate() const noexcept { return last_rate_; }

 private:
  OptimizerConfig config_;
  std::vector<NamedMatrix> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::vector<bool> decay_;
  int step_ = 0;
  double last_rate_ = 0.0;
};

}  // namespace sphdepth
