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

#include "sphdepth/optimizer.hpp"

#include <cmath>

#include "sphdepth/error.hpp"

namespace sphdepth {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adamw"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adamw") return OptimizerKind::AdamW;
  throw InvalidParameter("unknown optimizer '" + s + "' (expected sgd or adamw)");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidParameter("learning rate must be positive");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw InvalidParameter("decay factor must lie in (0, 1]");
  }
  if (decay_every < 0 || warmup_steps < 0) throw InvalidParameter("schedule steps must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidParameter("betas must lie in [0, 1)");
  }
  if (!(eps > 0.0) || weight_decay < 0.0 || momentum < 0.0 || momentum >= 1.0) {
    throw InvalidParameter("invalid optimizer constants");
  }
}

double scheduled_rate(const OptimizerConfig& config, int step) {
  double lr = config.learning_rate;
  if (config.decay_every > 0) lr *= std::pow(config.decay_factor, (step - 1) / config.decay_every);
  if (config.warmup_steps > 0 && step < config.warmup_steps) {
    lr *= static_cast<double>(step) / config.warmup_steps;
  }
  return lr;
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<NamedMatrix> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(p.matrix->rows(), p.matrix->cols());
    if (config_.kind == OptimizerKind::AdamW) v_.emplace_back(p.matrix->rows(), p.matrix->cols());
    const auto& n = p.name;
    decay_.push_back(n.size() >= 6 && n.compare(n.size() - 6, 6, "weight") == 0);
  }
}

void Optimizer::step(const std::vector<NamedMatrix>& grads) {
  if (grads.size() != params_.size()) throw ShapeError("gradient list does not match parameters");
  ++step_;
  const double lr = scheduled_rate(config_, step_);
  last_rate_ = lr;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, step_);
  const double c2 = 1.0 - std::pow(b2, step_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto p = params_[i].matrix->values();
    const auto g = grads[i].matrix->values();
    if (g.size() != p.size()) throw ShapeError("gradient shape mismatch for " + params_[i].name);
    auto m = m_[i].values();
    if (config_.kind == OptimizerKind::SGD) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = config_.momentum * m[k] + g[k];
        p[k] -= lr * m[k];
      }
      continue;
    }
    auto v = v_[i].values();
    const double wd = decay_[i] ? config_.weight_decay : 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      p[k] -= lr * (mh / (std::sqrt(vh) + config_.eps) + wd * p[k]);
    }
  }
}

}  // namespace sphdepth
