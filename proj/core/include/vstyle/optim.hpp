// Copyright (c) 2026 The vstyle Authors
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

#ifndef VSTYLE_OPTIM_HPP_
#define VSTYLE_OPTIM_HPP_

#include <functional>
#include <string>
#include <vector>

#include "vstyle/param_store.hpp"
#include "vstyle/tensor.hpp"

namespace vstyle {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every trainable entry whose grad is
// populated. Moment buffers persist inside the store. `step` is 1-based.
void adam_step(ParameterStore& params, const AdamConfig& cfg, std::int64_t step);

// Scales all parameter grads so their global L2 norm is at most max_norm.
// Returns the pre-clip norm. Non-finite max_norm disables clipping.
double clip_grad_norm(ParameterStore& params, double max_norm);

struct GradCheckEntry {
  std::string name;
  std::int64_t index;
  double analytic;
  double numeric;
  double rel_err;
};

// Central-finite-difference verification of reverse-mode gradients.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
  std::vector<GradCheckEntry> worst;  // highest-error entries, capped
  bool pass(double tol) const { return max_rel_err <= tol; }
};

struct GradCheckOptions {
  double h = 1e-5;
  // Relative error uses max(|analytic|, |numeric|, floor) as denominator so
  // near-zero gradients with O(h^2) truncation noise do not dominate.
  double denom_floor = 1e-6;
  std::size_t keep_worst = 8;
};

// `f` must rebuild the scalar loss from the store's current values and be
// deterministic (any stochastic inputs frozen). Analytic gradients come from
// one taped evaluation; numeric ones from (f(w+h) - f(w-h)) / 2h per element.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           ParameterStore& params,
                           const GradCheckOptions& opts = {});

// Same check against an explicit list of leaf tensors.
GradCheckReport grad_check_inputs(const std::function<Tensor()>& f,
                                  std::vector<Tensor> inputs,
                                  const GradCheckOptions& opts = {});

}  // namespace vstyle

#endif  // VSTYLE_OPTIM_HPP_
