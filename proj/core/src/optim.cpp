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

#include "vstyle/optim.hpp"

#include <algorithm>
#include <cmath>

namespace vstyle {

void adam_step(ParameterStore& params, const AdamConfig& cfg,
               std::int64_t step) {
  if (step < 1) throw ContractError("adam_step requires step >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (const auto& name : params.parameter_names()) {
    Tensor& w = params.get(name);
    if (!w.has_grad()) {
      throw ContractError("adam_step: parameter '" + name + "' has no grad");
    }
    Tensor& m = params.get_or_create_zeros(name + ".adam_m", w.shape());
    Tensor& v = params.get_or_create_zeros(name + ".adam_v", w.shape());
    auto& wd = w.mutable_values();
    auto& md = m.mutable_values();
    auto& vd = v.mutable_values();
    auto g = w.grad();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * g[i];
      vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = md[i] / bc1;
      const double vhat = vd[i] / bc2;
      wd[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double clip_grad_norm(ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& name : params.parameter_names()) {
    for (double g : params.get(name).grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (std::isfinite(max_norm) && norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& name : params.parameter_names()) {
      Tensor& w = params.get(name);
      if (!w.has_grad()) continue;
      auto& g = w.node()->grad_buf();
      for (auto& v : g) v *= s;
    }
  }
  return norm;
}

namespace {

struct Probe {
  std::string name;
  Tensor tensor;
};

GradCheckReport run_check(const std::function<Tensor()>& f,
                          std::vector<Probe> probes,
                          const GradCheckOptions& opts) {
  // Analytic pass: one taped forward + backward.
  std::vector<std::vector<double>> analytic;
  {
    for (auto& p : probes) p.tensor.zero_grad();
    Tape tape;
    Tensor loss = f();
    if (loss.numel() != 1) {
      throw ContractError("grad_check requires a scalar-valued function");
    }
    tape.backward(loss);
    for (auto& p : probes) {
      auto g = p.tensor.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty())
        analytic.back().assign(p.tensor.numel(), 0.0);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;  // numeric probes need values only
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    auto& data = probes[pi].tensor.node()->value;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + opts.h;
      const double fp = f().item();
      data[i] = saved - opts.h;
      const double fm = f().item();
      data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * opts.h);
      const double a = analytic[pi][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), opts.denom_floor});
      const double rel = std::abs(a - numeric) / denom;
      report.checked += 1;
      if (rel > report.max_rel_err) report.max_rel_err = rel;
      if (report.worst.size() < opts.keep_worst ||
          rel > report.worst.back().rel_err) {
        report.worst.push_back({probes[pi].name,
                                static_cast<std::int64_t>(i), a, numeric,
                                rel});
        std::sort(report.worst.begin(), report.worst.end(),
                  [](const auto& x, const auto& y) {
                    return x.rel_err > y.rel_err;
                  });
        if (report.worst.size() > opts.keep_worst)
          report.worst.resize(opts.keep_worst);
      }
    }
  }
  return report;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           ParameterStore& params,
                           const GradCheckOptions& opts) {
  std::vector<Probe> probes;
  for (const auto& name : params.parameter_names()) {
    probes.push_back({name, params.get(name)});
  }
  return run_check(f, std::move(probes), opts);
}

GradCheckReport grad_check_inputs(const std::function<Tensor()>& f,
                                  std::vector<Tensor> inputs,
                                  const GradCheckOptions& opts) {
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    probes.push_back({"input" + std::to_string(i), inputs[i]});
  }
  return run_check(f, std::move(probes), opts);
}

}  // namespace vstyle
