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

#ifndef VSTYLE_PARAM_STORE_HPP_
#define VSTYLE_PARAM_STORE_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "vstyle/tensor.hpp"

namespace vstyle {

class Rng;

// Ordered, named collection of trainable tensors plus optimizer state.
//
// Entries keep insertion order, so two stores built by the same construction
// sequence iterate identically. Optimizer moment buffers live in the same
// store under a reserved ".adam_m"/".adam_v" suffix; they serialize with the
// weights (checkpoints resume bit-exactly) but are skipped by parameters().
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  // Creates a trainable leaf; throws ContractError on duplicate names.
  Tensor& create(const std::string& name, Shape shape,
                 std::vector<double> data);
  Tensor& create_zeros(const std::string& name, Shape shape);

  bool contains(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  // Existing entry, or a fresh zero tensor (used for lazy moment buffers).
  Tensor& get_or_create_zeros(const std::string& name, const Shape& shape);

  // Names of trainable parameters, insertion-ordered, moments excluded.
  std::vector<std::string> parameter_names() const;
  // All entries, insertion-ordered.
  const std::vector<std::string>& entry_names() const { return order_; }

  void zero_grads();
  std::int64_t parameter_count() const;

  std::uint64_t rng_seed() const { return rng_seed_; }
  void set_rng_seed(std::uint64_t s) { rng_seed_ = s; }

  // Flat binary serialization ("VSTP"); bit-exact round trip.
  void save(const std::string& path) const;
  static ParameterStore load(const std::string& path);

  static bool is_reserved(const std::string& name);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> entries_;
  std::uint64_t rng_seed_;
};

// Fills `data` with Glorot-uniform values for a (fan_in, fan_out) weight.
std::vector<double> glorot_uniform(std::int64_t fan_in, std::int64_t fan_out,
                                   std::int64_t count, Rng& rng);

}  // namespace vstyle

#endif  // VSTYLE_PARAM_STORE_HPP_
