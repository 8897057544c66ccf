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

#ifndef VSTYLE_RNG_HPP_
#define VSTYLE_RNG_HPP_

#include <cstdint>
#include <vector>

namespace vstyle {

// Counter-based pseudo-random generator. Every output is a pure function of
// (seed, stream, counter), so identical seeds give bit-identical streams
// across runs, and independent streams can be split off for parallel work
// (one per utterance, per epoch, per training step) without sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0,
               std::uint64_t counter = 0)
      : seed_(seed), stream_(stream), counter_(counter) {}

  // Derived generator with an independent stream; does not advance *this.
  Rng split(std::uint64_t stream_index) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer on [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal via Box-Muller (consumes two uniforms per draw).
  double normal();
  double normal(double mean, double stddev);

  std::vector<double> normal_vec(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

}  // namespace vstyle

#endif  // VSTYLE_RNG_HPP_
