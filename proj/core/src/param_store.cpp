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

#include "vstyle/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "vstyle/rng.hpp"

namespace vstyle {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'T', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
  // Little-endian on all supported targets.
  f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

bool ParameterStore::is_reserved(const std::string& name) {
  return name.ends_with(".adam_m") || name.ends_with(".adam_v");
}

Tensor& ParameterStore::create(const std::string& name, Shape shape,
                               std::vector<double> data) {
  if (entries_.count(name)) {
    throw ContractError("duplicate parameter name '" + name + "'");
  }
  order_.push_back(name);
  auto [it, ok] = entries_.emplace(
      name, Tensor::from(std::move(shape), std::move(data),
                         /*requires_grad=*/!is_reserved(name)));
  (void)ok;
  return it->second;
}

Tensor& ParameterStore::create_zeros(const std::string& name, Shape shape) {
  const auto n = shape_numel(shape);
  return create(name, std::move(shape), std::vector<double>(n, 0.0));
}

bool ParameterStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ContractError("unknown parameter '" + name + "'");
  }
  return it->second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ContractError("unknown parameter '" + name + "'");
  }
  return it->second;
}

Tensor& ParameterStore::get_or_create_zeros(const std::string& name,
                                            const Shape& shape) {
  auto it = entries_.find(name);
  if (it != entries_.end()) return it->second;
  return create_zeros(name, shape);
}

std::vector<std::string> ParameterStore::parameter_names() const {
  std::vector<std::string> out;
  out.reserve(order_.size());
  for (const auto& n : order_) {
    if (!is_reserved(n)) out.push_back(n);
  }
  return out;
}

void ParameterStore::zero_grads() {
  for (const auto& n : order_) entries_.at(n).zero_grad();
}

std::int64_t ParameterStore::parameter_count() const {
  std::int64_t c = 0;
  for (const auto& n : order_) {
    if (!is_reserved(n)) c += entries_.at(n).numel();
  }
  return c;
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u32(f, static_cast<std::uint32_t>(order_.size()));
  for (const auto& name : order_) {
    const Tensor& t = entries_.at(name);
    write_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& s = t.shape();
    write_u32(f, static_cast<std::uint32_t>(s.size()));
    for (auto d : s) write_u32(f, static_cast<std::uint32_t>(d));
    f.write(reinterpret_cast<const char*>(t.values().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

ParameterStore ParameterStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("'" + path + "' is not a VSTP parameter file");
  }
  const std::uint32_t version = read_u32(f);
  if (version != kVersion) {
    throw ParseError("unsupported VSTP version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(f);
  ParameterStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const std::uint32_t rank = read_u32(f);
    Shape shape(rank);
    for (auto& d : shape) d = read_u32(f);
    std::vector<double> data(shape_numel(shape));
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!f) throw ParseError("truncated VSTP file '" + path + "'");
    store.create(name, std::move(shape), std::move(data));
  }
  return store;
}

std::vector<double> glorot_uniform(std::int64_t fan_in, std::int64_t fan_out,
                                   std::int64_t count, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> out(count);
  for (auto& v : out) v = rng.uniform(-limit, limit);
  return out;
}

}  // namespace vstyle
