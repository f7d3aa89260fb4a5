// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lioncub {

struct Layer {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// Named layers of flat real vectors. Holds parameters, momenta and gradients.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<Layer> layers);

  void add(std::string name, std::vector<std::size_t> shape, double fill = 0.0);

  std::size_t size() const { return layers_.size(); }
  std::size_t total_elements() const;

  Layer& operator[](std::size_t i) { return layers_[i]; }
  const Layer& operator[](std::size_t i) const { return layers_[i]; }

  Layer* find(std::string_view name);
  const Layer* find(std::string_view name) const;
  Layer& at(std::string_view name);
  const Layer& at(std::string_view name) const;

  auto begin() { return layers_.begin(); }
  auto end() { return layers_.end(); }
  auto begin() const { return layers_.begin(); }
  auto end() const { return layers_.end(); }

  // Same layer names (in order) and same element counts.
  bool same_shape(const ParamSet& other) const;
  // Throws ConfigError naming the first mismatch.
  void require_same_shape(const ParamSet& other, std::string_view what) const;

  ParamSet zeros_like() const;

  // 64-bit FNV-1a over names and the exact bit patterns of the values.
  std::uint64_t fingerprint() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Layer> layers_;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

}  // namespace lioncub
