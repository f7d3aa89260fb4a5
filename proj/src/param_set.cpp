// SPDX-License-Identifier: Apache-2.0

#include "lioncub/param_set.hpp"

#include <cstring>

#include "lioncub/errors.hpp"

namespace lioncub {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

ParamSet::ParamSet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (const auto& l : layers_) {
    if (element_count(l.shape) != l.values.size()) {
      throw ConfigError("layer '" + l.name + "' shape does not match its size");
    }
  }
}

void ParamSet::add(std::string name, std::vector<std::size_t> shape,
                   double fill) {
  if (find(name)) throw ConfigError("duplicate layer '" + name + "'");
  const std::size_t n = element_count(shape);
  layers_.push_back(Layer{std::move(name), std::move(shape),
                          std::vector<double>(n, fill)});
}

std::size_t ParamSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.values.size();
  return n;
}

Layer* ParamSet::find(std::string_view name) {
  for (auto& l : layers_) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

const Layer* ParamSet::find(std::string_view name) const {
  for (const auto& l : layers_) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

Layer& ParamSet::at(std::string_view name) {
  if (auto* l = find(name)) return *l;
  throw ConfigError("no layer named '" + std::string(name) + "'");
}

const Layer& ParamSet::at(std::string_view name) const {
  if (const auto* l = find(name)) return *l;
  throw ConfigError("no layer named '" + std::string(name) + "'");
}

bool ParamSet::same_shape(const ParamSet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name != other.layers_[i].name ||
        layers_[i].values.size() != other.layers_[i].values.size()) {
      return false;
    }
  }
  return true;
}

void ParamSet::require_same_shape(const ParamSet& other,
                                  std::string_view what) const {
  if (layers_.size() != other.layers_.size()) {
    throw ConfigError(std::string(what) + ": layer count mismatch");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name != other.layers_[i].name ||
        layers_[i].values.size() != other.layers_[i].values.size()) {
      throw ConfigError(std::string(what) + ": layer '" + layers_[i].name +
                        "' does not match '" + other.layers_[i].name + "'");
    }
  }
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& l : layers_) out.add(l.name, l.shape, 0.0);
  return out;
}

std::uint64_t ParamSet::fingerprint() const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001B3ull;
    }
  };
  for (const auto& l : layers_) {
    mix(l.name.data(), l.name.size());
    for (double v : l.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      mix(&bits, sizeof bits);
    }
  }
  return h;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape != b[i].shape ||
        std::memcmp(a[i].values.data(), b[i].values.data(),
                    a[i].values.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace lioncub
