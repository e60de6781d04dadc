#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnre/matrix.hpp"

namespace cnre {

/// A trainable tensor with its gradient accumulator and Adam moments.
struct ParameterSlot {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
};

/// Ordered, name-addressable collection of trainable tensors.
class ParameterStore {
 public:
  /// Adds a slot; throws InvalidArgument if `name` already exists.
  ParameterSlot& add(std::string name, Matrix value);

  bool contains(std::string_view name) const;
  ParameterSlot& slot(std::string_view name);
  const ParameterSlot& slot(std::string_view name) const;

  std::vector<ParameterSlot>& slots() noexcept { return slots_; }
  const std::vector<ParameterSlot>& slots() const noexcept { return slots_; }

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::vector<ParameterSlot> slots_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every slot, then zeroes gradients.
void adam_step(ParameterStore& store, const AdamConfig& cfg);

/// Xavier/Glorot uniform initialization: U(-a, a) with a = sqrt(6 / (rows + cols)).
Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace cnre
