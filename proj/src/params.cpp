#include "cnre/params.hpp"

#include <cmath>

#include "cnre/error.hpp"

namespace cnre {

ParameterSlot& ParameterStore::add(std::string name, Matrix value) {
  if (by_name_.contains(name)) {
    throw InvalidArgument("duplicate parameter slot '" + name + "'");
  }
  ParameterSlot s;
  s.grad = Matrix(value.rows(), value.cols());
  s.m = Matrix(value.rows(), value.cols());
  s.v = Matrix(value.rows(), value.cols());
  s.value = std::move(value);
  s.name = name;
  by_name_.emplace(std::move(name), slots_.size());
  slots_.push_back(std::move(s));
  return slots_.back();
}

bool ParameterStore::contains(std::string_view name) const {
  return by_name_.contains(std::string(name));
}

ParameterSlot& ParameterStore::slot(std::string_view name) {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw InvalidArgument("unknown parameter slot '" + std::string(name) + "'");
  return slots_[it->second];
}

const ParameterSlot& ParameterStore::slot(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->slot(name);
}

void ParameterStore::zero_grad() {
  for (auto& s : slots_) s.grad.fill(0.0);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  const std::uint64_t t = store.step() + 1;
  store.set_step(t);
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& s : store.slots()) {
    auto value = s.value.values();
    auto grad = s.grad.values();
    auto m = s.m.values();
    auto v = s.v.values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      value[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      grad[k] = 0.0;
    }
  }
}

Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix m(rows, cols);
  for (auto& x : m.values()) x = dist(rng);
  return m;
}

}  // namespace cnre
