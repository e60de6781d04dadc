#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cnre/dataset.hpp"
#include "cnre/matrix.hpp"

namespace cnre::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

/// Random multi-behavior dataset where every user has at least two target
/// interactions. Raw ids are "u<k>" / "i<k>".
inline InteractionDataset random_dataset(std::size_t users, std::size_t items,
                                         std::vector<std::string> behaviors, double density,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<std::size_t> pick(0, items - 1);
  std::vector<std::vector<RawInteraction>> per(behaviors.size());
  // Touch every user and item once so the id maps are dense in order.
  for (std::size_t u = 0; u < users; ++u) {
    per[0].push_back({"u" + std::to_string(u), "i" + std::to_string(u % items)});
  }
  for (std::size_t i = 0; i < items; ++i) {
    per[0].push_back({"u" + std::to_string(i % users), "i" + std::to_string(i)});
  }
  for (std::size_t b = 0; b < behaviors.size(); ++b) {
    for (std::size_t u = 0; u < users; ++u) {
      for (std::size_t i = 0; i < items; ++i) {
        if (keep(rng)) per[b].push_back({"u" + std::to_string(u), "i" + std::to_string(i)});
      }
    }
  }
  auto& target = per.back();
  for (std::size_t u = 0; u < users; ++u) {
    target.push_back({"u" + std::to_string(u), "i" + std::to_string(pick(rng))});
    target.push_back({"u" + std::to_string(u), "i" + std::to_string(pick(rng))});
  }
  return build_dataset(per, BehaviorSpec{std::move(behaviors)});
}

}  // namespace cnre::testing
