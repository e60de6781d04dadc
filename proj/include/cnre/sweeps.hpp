#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/dataset.hpp"
#include "cnre/evaluation.hpp"

namespace cnre {

struct SweepRow {
  std::vector<std::size_t> layer_counts;
  double drop_fraction = 0.0;
  MetricsReport metrics;
};

/// Trains and evaluates one model per layer-count combination, in grid order.
std::vector<SweepRow> layer_sweep(const SplitDataset& split, const TrainConfig& config,
                                  const std::vector<std::vector<std::size_t>>& grid,
                                  std::vector<std::size_t> ks = {10, 50});

/// For each fraction, removes that share of the history of `user_fraction` of
/// the users (see drop_history), retrains and evaluates on the untouched test
/// pairs. Fraction 0 trains on the split as given.
std::vector<SweepRow> robustness_sweep(const SplitDataset& split, const TrainConfig& config,
                                       std::span<const double> fractions,
                                       double user_fraction = 0.5, std::uint64_t seed = 7,
                                       std::vector<std::size_t> ks = {10, 50});

/// Columns: layer_counts, drop_fraction, k, hr, ndcg.
std::string sweep_tsv(const std::vector<SweepRow>& rows);

}  // namespace cnre
