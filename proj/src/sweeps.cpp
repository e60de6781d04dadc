#include "cnre/sweeps.hpp"

#include <sstream>

#include "cnre/error.hpp"
#include "cnre/training.hpp"

namespace cnre {

namespace {

MetricsReport train_and_evaluate(const SplitDataset& split, const TrainConfig& config,
                                 const std::vector<std::size_t>& ks) {
  const TrainResult result = train(split.train, config);
  const Model model = model_from_checkpoint(result.checkpoint, split.train);
  return evaluate(model, split.test, ks);
}

}  // namespace

std::vector<SweepRow> layer_sweep(const SplitDataset& split, const TrainConfig& config,
                                  const std::vector<std::vector<std::size_t>>& grid,
                                  std::vector<std::size_t> ks) {
  if (grid.empty()) throw InvalidArgument("layer_sweep: empty grid");
  std::vector<SweepRow> rows;
  for (const auto& layers : grid) {
    TrainConfig c = config;
    c.model.layer_counts = layers;
    rows.push_back({layers, 0.0, train_and_evaluate(split, c, ks)});
  }
  return rows;
}

std::vector<SweepRow> robustness_sweep(const SplitDataset& split, const TrainConfig& config,
                                       std::span<const double> fractions, double user_fraction,
                                       std::uint64_t seed, std::vector<std::size_t> ks) {
  if (fractions.empty()) throw InvalidArgument("robustness_sweep: no fractions");
  if (!(user_fraction >= 0.0 && user_fraction <= 1.0)) {
    throw InvalidArgument("robustness_sweep: user fraction must lie in [0, 1]");
  }
  for (const double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("robustness_sweep: fractions must lie in [0, 1]");
  }
  std::vector<SweepRow> rows;
  for (const double f : fractions) {
    const MetricsReport m = f == 0.0 ? train_and_evaluate(split, config, ks)
                                     : train_and_evaluate(drop_history(split, user_fraction, f, seed),
                                                          config, ks);
    rows.push_back({config.model.layer_counts, f, m});
  }
  return rows;
}

std::string sweep_tsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "layer_counts\tdrop_fraction\tk\thr\tndcg\n";
  for (const auto& row : rows) {
    std::string layers;
    for (std::size_t k = 0; k < row.layer_counts.size(); ++k) {
      layers += (k ? "," : "") + std::to_string(row.layer_counts[k]);
    }
    for (std::size_t j = 0; j < row.metrics.ks.size(); ++j) {
      out << layers << '\t' << row.drop_fraction << '\t' << row.metrics.ks[j] << '\t'
          << row.metrics.hr[j] << '\t' << row.metrics.ndcg[j] << '\n';
    }
  }
  return out.str();
}

}  // namespace cnre
