#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnre/dataset.hpp"
#include "cnre/model.hpp"
#include "cnre/reasoning.hpp"

namespace cnre {

struct RankedItem {
  std::uint32_t item = 0;
  double score = 0.0;
  double logit = 0.0;
  PreferenceStrength path = PreferenceStrength::Default;
};

/// All items minus the user's training target items.
std::vector<std::uint32_t> default_candidates(const InteractionDataset& train, std::uint32_t user);

/// Scores every candidate and sorts descending; equal values keep ascending
/// item index. Sorting uses the logit, which orders exactly like the score.
std::vector<RankedItem> rank_items(const Model& model, std::uint32_t user,
                                   std::span<const std::uint32_t> candidates);
std::vector<RankedItem> rank_items(const Model& model, std::uint32_t user);

/// 1-based position `target` would take in a descending sort of `values`
/// (ties by ascending item id). `target` must be one of `items`.
std::size_t rank_of(std::span<const std::uint32_t> items, std::span<const double> values,
                    std::uint32_t target);

int hr_at_k(std::size_t rank, std::size_t k);
double ndcg_at_k(std::size_t rank, std::size_t k);

struct PathDistribution {
  std::array<std::size_t, 4> counts{};  // indexed by PreferenceStrength
  std::size_t total = 0;

  void add(PreferenceStrength p);
  double fraction(PreferenceStrength p) const;
};

struct GroupMetrics {
  std::size_t users = 0;
  std::vector<double> hr;    // aligned with MetricsReport::ks
  std::vector<double> ndcg;
  PathDistribution paths;
};

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> hr;
  std::vector<double> ndcg;
  std::size_t users = 0;
  PathDistribution paths;
  std::vector<GroupMetrics> groups;  // sparsest first

  double hr_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

/// Full-ranking leave-one-out evaluation over `test`: each pair's held-out
/// item is ranked against the default candidates. Path statistics count the
/// path each held-out pair takes. Sparsity groups come from the model's
/// training data.
MetricsReport evaluate(const Model& model, std::span<const TestPair> test,
                       std::vector<std::size_t> ks = {10, 50}, std::size_t sparsity_groups = 4);

/// Same protocol on the training target interactions themselves: each
/// positive is ranked against the user's non-target items. Unless the config
/// has train_label_visible, the positive is scored with its target flag
/// cleared, matching how training scored it.
MetricsReport evaluate_memorized(const Model& model, std::vector<std::size_t> ks = {1, 10});

/// One-line JSON record.
std::string to_json_line(const MetricsReport& report);
/// Tab-separated table: one row per (group, K), group "all" first.
std::string to_tsv(const MetricsReport& report);

}  // namespace cnre
