#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/matrix.hpp"

namespace cnre {

/// Construction/search knobs of the approximate (HNSW-style) index.
struct HnswParams {
  std::size_t max_degree = 16;  // links per node on upper layers; layer 0 keeps 2x
  std::size_t ef_construction = 200;
  std::size_t ef_search = 100;
  std::uint64_t seed = 42;
};

/// Result of a k-NN query.
struct Neighborhood {
  std::vector<std::uint32_t> ids;   // ascending distance, ties by id
  std::vector<double> distances;    // Euclidean
  Matrix pooled;                    // 1×d mean of the returned rows (zeros if none)
};

/// Nearest-neighbor index over the rows of a frozen embedding snapshot.
///
/// Exact mode is a linear scan. Approximate mode builds a hierarchical
/// navigable small-world graph: each row gets a geometric random level, is
/// linked to neighbors chosen by the diversity heuristic on every layer up to
/// its level, and queries descend greedily before a beam search on layer 0.
class NNIndex {
 public:
  NNIndex() = default;
  NNIndex(Matrix space, IndexMode mode, HnswParams params = {});

  /// Up to `n_c` nearest rows of the snapshot, excluding `exclude`.
  Neighborhood query(std::span<const double> vector, std::size_t n_c,
                     std::optional<std::uint32_t> exclude = std::nullopt) const;
  /// Neighbors of snapshot row `id`, never including `id` itself.
  Neighborhood query_item(std::uint32_t id, std::size_t n_c) const;

  const Matrix& space() const noexcept { return space_; }
  IndexMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return space_.rows(); }
  std::size_t dim() const noexcept { return space_.cols(); }

 private:
  using Candidate = std::pair<double, std::uint32_t>;  // (squared distance, id)

  void build_graph();
  void insert(std::uint32_t id);
  std::vector<Candidate> search_layer(std::span<const double> q, std::vector<Candidate> entry,
                                      std::size_t ef, std::size_t level) const;
  std::vector<std::uint32_t> select_neighbors(std::vector<Candidate> candidates,
                                              std::size_t m) const;
  double sq_dist(std::span<const double> q, std::uint32_t id) const;
  std::vector<Candidate> exact_candidates(std::span<const double> q) const;
  std::vector<Candidate> graph_candidates(std::span<const double> q, std::size_t ef) const;

  Matrix space_;
  IndexMode mode_ = IndexMode::Exact;
  HnswParams params_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // [node][level]
  std::uint32_t entry_ = 0;
  std::size_t max_level_ = 0;
};

/// Brute-force reference used by tests: sorts all rows by (distance, id).
std::vector<std::uint32_t> linear_scan(const Matrix& space, std::span<const double> query,
                                       std::size_t n_c,
                                       std::optional<std::uint32_t> exclude = std::nullopt);

}  // namespace cnre
