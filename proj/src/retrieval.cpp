#include "cnre/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include "cnre/error.hpp"
#include "cnre/kernels.hpp"

namespace cnre {

NNIndex::NNIndex(Matrix space, IndexMode mode, HnswParams params)
    : space_(std::move(space)), mode_(mode), params_(params) {
  require_finite(space_, "retrieval index snapshot");
  if (params_.max_degree < 2) throw InvalidArgument("HnswParams: max_degree must be >= 2");
  if (mode_ == IndexMode::Approximate) build_graph();
}

double NNIndex::sq_dist(std::span<const double> q, std::uint32_t id) const {
  const auto row = space_.row(id);
  double acc = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) {
    const double d = q[c] - row[c];
    acc += d * d;
  }
  return acc;
}

void NNIndex::build_graph() {
  const std::size_t n = space_.rows();
  links_.assign(n, {});
  if (n == 0) return;
  std::mt19937_64 rng(params_.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double ml = 1.0 / std::log(static_cast<double>(params_.max_degree));
  for (std::uint32_t id = 0; id < n; ++id) {
    const double u = std::max(unit(rng), 1e-300);
    const auto level = static_cast<std::size_t>(std::floor(-std::log(u) * ml));
    links_[id].assign(level + 1, {});
  }
  entry_ = 0;
  max_level_ = links_[0].size() - 1;
  for (std::uint32_t id = 1; id < n; ++id) insert(id);
}

void NNIndex::insert(std::uint32_t id) {
  const auto q = space_.row(id);
  const std::size_t level = links_[id].size() - 1;
  std::vector<Candidate> entry{{sq_dist(q, entry_), entry_}};
  for (std::size_t l = max_level_; l > level; --l) entry = search_layer(q, entry, 1, l);

  for (std::size_t l = std::min(level, max_level_) + 1; l-- > 0;) {
    auto found = search_layer(q, entry, params_.ef_construction, l);
    const std::size_t cap = l == 0 ? 2 * params_.max_degree : params_.max_degree;
    links_[id][l] = select_neighbors(found, params_.max_degree);
    for (const auto nb : links_[id][l]) {
      auto& back = links_[nb][l];
      back.push_back(id);
      if (back.size() > cap) {
        const auto nq = space_.row(nb);
        std::vector<Candidate> cand;
        cand.reserve(back.size());
        for (const auto x : back) cand.emplace_back(sq_dist(nq, x), x);
        back = select_neighbors(std::move(cand), cap);
      }
    }
    entry = std::move(found);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = id;
  }
}

std::vector<NNIndex::Candidate> NNIndex::search_layer(std::span<const double> q,
                                                      std::vector<Candidate> entry,
                                                      std::size_t ef, std::size_t level) const {
  std::vector<char> visited(space_.rows(), 0);
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
  std::priority_queue<Candidate> best;  // max-heap, worst on top
  for (const auto& c : entry) {
    if (visited[c.second]) continue;
    visited[c.second] = 1;
    frontier.push(c);
    best.push(c);
  }
  while (best.size() > ef) best.pop();
  while (!frontier.empty()) {
    const Candidate cur = frontier.top();
    frontier.pop();
    if (best.size() >= ef && cur > best.top()) break;
    for (const auto nb : links_[cur.second][level]) {
      if (visited[nb]) continue;
      visited[nb] = 1;
      const Candidate c{sq_dist(q, nb), nb};
      if (best.size() < ef || c < best.top()) {
        frontier.push(c);
        best.push(c);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> NNIndex::select_neighbors(std::vector<Candidate> candidates,
                                                     std::size_t m) const {
  std::sort(candidates.begin(), candidates.end());
  std::vector<std::uint32_t> picked;
  std::vector<std::uint32_t> pruned;
  // Diversity heuristic: keep a candidate only if it is closer to the query
  // than to every neighbor already kept; pruned ones backfill free slots.
  for (const auto& [d, id] : candidates) {
    if (picked.size() >= m) break;
    const auto row = space_.row(id);
    bool keep = true;
    for (const auto p : picked) {
      if (sq_dist(row, p) < d) {
        keep = false;
        break;
      }
    }
    (keep ? picked : pruned).push_back(id);
  }
  for (const auto id : pruned) {
    if (picked.size() >= m) break;
    picked.push_back(id);
  }
  return picked;
}

std::vector<NNIndex::Candidate> NNIndex::exact_candidates(std::span<const double> q) const {
  const auto d = kernels::squared_distances(space_, q);
  std::vector<Candidate> out(d.size());
  for (std::uint32_t k = 0; k < d.size(); ++k) out[k] = {d[k], k};
  return out;
}

std::vector<NNIndex::Candidate> NNIndex::graph_candidates(std::span<const double> q,
                                                          std::size_t ef) const {
  std::vector<Candidate> entry{{sq_dist(q, entry_), entry_}};
  for (std::size_t l = max_level_; l > 0; --l) entry = search_layer(q, entry, 1, l);
  return search_layer(q, entry, ef, 0);
}

Neighborhood NNIndex::query(std::span<const double> vector, std::size_t n_c,
                            std::optional<std::uint32_t> exclude) const {
  require_shape(vector.size() == space_.cols(), "NNIndex::query: vector width != index width");
  if (n_c == 0) throw InvalidArgument("NNIndex::query: neighbor count must be >= 1");
  Neighborhood out;
  out.pooled = Matrix(1, space_.cols());
  if (space_.rows() == 0) return out;

  std::vector<Candidate> cand = mode_ == IndexMode::Exact
                                    ? exact_candidates(vector)
                                    : graph_candidates(vector, std::max(params_.ef_search, n_c + 1));
  std::sort(cand.begin(), cand.end());
  for (const auto& [d, id] : cand) {
    if (out.ids.size() >= n_c) break;
    if (exclude && *exclude == id) continue;
    out.ids.push_back(id);
    out.distances.push_back(std::sqrt(d));
  }
  if (!out.ids.empty()) {
    auto pooled = out.pooled.row(0);
    for (const auto id : out.ids) {
      const auto row = space_.row(id);
      for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(out.ids.size());
    for (auto& v : pooled) v *= inv;
  }
  return out;
}

Neighborhood NNIndex::query_item(std::uint32_t id, std::size_t n_c) const {
  if (id >= space_.rows()) throw InvalidArgument("NNIndex::query_item: id out of range");
  return query(space_.row(id), n_c, id);
}

std::vector<std::uint32_t> linear_scan(const Matrix& space, std::span<const double> query,
                                       std::size_t n_c, std::optional<std::uint32_t> exclude) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::uint32_t r = 0; r < space.rows(); ++r) {
    if (exclude && *exclude == r) continue;
    double acc = 0.0;
    for (std::size_t c = 0; c < space.cols(); ++c) {
      const double d = space(r, c) - query[c];
      acc += d * d;
    }
    all.emplace_back(acc, r);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> ids;
  for (std::size_t k = 0; k < std::min(n_c, all.size()); ++k) ids.push_back(all[k].second);
  return ids;
}

}  // namespace cnre
