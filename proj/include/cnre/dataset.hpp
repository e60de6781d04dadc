#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cnre {

/// Ordered behavior chain, e.g. {"view", "cart", "buy"}. The last entry is the
/// target behavior.
struct BehaviorSpec {
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }
  std::size_t target_index() const noexcept { return names.size() - 1; }
  const std::string& target() const { return names.back(); }
  std::optional<std::size_t> find(std::string_view name) const;

  /// Throws InvalidArgument unless there are >= 2 unique labels.
  void validate() const;

  friend bool operator==(const BehaviorSpec&, const BehaviorSpec&) = default;
};

/// Bijection between raw string IDs and dense indices in first-seen order.
class IdMap {
 public:
  std::uint32_t encode(const std::string& raw);
  std::optional<std::uint32_t> find(const std::string& raw) const;
  const std::string& decode(std::uint32_t index) const { return raw_.at(index); }
  std::size_t size() const noexcept { return raw_.size(); }
  const std::vector<std::string>& raw_ids() const noexcept { return raw_; }

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct RawInteraction {
  std::string user;
  std::string item;
  friend bool operator==(const RawInteraction&, const RawInteraction&) = default;
};

struct Edge {
  std::uint32_t user;
  std::uint32_t item;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable set of (user, item) pairs for one behavior, sorted by (user, item).
class EdgeSet {
 public:
  EdgeSet() = default;
  /// Deduplicates `edges`. Throws InvalidArgument on out-of-range indices.
  EdgeSet(std::size_t num_users, std::size_t num_items, std::vector<Edge> edges);

  std::size_t size() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }
  std::size_t num_users() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_items() const noexcept { return num_items_; }

  std::span<const Edge> edges() const noexcept { return edges_; }
  /// Sorted items of `user`.
  std::span<const std::uint32_t> items_of(std::uint32_t user) const;
  bool contains(std::uint32_t user, std::uint32_t item) const;
  std::size_t degree(std::uint32_t user) const { return items_of(user).size(); }

 private:
  std::size_t num_items_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> items_;
  std::vector<std::size_t> offsets_;
};

/// Per-behavior interaction graphs over a shared dense user/item index space.
struct InteractionDataset {
  BehaviorSpec behaviors;
  IdMap users;
  IdMap items;
  std::vector<EdgeSet> edges;  // one per behavior, in `behaviors` order

  std::size_t num_users() const noexcept { return users.size(); }
  std::size_t num_items() const noexcept { return items.size(); }
  std::size_t num_behaviors() const noexcept { return behaviors.size(); }
  const EdgeSet& target() const { return edges.back(); }
  std::size_t total_edges() const;
  /// Number of interactions of `user` summed over behaviors.
  std::size_t user_interactions(std::uint32_t user) const;

  /// Same data with behaviors permuted: new behavior k is old behavior order[k].
  InteractionDataset reordered(std::span<const std::size_t> order) const;
  /// Copy with edge sets replaced (same ids and behaviors).
  InteractionDataset with_edges(std::vector<EdgeSet> new_edges) const;
};

/// Reads "<user>\t<item>" lines. Duplicates collapse; first-seen order is kept.
/// Throws ParseError naming the line on a malformed line; warns on empty input.
std::vector<RawInteraction> load_interactions(const std::filesystem::path& path,
                                              std::string_view behavior);
std::vector<RawInteraction> parse_interactions(std::istream& in, std::string_view source);

/// Writes "<user>\t<item>" lines for every edge of `behavior`.
void write_interactions(const std::filesystem::path& path, const InteractionDataset& data,
                        std::size_t behavior);

/// Dense indices are assigned in first-seen order walking behaviors in listed order.
/// Throws InvalidArgument if the target behavior has no interactions.
InteractionDataset build_dataset(const std::vector<std::vector<RawInteraction>>& per_behavior,
                                 BehaviorSpec spec);
InteractionDataset load_dataset(const std::vector<std::filesystem::path>& files,
                                BehaviorSpec spec);

/// Suggested cascade order: auxiliary behaviors by ascending conversion rate
/// |E_b ∩ E_target| / |E_b| (ties keep listed order; empty behaviors go first
/// with a warning), target last. Returns indices into `data.behaviors`.
std::vector<std::size_t> compute_conversion_order(const InteractionDataset& data);
double conversion_rate(const InteractionDataset& data, std::size_t behavior);

struct TestPair {
  std::uint32_t user;
  std::uint32_t item;
  friend bool operator==(const TestPair&, const TestPair&) = default;
};

struct SplitDataset {
  InteractionDataset train;
  std::vector<TestPair> test;  // sorted by user
};

/// Holds out one random target interaction for every user with >= 2 of them.
SplitDataset leave_one_out_split(const InteractionDataset& data, std::uint64_t seed);

struct BprTriple {
  std::uint32_t user;
  std::uint32_t pos_item;
  std::uint32_t neg_item;
  std::uint32_t behavior;
};

/// Uniform positives from `behavior`'s edges, each paired with a uniform
/// negative the user has not interacted with under that behavior. Users that
/// interacted with every item are skipped with a warning.
std::vector<BprTriple> sample_bpr_triples(const InteractionDataset& train, std::size_t behavior,
                                          std::size_t count, std::mt19937_64& rng);

/// Users ordered by total interaction count (stable) and cut into `n_groups`
/// equal-population buckets, sparsest first.
std::vector<std::vector<std::uint32_t>> group_users_by_sparsity(const InteractionDataset& data,
                                                                std::size_t n_groups = 4);

/// For a seeded round(user_fraction * M) users, removes round(drop_fraction * n_u)
/// of their n_u training interactions uniformly across behaviors. Test pairs are
/// left untouched.
SplitDataset drop_history(const SplitDataset& split, double user_fraction, double drop_fraction,
                          std::uint64_t seed);

/// Synthetic data with a planted view → cart → buy funnel over user/item clusters.
struct PlantedConfig {
  std::size_t users = 50;
  std::size_t items = 30;
  std::size_t clusters = 5;
  std::size_t views_per_user = 8;
  double in_cluster = 0.85;   // probability a view falls in the user's cluster
  double cart_given_view = 0.5;
  double buy_given_cart = 0.6;
  double buy_given_view_only = 0.05;  // skip chains view → buy
  std::size_t min_buys = 2;
  std::uint64_t seed = 1;
};

InteractionDataset make_planted_dataset(const PlantedConfig& cfg);

}  // namespace cnre
