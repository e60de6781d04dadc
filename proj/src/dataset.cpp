#include "cnre/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "cnre/error.hpp"
#include "cnre/log.hpp"

namespace cnre {

std::optional<std::size_t> BehaviorSpec::find(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return k;
  }
  return std::nullopt;
}

void BehaviorSpec::validate() const {
  if (names.size() < 2) throw InvalidArgument("behavior chain needs at least 2 behaviors");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw InvalidArgument("empty behavior label");
    if (!seen.insert(n).second) throw InvalidArgument("duplicate behavior label '" + n + "'");
  }
}

std::uint32_t IdMap::encode(const std::string& raw) {
  const auto [it, inserted] = index_.try_emplace(raw, static_cast<std::uint32_t>(raw_.size()));
  if (inserted) raw_.push_back(raw);
  return it->second;
}

std::optional<std::uint32_t> IdMap::find(const std::string& raw) const {
  const auto it = index_.find(raw);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EdgeSet::EdgeSet(std::size_t num_users, std::size_t num_items, std::vector<Edge> edges)
    : num_items_(num_items), edges_(std::move(edges)) {
  for (const auto& e : edges_) {
    if (e.user >= num_users || e.item >= num_items) {
      throw InvalidArgument("EdgeSet: edge index out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  offsets_.assign(num_users + 1, 0);
  items_.reserve(edges_.size());
  for (const auto& e : edges_) {
    ++offsets_[e.user + 1];
    items_.push_back(e.item);
  }
  for (std::size_t u = 0; u < num_users; ++u) offsets_[u + 1] += offsets_[u];
}

std::span<const std::uint32_t> EdgeSet::items_of(std::uint32_t user) const {
  if (user + 1 >= offsets_.size()) return {};
  return {items_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
}

bool EdgeSet::contains(std::uint32_t user, std::uint32_t item) const {
  const auto items = items_of(user);
  return std::binary_search(items.begin(), items.end(), item);
}

std::size_t InteractionDataset::total_edges() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

std::size_t InteractionDataset::user_interactions(std::uint32_t user) const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.degree(user);
  return n;
}

InteractionDataset InteractionDataset::reordered(std::span<const std::size_t> order) const {
  if (order.size() != behaviors.size()) throw InvalidArgument("reordered: wrong order length");
  std::vector<bool> used(order.size(), false);
  InteractionDataset out;
  out.users = users;
  out.items = items;
  for (const auto k : order) {
    if (k >= order.size() || used[k]) throw InvalidArgument("reordered: not a permutation");
    used[k] = true;
    out.behaviors.names.push_back(behaviors.names[k]);
    out.edges.push_back(edges[k]);
  }
  return out;
}

InteractionDataset InteractionDataset::with_edges(std::vector<EdgeSet> new_edges) const {
  if (new_edges.size() != edges.size()) throw InvalidArgument("with_edges: wrong behavior count");
  InteractionDataset out;
  out.behaviors = behaviors;
  out.users = users;
  out.items = items;
  out.edges = std::move(new_edges);
  return out;
}

std::vector<RawInteraction> parse_interactions(std::istream& in, std::string_view source) {
  std::vector<RawInteraction> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(std::string(source) + ": malformed interaction at line " +
                       std::to_string(line_no) + " (expected \"<user>\\t<item>\")");
    }
    // Tab is not a legal character inside an ID, so the pair key is unambiguous.
    if (seen.insert(line).second) out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (out.empty()) warn(std::string(source) + ": no interactions");
  return out;
}

std::vector<RawInteraction> load_interactions(const std::filesystem::path& path,
                                              std::string_view behavior) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open interaction file " + path.string());
  return parse_interactions(in, std::string(behavior) + " (" + path.string() + ")");
}

void write_interactions(const std::filesystem::path& path, const InteractionDataset& data,
                        std::size_t behavior) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  for (const auto& e : data.edges.at(behavior).edges()) {
    out << data.users.decode(e.user) << '\t' << data.items.decode(e.item) << '\n';
  }
}

InteractionDataset build_dataset(const std::vector<std::vector<RawInteraction>>& per_behavior,
                                 BehaviorSpec spec) {
  spec.validate();
  if (per_behavior.size() != spec.size()) {
    throw InvalidArgument("build_dataset: one interaction list per behavior required");
  }
  if (per_behavior.back().empty()) {
    throw InvalidArgument("build_dataset: target behavior '" + spec.target() + "' is empty");
  }
  InteractionDataset data;
  data.behaviors = std::move(spec);
  std::vector<std::vector<Edge>> raw_edges(per_behavior.size());
  for (std::size_t b = 0; b < per_behavior.size(); ++b) {
    for (const auto& r : per_behavior[b]) {
      const auto u = data.users.encode(r.user);
      const auto i = data.items.encode(r.item);
      raw_edges[b].push_back({u, i});
    }
  }
  for (auto& e : raw_edges) {
    data.edges.emplace_back(data.users.size(), data.items.size(), std::move(e));
  }
  return data;
}

InteractionDataset load_dataset(const std::vector<std::filesystem::path>& files,
                                BehaviorSpec spec) {
  if (files.size() != spec.size()) throw InvalidArgument("load_dataset: one file per behavior");
  std::vector<std::vector<RawInteraction>> raw;
  for (std::size_t b = 0; b < files.size(); ++b) {
    raw.push_back(load_interactions(files[b], spec.names[b]));
  }
  return build_dataset(raw, std::move(spec));
}

double conversion_rate(const InteractionDataset& data, std::size_t behavior) {
  const EdgeSet& e = data.edges.at(behavior);
  if (e.empty()) return 0.0;
  const EdgeSet& target = data.target();
  std::size_t hit = 0;
  for (const auto& edge : e.edges()) hit += target.contains(edge.user, edge.item) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(e.size());
}

std::vector<std::size_t> compute_conversion_order(const InteractionDataset& data) {
  const std::size_t t = data.behaviors.target_index();
  std::vector<std::size_t> empty;
  std::vector<std::size_t> aux;
  for (std::size_t b = 0; b < t; ++b) {
    if (data.edges[b].empty()) {
      warn("behavior '" + data.behaviors.names[b] + "' has no interactions; placed first");
      empty.push_back(b);
    } else {
      aux.push_back(b);
    }
  }
  std::vector<double> rate(t, 0.0);
  for (const auto b : aux) rate[b] = conversion_rate(data, b);
  std::stable_sort(aux.begin(), aux.end(),
                   [&](std::size_t a, std::size_t b) { return rate[a] < rate[b]; });
  std::vector<std::size_t> order = empty;
  order.insert(order.end(), aux.begin(), aux.end());
  order.push_back(t);
  return order;
}

SplitDataset leave_one_out_split(const InteractionDataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const EdgeSet& target = data.target();
  std::vector<Edge> kept;
  SplitDataset split;
  kept.reserve(target.size());
  for (std::uint32_t u = 0; u < data.num_users(); ++u) {
    const auto items = target.items_of(u);
    std::optional<std::size_t> held;
    if (items.size() >= 2) {
      std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
      held = pick(rng);
      split.test.push_back({u, items[*held]});
    }
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (held && *held == k) continue;
      kept.push_back({u, items[k]});
    }
  }
  std::vector<EdgeSet> edges = data.edges;
  edges.back() = EdgeSet(data.num_users(), data.num_items(), std::move(kept));
  split.train = data.with_edges(std::move(edges));
  return split;
}

std::vector<BprTriple> sample_bpr_triples(const InteractionDataset& train, std::size_t behavior,
                                          std::size_t count, std::mt19937_64& rng) {
  std::vector<BprTriple> out;
  if (count == 0) return out;
  const EdgeSet& e = train.edges.at(behavior);
  const std::size_t n_items = train.num_items();
  if (e.empty()) throw InvalidArgument("sample_bpr_triples: behavior has no edges");
  if (n_items < 2) throw InvalidArgument("sample_bpr_triples: need at least 2 items");

  std::uniform_int_distribution<std::size_t> pick_edge(0, e.size() - 1);
  std::uniform_int_distribution<std::uint32_t> pick_item(0, static_cast<std::uint32_t>(n_items - 1));
  std::size_t skipped = 0;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const Edge pos = e.edges()[pick_edge(rng)];
    if (e.degree(pos.user) >= n_items) {
      ++skipped;
      continue;
    }
    std::uint32_t neg = pick_item(rng);
    while (e.contains(pos.user, neg)) neg = pick_item(rng);
    out.push_back({pos.user, pos.item, neg, static_cast<std::uint32_t>(behavior)});
  }
  if (skipped > 0) {
    warn("sample_bpr_triples: skipped " + std::to_string(skipped) +
         " samples of users that interacted with every item under '" +
         train.behaviors.names[behavior] + "'");
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> group_users_by_sparsity(const InteractionDataset& data,
                                                                std::size_t n_groups) {
  const std::size_t m = data.num_users();
  if (n_groups == 0 || m < n_groups) {
    throw InvalidArgument("group_users_by_sparsity: need at least n_groups users");
  }
  std::vector<std::uint32_t> users(m);
  std::iota(users.begin(), users.end(), 0);
  std::vector<std::size_t> counts(m);
  for (std::uint32_t u = 0; u < m; ++u) counts[u] = data.user_interactions(u);
  std::stable_sort(users.begin(), users.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return counts[a] < counts[b]; });
  std::vector<std::vector<std::uint32_t>> groups(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::size_t begin = g * m / n_groups;
    const std::size_t end = (g + 1) * m / n_groups;
    groups[g].assign(users.begin() + static_cast<std::ptrdiff_t>(begin),
                     users.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return groups;
}

SplitDataset drop_history(const SplitDataset& split, double user_fraction, double drop_fraction,
                          std::uint64_t seed) {
  if (!(user_fraction >= 0.0 && user_fraction <= 1.0) ||
      !(drop_fraction >= 0.0 && drop_fraction <= 1.0)) {
    throw InvalidArgument("drop_history: fractions must lie in [0, 1]");
  }
  const InteractionDataset& train = split.train;
  const std::size_t m = train.num_users();
  std::mt19937_64 rng(seed);

  std::vector<std::uint32_t> users(m);
  std::iota(users.begin(), users.end(), 0);
  std::shuffle(users.begin(), users.end(), rng);
  users.resize(static_cast<std::size_t>(std::lround(user_fraction * static_cast<double>(m))));
  std::sort(users.begin(), users.end());

  // (behavior, user, item) triples scheduled for removal.
  std::set<std::tuple<std::size_t, std::uint32_t, std::uint32_t>> removed;
  for (const auto u : users) {
    std::vector<std::pair<std::size_t, std::uint32_t>> history;
    for (std::size_t b = 0; b < train.num_behaviors(); ++b) {
      for (const auto i : train.edges[b].items_of(u)) history.emplace_back(b, i);
    }
    const auto k = static_cast<std::size_t>(
        std::lround(drop_fraction * static_cast<double>(history.size())));
    std::shuffle(history.begin(), history.end(), rng);
    for (std::size_t j = 0; j < k; ++j) removed.emplace(history[j].first, u, history[j].second);
    if (k > 0 && k == history.size()) {
      warn("drop_history: user '" + train.users.decode(u) + "' lost all training interactions");
    }
  }

  std::vector<EdgeSet> edges;
  for (std::size_t b = 0; b < train.num_behaviors(); ++b) {
    std::vector<Edge> kept;
    for (const auto& e : train.edges[b].edges()) {
      if (!removed.contains({b, e.user, e.item})) kept.push_back(e);
    }
    edges.emplace_back(train.num_users(), train.num_items(), std::move(kept));
  }
  return {train.with_edges(std::move(edges)), split.test};
}

InteractionDataset make_planted_dataset(const PlantedConfig& cfg) {
  if (cfg.users == 0 || cfg.items < 2 || cfg.clusters == 0) {
    throw InvalidArgument("make_planted_dataset: empty configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution coin_cluster(cfg.in_cluster);
  std::bernoulli_distribution coin_cart(cfg.cart_given_view);
  std::bernoulli_distribution coin_buy(cfg.buy_given_cart);
  std::bernoulli_distribution coin_skip(cfg.buy_given_view_only);
  std::uniform_int_distribution<std::size_t> any_item(0, cfg.items - 1);

  std::vector<std::vector<std::size_t>> cluster_items(cfg.clusters);
  for (std::size_t i = 0; i < cfg.items; ++i) cluster_items[i % cfg.clusters].push_back(i);

  std::vector<std::vector<RawInteraction>> raw(3);
  std::vector<bool> item_seen(cfg.items, false);
  const auto user_id = [](std::size_t u) { return "u" + std::to_string(u); };
  const auto item_id = [](std::size_t i) { return "i" + std::to_string(i); };

  for (std::size_t u = 0; u < cfg.users; ++u) {
    const auto& own = cluster_items[u % cfg.clusters];
    std::uniform_int_distribution<std::size_t> own_item(0, own.size() - 1);
    std::set<std::size_t> viewed;
    const std::size_t target_views = std::min(cfg.views_per_user, cfg.items);
    while (viewed.size() < target_views) {
      viewed.insert(coin_cluster(rng) && !own.empty() ? own[own_item(rng)] : any_item(rng));
    }
    std::vector<std::size_t> carted, bought;
    for (const auto i : viewed) {
      if (coin_cart(rng)) {
        carted.push_back(i);
        if (coin_buy(rng)) bought.push_back(i);
      } else if (coin_skip(rng)) {
        bought.push_back(i);
      }
    }
    // Top up purchases from the cart (then from views) so the user can be split.
    for (const auto i : viewed) {
      if (bought.size() >= cfg.min_buys) break;
      if (std::find(bought.begin(), bought.end(), i) != bought.end()) continue;
      if (std::find(carted.begin(), carted.end(), i) == carted.end()) carted.push_back(i);
      bought.push_back(i);
    }
    for (const auto i : viewed) {
      raw[0].push_back({user_id(u), item_id(i)});
      item_seen[i] = true;
    }
    for (const auto i : carted) raw[1].push_back({user_id(u), item_id(i)});
    for (const auto i : bought) raw[2].push_back({user_id(u), item_id(i)});
  }
  // Every item must exist in the index space: give unseen items a view from a
  // user of the matching cluster.
  for (std::size_t i = 0; i < cfg.items; ++i) {
    if (item_seen[i]) continue;
    const std::size_t u = (i % cfg.clusters) % cfg.users;
    raw[0].push_back({user_id(u), item_id(i)});
  }
  return build_dataset(raw, BehaviorSpec{{"view", "cart", "buy"}});
}

}  // namespace cnre
