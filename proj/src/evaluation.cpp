#include "cnre/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cnre/error.hpp"
#include "cnre/kernels.hpp"

namespace cnre {

std::vector<std::uint32_t> default_candidates(const InteractionDataset& train, std::uint32_t user) {
  const EdgeSet& target = train.target();
  std::vector<std::uint32_t> out;
  out.reserve(train.num_items());
  for (std::uint32_t i = 0; i < train.num_items(); ++i) {
    if (!target.contains(user, i)) out.push_back(i);
  }
  return out;
}

std::vector<RankedItem> rank_items(const Model& model, std::uint32_t user,
                                   std::span<const std::uint32_t> candidates) {
  std::vector<RankedItem> out;
  out.reserve(candidates.size());
  for (const auto i : candidates) {
    const ScoredPair s = model.score(user, i);
    out.push_back({i, s.score, s.logit, s.trace.plan.path});
  }
  std::sort(out.begin(), out.end(), [](const RankedItem& a, const RankedItem& b) {
    return a.logit != b.logit ? a.logit > b.logit : a.item < b.item;
  });
  return out;
}

std::vector<RankedItem> rank_items(const Model& model, std::uint32_t user) {
  const auto cand = default_candidates(model.train(), user);
  return rank_items(model, user, cand);
}

std::size_t rank_of(std::span<const std::uint32_t> items, std::span<const double> values,
                    std::uint32_t target) {
  require_shape(items.size() == values.size(), "rank_of: items and values differ in length");
  const auto it = std::find(items.begin(), items.end(), target);
  if (it == items.end()) throw InvalidArgument("rank_of: target is not a candidate");
  const double v = values[static_cast<std::size_t>(it - items.begin())];
  std::size_t rank = 1;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (values[k] > v || (values[k] == v && items[k] < target)) ++rank;
  }
  return rank;
}

int hr_at_k(std::size_t rank, std::size_t k) {
  if (rank == 0) throw InvalidArgument("hr_at_k: rank is 1-based");
  return rank <= k ? 1 : 0;
}

double ndcg_at_k(std::size_t rank, std::size_t k) {
  if (rank == 0) throw InvalidArgument("ndcg_at_k: rank is 1-based");
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

void PathDistribution::add(PreferenceStrength p) {
  ++counts[static_cast<std::size_t>(p)];
  ++total;
}

double PathDistribution::fraction(PreferenceStrength p) const {
  return total == 0 ? 0.0
                    : static_cast<double>(counts[static_cast<std::size_t>(p)]) /
                          static_cast<double>(total);
}

namespace {

std::size_t index_of(const std::vector<std::size_t>& ks, std::size_t k) {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw InvalidArgument("metrics report has no K = " + std::to_string(k));
  return static_cast<std::size_t>(it - ks.begin());
}

struct PairOutcome {
  std::size_t rank = 0;
  PreferenceStrength path = PreferenceStrength::Default;
};

// hide_target scores `item` with its own target flag cleared, as training saw it.
PairOutcome rank_pair(const Model& model, std::uint32_t user, std::uint32_t item, bool hide_target) {
  auto cand = default_candidates(model.train(), user);
  if (!std::binary_search(cand.begin(), cand.end(), item)) {
    cand.insert(std::upper_bound(cand.begin(), cand.end(), item), item);
  }
  std::vector<double> logits(cand.size());
  PairOutcome out;
  for (std::size_t k = 0; k < cand.size(); ++k) {
    ScoredPair s;
    if (hide_target && cand[k] == item) {
      ChainObservation obs = observe_chain(model.train(), user, item);
      obs.flags.back() = false;
      s = model.score(user, item, obs);
    } else {
      s = model.score(user, cand[k]);
    }
    logits[k] = s.logit;
    if (cand[k] == item) out.path = s.trace.plan.path;
  }
  out.rank = rank_of(cand, logits, item);
  return out;
}

std::vector<PairOutcome> rank_all(const Model& model, std::span<const TestPair> pairs,
                                  bool hide_target = false) {
  std::vector<PairOutcome> out(pairs.size());
  const int threads = num_threads();
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] =
        rank_pair(model, pairs[static_cast<std::size_t>(k)].user, pairs[static_cast<std::size_t>(k)].item,
                  hide_target);
  }
  return out;
}

void finish(GroupMetrics& g, const std::vector<std::size_t>& ks) {
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (g.users > 0) {
      g.hr[j] /= static_cast<double>(g.users);
      g.ndcg[j] /= static_cast<double>(g.users);
    }
  }
}

MetricsReport aggregate(std::span<const TestPair> pairs, const std::vector<PairOutcome>& outcomes,
                        std::vector<std::size_t> ks,
                        const std::vector<std::vector<std::uint32_t>>& groups, std::size_t num_users) {
  const GroupMetrics blank{0, std::vector<double>(ks.size(), 0.0),
                           std::vector<double>(ks.size(), 0.0), {}};
  GroupMetrics all = blank;
  std::vector<GroupMetrics> per_group(groups.size(), blank);
  std::vector<std::size_t> group_of(num_users, groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto u : groups[g]) group_of[u] = g;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& o = outcomes[k];
    const std::size_t g = group_of[pairs[k].user];
    for (GroupMetrics* m : {&all, g < groups.size() ? &per_group[g] : nullptr}) {
      if (m == nullptr) continue;
      ++m->users;
      m->paths.add(o.path);
      for (std::size_t j = 0; j < ks.size(); ++j) {
        m->hr[j] += hr_at_k(o.rank, ks[j]);
        m->ndcg[j] += ndcg_at_k(o.rank, ks[j]);
      }
    }
  }
  finish(all, ks);
  for (auto& g : per_group) finish(g, ks);

  MetricsReport r;
  r.ks = std::move(ks);
  r.hr = std::move(all.hr);
  r.ndcg = std::move(all.ndcg);
  r.users = all.users;
  r.paths = all.paths;
  r.groups = std::move(per_group);
  return r;
}

void check_ks(const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw InvalidArgument("evaluate: K list is empty");
  for (const auto k : ks) {
    if (k == 0) throw InvalidArgument("evaluate: K must be >= 1");
  }
}

}  // namespace

double MetricsReport::hr_at(std::size_t k) const { return hr[index_of(ks, k)]; }
double MetricsReport::ndcg_at(std::size_t k) const { return ndcg[index_of(ks, k)]; }

MetricsReport evaluate(const Model& model, std::span<const TestPair> test, std::vector<std::size_t> ks,
                       std::size_t sparsity_groups) {
  check_ks(ks);
  const InteractionDataset& train = model.train();
  for (const auto& p : test) {
    if (p.user >= train.num_users() || p.item >= train.num_items()) {
      throw ShapeError("evaluate: test pair (" + std::to_string(p.user) + ", " +
                       std::to_string(p.item) + ") outside the model's " +
                       std::to_string(train.num_users()) + " x " +
                       std::to_string(train.num_items()) + " id space");
    }
  }
  std::vector<std::vector<std::uint32_t>> groups;
  if (sparsity_groups > 0 && train.num_users() >= sparsity_groups) {
    groups = group_users_by_sparsity(train, sparsity_groups);
  }
  const auto outcomes = rank_all(model, test);
  return aggregate(test, outcomes, std::move(ks), groups, train.num_users());
}

MetricsReport evaluate_memorized(const Model& model, std::vector<std::size_t> ks) {
  check_ks(ks);
  const InteractionDataset& train = model.train();
  std::vector<TestPair> pairs;
  for (const auto& e : train.target().edges()) pairs.push_back({e.user, e.item});
  const auto outcomes = rank_all(model, pairs, !model.config().train_label_visible);
  return aggregate(pairs, outcomes, std::move(ks), {}, train.num_users());
}

namespace {

nlohmann::json paths_json(const PathDistribution& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto s : {PreferenceStrength::Strong, PreferenceStrength::Medium,
                       PreferenceStrength::Weak, PreferenceStrength::Default}) {
    j[to_string(s)] = p.fraction(s);
  }
  return j;
}

nlohmann::json metrics_json(const std::vector<std::size_t>& ks, const std::vector<double>& hr,
                            const std::vector<double>& ndcg) {
  nlohmann::json h = nlohmann::json::object();
  nlohmann::json n = nlohmann::json::object();
  for (std::size_t j = 0; j < ks.size(); ++j) {
    h[std::to_string(ks[j])] = hr[j];
    n[std::to_string(ks[j])] = ndcg[j];
  }
  return {{"hr", h}, {"ndcg", n}};
}

}  // namespace

std::string to_json_line(const MetricsReport& r) {
  nlohmann::json j = metrics_json(r.ks, r.hr, r.ndcg);
  j["users"] = r.users;
  j["paths"] = paths_json(r.paths);
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    nlohmann::json gj = metrics_json(r.ks, r.groups[g].hr, r.groups[g].ndcg);
    gj["group"] = g;
    gj["users"] = r.groups[g].users;
    gj["paths"] = paths_json(r.groups[g].paths);
    groups.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups);
  return j.dump();
}

std::string to_tsv(const MetricsReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "group\tusers\tk\thr\tndcg\n";
  for (std::size_t j = 0; j < r.ks.size(); ++j) {
    out << "all\t" << r.users << '\t' << r.ks[j] << '\t' << r.hr[j] << '\t' << r.ndcg[j] << '\n';
  }
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      out << g << '\t' << r.groups[g].users << '\t' << r.ks[j] << '\t' << r.groups[g].hr[j] << '\t'
          << r.groups[g].ndcg[j] << '\n';
    }
  }
  return out.str();
}

}  // namespace cnre
