// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "cnre/checkpoint.hpp"
#include "cnre/evaluation.hpp"
#include "cnre/explain.hpp"
#include "cnre/gradcheck.hpp"
#include "cnre/retrieval.hpp"
#include "cnre/training.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cnre;
using namespace cnre::testing;
using PS = PreferenceStrength;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Independent statement of the dispatch rule.
PS rule(std::uint64_t bits, std::size_t n) {
  if ((bits >> (n - 1)) & 1U) return PS::Strong;
  std::size_t aux = 0;
  for (std::size_t k = 0; k + 1 < n; ++k) aux += (bits >> k) & 1U;
  return aux >= 2 ? PS::Medium : aux == 1 ? PS::Weak : PS::Default;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> pair_with(const InteractionDataset& d,
                                                                 std::uint64_t bits) {
  for (std::uint32_t u = 0; u < d.num_users(); ++u)
    for (std::uint32_t i = 0; i < d.num_items(); ++i)
      if (observe_chain(d, u, i).bits() == bits) return std::make_pair(u, i);
  return std::nullopt;
}

InteractionDataset toy() { return random_dataset(20, 15, {"view", "cart", "buy"}, 0.25, 17); }

ModelConfig toy_config() {
  ModelConfig c;
  c.dim = 8;
  c.hyperedges = 4;
  c.neighbors = 3;
  return c;
}

// 1 ─ gradient check of the full objective
Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = toy();
  const ModelConfig cfg = toy_config();
  auto store = init_parameters(cfg, 20, 15, 3, 5);
  const auto graphs = GraphSet::from_dataset(d);
  const auto cascade = compute_cascade(graphs, store, cfg);
  const auto idx = build_retrieval_indices(cascade, IndexMode::Exact);

  std::mt19937_64 rng(3);
  std::vector<BprTriple> triples;
  for (std::size_t b = 0; b < 3; ++b) {
    const auto t = sample_bpr_triples(d, b, 8, rng);
    triples.insert(triples.end(), t.begin(), t.end());
  }
  auto planned = plan_triples(d, triples, cascade, idx, cfg);
  // Force every mediator path into the objective, including both medium branches.
  std::set<std::string> paths;
  for (std::uint64_t bits : {7u, 3u, 3u, 1u, 2u, 0u}) {
    ModelConfig c = cfg;
    c.tau = planned.size() % 2 == 0 ? 1.01 : 0.0;
    const std::uint32_t u = planned.size() % 20, i = (planned.size() * 7) % 15, j = (i + 4) % 15;
    const auto obs = ChainObservation::from_bits(bits, 3);
    PlannedTriple t{{u, i, plan_reasoning(obs, u, i, cascade, idx, c)},
                    {u, j, plan_reasoning(ChainObservation::from_bits(0, 3), u, j, cascade, idx, c)}};
    planned.push_back(t);
  }
  for (const auto& t : planned) paths.insert(path_label(t.pos.plan));

  const LossBuilder loss = [&](Tape& tape, ParameterStore& s) {
    return record_loss(tape, s, graphs, planned, cfg, 1e-3).total;
  };
  GradCheckOptions opt;
  opt.h = 1e-5;
  opt.tolerance = 1e-4;
  opt.min_coordinates = store.parameter_count();
  const auto r = finite_difference_check(loss, store, opt);
  const double secs = seconds_since(t0);
  bool every = r.per_slot.size() == store.slots().size();
  for (const auto& [name, e] : r.per_slot) every = every && e < 1e-4;
  const bool covered = paths.size() == 5;  // every label with both logic operators on
  return {every && covered && secs < 60.0,
          fmt("max rel err %.2e in %s over %zu coords (%zu below FD resolution), %zu slots, %zu paths, %.1f s",
              r.max_rel_error, r.worst_slot.c_str(), r.coordinates, r.below_resolution, r.per_slot.size(),
              paths.size(), secs)};
}

// 2 ─ dispatch truth table and counterfactual behaviour
Outcome dispatch_rules() {
  std::size_t rows = 0, bad = 0;
  for (std::size_t n : {3u, 4u}) {
    for (std::uint64_t bits = 0; bits < (1U << n); ++bits) {
      ++rows;
      if (dispatch(ChainObservation::from_bits(bits, n)) != rule(bits, n)) ++bad;
    }
  }

  const auto d = toy();
  const ModelConfig cfg = toy_config();
  const Model m(d, init_parameters(cfg, 20, 15, 3, 5), cfg);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t edits = 0, non_monotone = 0;
  for (std::uint64_t bits = 0; bits < 8; ++bits) {
    const auto base = ChainObservation::from_bits(bits, 3);
    for (std::size_t b = 0; b < 3; ++b) {
      const CounterfactualEdit e{base.flags[b] ? CounterfactualEdit::Kind::Drop : CounterfactualEdit::Kind::Add,
                                 d.behaviors.names[b]};
      const auto edited = apply_edit(base, d.behaviors, e);
      const PS from = m.score(2, 3, base).trace.plan.path;
      const PS to = m.score(2, 3, edited).trace.plan.path;
      ++edits;
      if (e.kind == CounterfactualEdit::Kind::Add ? to < from : to > from) ++non_monotone;
    }
  }
  const double secs = seconds_since(t0);

  bool examples = false;
  const auto vc = pair_with(d, 3), c = pair_with(d, 2);
  if (vc && c) {
    const auto drop = counterfactual(m, d.users.decode(vc->first), d.items.decode(vc->second),
                                     {CounterfactualEdit::Kind::Drop, "cart"});
    const auto add = counterfactual(m, d.users.decode(c->first), d.items.decode(c->second),
                                    {CounterfactualEdit::Kind::Add, "view"});
    examples = drop.base.path.starts_with("Medium") && drop.edited.path.starts_with("Weak") &&
               add.base.path.starts_with("Weak") && add.edited.path.starts_with("Medium");
  }
  return {bad == 0 && non_monotone == 0 && secs < 1.0 && examples,
          fmt("%zu/%zu truth-table rows, %zu/%zu edits monotone in %.3f s, examples %s", rows - bad, rows,
              edits - non_monotone, edits, secs, examples ? "ok" : "wrong")};
}

// 3 ─ ranking metrics against brute force
Outcome metrics_brute_force() {
  std::mt19937_64 rng(11);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<std::uint32_t> items(n);
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) {
      items[k] = static_cast<std::uint32_t>(k);
      values[k] = static_cast<double>(rng() % 9) / 4.0;
    }
    std::shuffle(items.begin(), items.end(), rng);
    const std::uint32_t target = items[rng() % n];
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] != values[b] ? values[a] > values[b] : items[a] < items[b];
    });
    std::size_t brute = 0;
    while (items[order[brute]] != target) ++brute;
    const std::size_t rank = rank_of(items, values, target);
    for (std::size_t k : {1u, 5u, 10u, 20u}) {
      const int hr = brute < k ? 1 : 0;
      const double nd = brute < k ? std::log(2.0) / std::log(static_cast<double>(brute) + 2.0) : 0.0;
      if (hr_at_k(rank, k) != hr || std::abs(ndcg_at_k(rank, k) - nd) > 1e-15) ++mismatches;
    }
  }
  const double at2 = ndcg_at_k(2, 10);
  const bool exact = std::abs(at2 - 1.0 / std::log2(3.0)) < 1e-15;
  return {mismatches == 0 && exact,
          fmt("1000 instances x 4 cutoffs, %zu mismatches; NDCG@10 at rank 2 = %.15f", mismatches, at2)};
}

// 4 ─ retrieval
Outcome retrieval() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const std::size_t dim = 16;
  auto gaussian = [&](std::size_t rows) {
    Matrix m(rows, dim);
    for (auto& v : m.values()) v = g(rng);
    return m;
  };
  const Matrix small = gaussian(2000);
  const NNIndex exact(small, IndexMode::Exact);
  std::size_t differ = 0;
  for (int q = 0; q < 1000; ++q) {
    const Matrix v = gaussian(1);
    if (exact.query(v.row(0), 10).ids != linear_scan(small, v.row(0), 10)) ++differ;
  }

  const Matrix points = gaussian(5000);
  const NNIndex approx(points, IndexMode::Approximate);
  double hits = 0;
  for (int q = 0; q < 1000; ++q) {
    const Matrix v = gaussian(1);
    const auto want = linear_scan(points, v.row(0), 10);
    const std::set<std::uint32_t> w(want.begin(), want.end());
    for (const auto id : approx.query(v.row(0), 10).ids) hits += w.contains(id) ? 1.0 : 0.0;
  }
  const double recall = hits / 10000.0;
  return {differ == 0 && recall >= 0.95,
          fmt("exact vs scan %zu/1000 differ; approximate recall@10 %.4f over 5000 points", differ, recall)};
}

// 5 ─ overfitting the planted set
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = make_planted_dataset({});
  TrainConfig tc;
  tc.model.dim = 16;
  tc.model.hyperedges = 8;
  tc.epochs = 200;
  tc.batch_size = 32;
  tc.lr = 3e-3;
  tc.seed = 1;
  const auto r = train(d, tc);
  const double bpr = r.history.back().mean_bpr;
  const auto mem = evaluate_memorized(model_from_checkpoint(r.checkpoint, d), {1, 10});
  const double secs = seconds_since(t0);
  return {bpr < 0.1 && mem.hr_at(1) >= 0.9 && secs < 120.0,
          fmt("train BPR per pair %.4f (< 0.1), memorized HR@1 %.3f (>= 0.9), %.1f s", bpr, mem.hr_at(1), secs)};
}

// 6 ─ ablations
Outcome ablations() {
  int beats_rea = 0, beats_hpp = 0;
  std::ostringstream per_seed;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    PlantedConfig pc;
    pc.seed = s;
    const auto split = leave_one_out_split(make_planted_dataset(pc), s);
    double hr[3];
    for (int v = 0; v < 3; ++v) {
      TrainConfig tc;
      tc.model.dim = 16;
      tc.model.hyperedges = 8;
      tc.epochs = 100;
      tc.batch_size = 128;
      tc.lr = 3e-3;
      tc.seed = 100 + s;
      if (v == 1) tc.model.ablation.rea = false;
      if (v == 2) tc.model.ablation.hpp = false;
      const auto r = train(split.train, tc);
      hr[v] = evaluate(model_from_checkpoint(r.checkpoint, split.train), split.test, {10}).hr_at(10);
    }
    beats_rea += hr[0] >= hr[1];
    beats_hpp += hr[0] >= hr[2];
    per_seed << fmt(" %.2f/%.2f/%.2f", hr[0], hr[1], hr[2]);
  }
  return {beats_rea >= 3 && beats_hpp >= 3,
          fmt("full >= w/o REA in %d/5, >= w/o HPP in %d/5; HR@10 full/noREA/noHPP:", beats_rea, beats_hpp) +
              per_seed.str()};
}

// 7 ─ propagation oracles and projection properties
Outcome propagation() {
  std::mt19937_64 rng(12);
  const auto d = make_planted_dataset({});
  const std::size_t m = d.num_users(), n = d.num_items();
  const auto adj = build_normalized_adjacency(d.edges[1], m, n);
  const Matrix eu = random_matrix(m, 8, rng), ei = random_matrix(n, 8, rng);
  const auto got = lightgcn_propagate(adj, eu, ei, 3);
  const auto [ou, oi] = lightgcn_oracle(normalized(mask_of(d.edges[1], m, n)), to_dense(eu), to_dense(ei), 3);
  const double e_gcn = std::max(max_abs_diff(got.user, from_dense(ou)), max_abs_diff(got.item, from_dense(oi)));

  const Matrix w = random_matrix(8, 4, rng);
  double e_hyp = 0;
  for (auto scale : {HypergraphScale::None, HypergraphScale::Mean, HypergraphScale::Trace}) {
    const Matrix h = hypergraph_convolve(hypergraph_incidence(eu, w), eu, scale);
    e_hyp = std::max(e_hyp, max_abs_diff(h, from_dense(semantic_oracle(to_dense(eu), to_dense(w), scale))));
  }

  const Matrix col = random_matrix(10000, 16, rng), sem = random_matrix(10000, 16, rng, 4.0);
  const Matrix p = adaptive_project(col, sem, 1e-8);
  const double e_prj = max_abs_diff(p, from_dense(project_oracle(to_dense(col), to_dense(sem), 1e-8)));
  double worst_cos = 0, worst_ratio = 0;
  for (std::size_t r = 0; r < col.rows(); ++r) {
    double pc = 0, pp = 0, cc = 0, ss = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      pc += p(r, k) * col(r, k);
      pp += p(r, k) * p(r, k);
      cc += col(r, k) * col(r, k);
      ss += sem(r, k) * sem(r, k);
    }
    if (pp > 0) worst_cos = std::max(worst_cos, 1.0 - std::abs(pc) / std::sqrt(pp * cc));
    worst_ratio = std::max(worst_ratio, std::sqrt(pp / ss));
  }
  const bool ok = e_gcn < 1e-10 && e_hyp < 1e-10 && e_prj < 1e-10 && worst_cos < 1e-10 && worst_ratio <= 1.0;
  return {ok, fmt("oracle err lightgcn %.1e, hypergraph %.1e, projection %.1e; on 10^4 rows "
                  "max 1-|cos| %.1e, max |proj|/|sem| %.6f",
                  e_gcn, e_hyp, e_prj, worst_cos, worst_ratio)};
}

struct Trained {
  SplitDataset split = leave_one_out_split(make_planted_dataset({}), 13);
  TrainConfig tc;
  TrainResult result;
  Trained() {
    tc.model.dim = 16;
    tc.model.hyperedges = 8;
    tc.epochs = 30;
    tc.batch_size = 128;
    tc.lr = 3e-3;
    tc.seed = 42;
    result = train(split.train, tc);
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, c);
  return out.str();
}

// 8 ─ determinism and checkpoint round trip
Outcome reproducibility() {
  const auto& t = trained();
  const auto again = train(t.split.train, t.tc);
  const std::string a = bytes_of(t.result.checkpoint), b = bytes_of(again.checkpoint);
  std::istringstream in(a, std::ios::binary);
  const Checkpoint back = read_checkpoint(in);
  const auto before = evaluate(model_from_checkpoint(t.result.checkpoint, t.split.train), t.split.test, {1, 10, 50});
  const auto after = evaluate(model_from_checkpoint(back, t.split.train), t.split.test, {1, 10, 50});
  const bool same_bytes = a == b;
  const bool same_metrics = before.hr == after.hr && before.ndcg == after.ndcg;
  return {same_bytes && same_metrics,
          fmt("checkpoints (%zu bytes) %s; metrics after round trip %s (HR@10 %.4f)", a.size(),
              same_bytes ? "bit-identical" : "differ", same_metrics ? "identical" : "differ",
              after.hr_at(10))};
}

// 9 ─ explanation records
Outcome explanations() {
  const auto& t = trained();
  const Model m = model_from_checkpoint(t.result.checkpoint, t.split.train);
  const auto report = evaluate(m, t.split.test, {10});
  double sum = 0;
  for (auto s : {PS::Strong, PS::Medium, PS::Weak, PS::Default}) sum += report.paths.fraction(s);

  std::size_t records = 0, weak = 0, weak_bad = 0, medium_low = 0, medium_bad = 0;
  const auto& d = t.split.train;
  for (std::uint32_t u = 0; u < d.num_users(); ++u) {
    for (std::uint32_t i = 0; i < d.num_items(); ++i) {
      const auto rec = parse_explanation(to_json_line(explain(m, d.users.decode(u), d.items.decode(i))));
      ++records;
      const ExplanationStep* conf = nullptr;
      const ExplanationStep* retr = nullptr;
      for (const auto& s : rec.steps) {
        if (s.kind == "confidence") conf = &s;
        if (s.kind == "retrieve") retr = &s;
      }
      if (rec.path.starts_with("Weak")) {
        ++weak;
        if (conf) ++weak_bad;
      }
      if (rec.path.starts_with("Medium") && conf && *conf->value < *conf->threshold) {
        ++medium_low;
        bool ok = retr && !retr->neighbors.empty();
        if (ok)
          for (const auto& id : retr->neighbors) ok = ok && d.items.find(id).has_value();
        if (!ok) ++medium_bad;
      }
    }
  }
  const bool ok = std::abs(sum - 1.0) <= 1e-9 && weak > 0 && weak_bad == 0 && medium_low > 0 && medium_bad == 0;
  return {ok, fmt("path fractions sum to %.12f; %zu records, %zu weak (%zu with confidence), "
                  "%zu medium below tau (%zu without neighbor ids)",
                  sum, records, weak, weak_bad, medium_low, medium_bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient check", gradient_check},
      {"dispatch", dispatch_rules},
      {"ranking metrics", metrics_brute_force},
      {"retrieval", retrieval},
      {"overfit", overfit},
      {"ablations", ablations},
      {"propagation", propagation},
      {"reproducibility", reproducibility},
      {"explanations", explanations},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.passed ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.passed ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
