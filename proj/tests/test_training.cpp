#include <doctest.h>

#include <regex>
#include <sstream>

#include "cnre/checkpoint.hpp"
#include "cnre/error.hpp"
#include "cnre/gradcheck.hpp"
#include "cnre/kernels.hpp"
#include "cnre/training.hpp"
#include "support.hpp"

using namespace cnre;

namespace {

TrainConfig small_config() {
  TrainConfig tc;
  tc.model.dim = 8;
  tc.model.hyperedges = 4;
  tc.model.neighbors = 3;
  tc.batch_size = 64;
  tc.epochs = 5;
  tc.lr = 3e-3;
  tc.seed = 11;
  return tc;
}

bool same_values(const ParameterStore& a, const ParameterStore& b) {
  if (a.slots().size() != b.slots().size()) return false;
  for (std::size_t k = 0; k < a.slots().size(); ++k) {
    if (a.slots()[k].name != b.slots()[k].name || !(a.slots()[k].value == b.slots()[k].value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero epochs returns the rounded initialization") {
  const auto d = make_planted_dataset({});
  auto tc = small_config();
  tc.epochs = 0;
  const auto r = train(d, tc);
  auto init = init_parameters(tc.model, d.num_users(), d.num_items(), 3, tc.seed);
  round_to_f32(init);
  CHECK(same_values(r.checkpoint.store, init));
  CHECK(r.history.empty());
  CHECK(r.checkpoint.behaviors == d.behaviors.names);
}

TEST_CASE("training is deterministic and logs one line per epoch") {
  const auto d = make_planted_dataset({});
  const auto tc = small_config();
  std::ostringstream log;
  const auto a = train(d, tc, &log);
  const auto b = train(d, tc);
  CHECK(same_values(a.checkpoint.store, b.checkpoint.store));
  CHECK(a.checkpoint.store.step() == b.checkpoint.store.step());
  CHECK(a.checkpoint.store.step() > 0);

  const std::regex line(R"(^(\d+)\t([-+0-9.eE]+)\t([0-9.eE+-]+)$)");
  std::istringstream in(log.str());
  std::string s;
  std::size_t n = 0;
  while (std::getline(in, s)) {
    std::smatch m;
    REQUIRE(std::regex_match(s, m, line));
    CHECK(std::stoul(m[1]) == ++n);
  }
  CHECK(n == tc.epochs);
  CHECK(a.history.size() == tc.epochs);
  CHECK(a.history.back().behavior_bpr.size() == 3);

  auto other = tc;
  other.seed = 12;
  CHECK_FALSE(same_values(train(d, other).checkpoint.store, a.checkpoint.store));
}

TEST_CASE("thread count does not change the result") {
  const auto d = make_planted_dataset({});
  auto tc = small_config();
  tc.epochs = 2;
  const int before = num_threads();
  set_num_threads(1);
  const auto a = train(d, tc);
  set_num_threads(4);
  const auto b = train(d, tc);
  set_num_threads(before);
  CHECK(same_values(a.checkpoint.store, b.checkpoint.store));
}

TEST_CASE("loss goes down") {
  const auto d = make_planted_dataset({});
  auto tc = small_config();
  tc.epochs = 30;
  const auto r = train(d, tc);
  CHECK(r.history.back().mean_bpr < 0.5 * r.history.front().mean_bpr);
  for (const auto& h : r.history) CHECK(h.mean_bpr >= 0.0);
}

TEST_CASE("training pairs hide their own label unless asked") {
  const auto d = make_planted_dataset({});
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.hyperedges = 2;
  auto store = init_parameters(cfg, d.num_users(), d.num_items(), 3, 1);
  const auto cascade = compute_cascade(GraphSet::from_dataset(d), store, cfg);
  const auto idx = build_retrieval_indices(cascade, IndexMode::Exact);
  const auto e = d.target().edges()[0];
  CHECK(target_plan(d, e.user, e.item, cascade, idx, cfg).path != PreferenceStrength::Strong);
  cfg.train_label_visible = true;
  CHECK(target_plan(d, e.user, e.item, cascade, idx, cfg).path == PreferenceStrength::Strong);

  cfg.train_label_visible = false;
  cfg.auxiliary = AuxiliaryScoring::Reasoned;
  const auto c = d.edges[1].edges()[0];
  const auto p = auxiliary_plan(d, 1, c.user, c.item, cascade, idx, cfg);
  CHECK(p.path != PreferenceStrength::Strong);
  CHECK(p.behavior == 0);
  cfg.auxiliary = AuxiliaryScoring::Direct;
  const auto q = auxiliary_plan(d, 1, c.user, c.item, cascade, idx, cfg);
  CHECK(q.behavior == 1);
  CHECK(q.op == MediatorOp::Concat);
}

TEST_CASE("gradient of the batch loss on a toy instance") {
  const auto d = cnre::testing::random_dataset(10, 8, {"view", "cart", "buy"}, 0.3, 2);
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.hyperedges = 2;
  cfg.neighbors = 2;
  cfg.tau = 0.6;
  auto store = init_parameters(cfg, 10, 8, 3, 3);
  const auto graphs = GraphSet::from_dataset(d);
  const auto cascade = compute_cascade(graphs, store, cfg);
  const auto idx = build_retrieval_indices(cascade, IndexMode::Exact);
  std::mt19937_64 rng(1);
  std::vector<BprTriple> triples;
  for (std::size_t b = 0; b < 3; ++b) {
    const auto t = sample_bpr_triples(d, b, 10, rng);
    triples.insert(triples.end(), t.begin(), t.end());
  }
  const auto planned = plan_triples(d, triples, cascade, idx, cfg);
  const LossBuilder loss = [&](Tape& t, ParameterStore& s) {
    return record_loss(t, s, graphs, planned, cfg, 1e-3).total;
  };
  GradCheckOptions opt;
  opt.min_coordinates = 400;
  const auto r = finite_difference_check(loss, store, opt);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.per_slot.size() == store.slots().size());
}

TEST_CASE("invalid configurations and numeric blow-up") {
  const auto d = make_planted_dataset({});
  auto tc = small_config();
  tc.model.layer_counts = {1, 1};
  CHECK_THROWS_AS(train(d, tc), InvalidArgument);

  tc = small_config();
  tc.lr = 1e300;
  tc.epochs = 3;
  try {
    train(d, tc);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}
