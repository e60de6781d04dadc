#include <doctest.h>

#include <algorithm>

#include <json.hpp>

#include "cnre/error.hpp"
#include "cnre/explain.hpp"
#include "support.hpp"

using namespace cnre;
using PS = PreferenceStrength;

namespace {

struct Fixture {
  InteractionDataset data = cnre::testing::random_dataset(16, 14, {"view", "cart", "buy"}, 0.3, 21);
  ModelConfig cfg;
  Fixture(double tau = 1.01) {
    cfg.dim = 4;
    cfg.hyperedges = 2;
    cfg.neighbors = 3;
    cfg.tau = tau;
  }
  Model model() const {
    return Model(data, init_parameters(cfg, data.num_users(), data.num_items(), 3, 2), cfg);
  }
  // First pair whose observed chain has exactly these bits.
  std::optional<std::pair<std::uint32_t, std::uint32_t>> find(std::uint64_t bits) const {
    for (std::uint32_t u = 0; u < data.num_users(); ++u)
      for (std::uint32_t i = 0; i < data.num_items(); ++i)
        if (observe_chain(data, u, i).bits() == bits) return std::make_pair(u, i);
    return std::nullopt;
  }
};

const ExplanationStep* step(const ExplanationRecord& r, const std::string& kind) {
  for (const auto& s : r.steps)
    if (s.kind == kind) return &s;
  return nullptr;
}

}  // namespace

TEST_CASE("path labels") {
  ReasoningPlan p;
  p.path = PS::Strong;
  CHECK(path_label(p) == "Strong; Direct");
  p.path = PS::Medium;
  p.op = MediatorOp::Conjunction;
  CHECK(path_label(p) == "Medium; Conjunction");
  p.op = MediatorOp::Concat;
  CHECK(path_label(p) == "Medium; Direct");
  p.path = PS::Weak;
  CHECK(path_label(p) == "Weak; Direct");
  p.op = MediatorOp::Disjunction;
  CHECK(path_label(p) == "Weak; Disjunction");
  p.path = PS::Default;
  CHECK(path_label(p) == "Default");
}

TEST_CASE("records per path") {
  Fixture f;
  const Model m = f.model();
  for (std::uint64_t bits = 0; bits < 8; ++bits) {
    CAPTURE(bits);
    const auto obs = ChainObservation::from_bits(bits, 3);
    const auto r = explain(m, 1, 2, obs);
    CHECK(r.user == "u1");
    CHECK(r.item == "i2");
    REQUIRE(r.chain.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) {
      CHECK(r.chain[b].first == f.data.behaviors.names[b]);
      CHECK(r.chain[b].second == obs.flags[b]);
    }
    CHECK(r.score == doctest::Approx(m.score(1, 2, obs).score).epsilon(1e-12));
    REQUIRE_FALSE(r.steps.empty());
    CHECK(r.steps.back().kind == "operator");

    switch (dispatch(obs)) {
      case PS::Strong:
      case PS::Default:
        CHECK(r.steps.size() == 1);
        CHECK(r.steps[0].behavior == "buy");
        break;
      case PS::Weak:
        CHECK(r.path == "Weak; Disjunction");
        CHECK(step(r, "confidence") == nullptr);
        REQUIRE(step(r, "retrieve") != nullptr);
        CHECK(*step(r, "retrieve")->space == "semantic");
        CHECK(step(r, "retrieve")->neighbors.size() == 3);
        break;
      case PS::Medium: {
        // tau above 1 puts every medium pair below threshold
        CHECK(r.path == "Medium; Conjunction");
        REQUIRE(r.steps.size() == 3);
        CHECK(r.steps[0].kind == "confidence");
        CHECK(*r.steps[0].value < *r.steps[0].threshold);
        CHECK(r.steps[1].kind == "retrieve");
        CHECK(*r.steps[1].space == "collaborative");
        CHECK(r.steps[1].neighbors.size() == 3);
        for (const auto& n : r.steps[1].neighbors) {
          CHECK(f.data.items.find(n).has_value());
          CHECK(n != "i2");
        }
        break;
      }
    }
  }
}

TEST_CASE("medium at or above tau has confidence but no retrieval") {
  Fixture f(0.0);
  const auto r = explain(f.model(), 0, 0, ChainObservation::from_bits(3, 3));
  CHECK(r.path == "Medium; Direct");
  REQUIRE(step(r, "confidence") != nullptr);
  CHECK(*step(r, "confidence")->value >= 0.0);
  CHECK(step(r, "retrieve") == nullptr);
}

TEST_CASE("json round trip") {
  Fixture f;
  const Model m = f.model();
  for (std::uint64_t bits : {0u, 1u, 3u, 4u}) {
    const auto r = explain(m, 3, 5, ChainObservation::from_bits(bits, 3));
    const std::string line = to_json_line(r);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(parse_explanation(line) == r);
    const auto j = nlohmann::json::parse(line);
    for (const auto& s : j["steps"]) {
      if (s["kind"] == "retrieve") CHECK(s.contains("neighbors"));
      else CHECK_FALSE(s.contains("neighbors"));
    }
  }
  CHECK_THROWS_AS(parse_explanation("{}"), ParseError);
  CHECK_THROWS_AS(parse_explanation("not json"), ParseError);
}

TEST_CASE("explain by raw id") {
  Fixture f;
  const Model m = f.model();
  const auto r = explain(m, "u4", "i7");
  const auto u = *f.data.users.find("u4");
  const auto i = *f.data.items.find("i7");
  CHECK(r == explain(m, u, i, observe_chain(f.data, u, i)));
  CHECK_THROWS_AS(explain(m, "nobody", "i1"), InvalidArgument);
  CHECK_THROWS_AS(explain(m, "u1", "nothing"), InvalidArgument);
}

TEST_CASE("edits") {
  const BehaviorSpec spec{{"view", "cart", "buy"}};
  const auto o = ChainObservation::from_bits(3, 3);
  CHECK(apply_edit(o, spec, {CounterfactualEdit::Kind::Drop, "cart"}).bits() == 1);
  CHECK(apply_edit(o, spec, {CounterfactualEdit::Kind::Add, "buy"}).bits() == 7);
  CHECK_THROWS_AS(apply_edit(o, spec, {CounterfactualEdit::Kind::Drop, "buy"}), InvalidArgument);
  CHECK_THROWS_AS(apply_edit(o, spec, {CounterfactualEdit::Kind::Add, "view"}), InvalidArgument);
  CHECK_THROWS_AS(apply_edit(o, spec, {CounterfactualEdit::Kind::Add, "like"}), InvalidArgument);
  CHECK_THROWS_AS(apply_edit(ChainObservation::from_bits(1, 2), spec, {CounterfactualEdit::Kind::Add, "cart"}),
                  InvalidArgument);
}

TEST_CASE("single flag edits move the path monotonically") {
  for (std::size_t n : {3u, 4u}) {
    for (std::uint64_t bits = 0; bits < (1U << n); ++bits) {
      const auto base = ChainObservation::from_bits(bits, n);
      for (std::size_t b = 0; b < n; ++b) {
        const auto edited = ChainObservation::from_bits(bits ^ (1U << b), n);
        const bool added = edited.flags[b];
        if (added) CHECK(dispatch(edited) >= dispatch(base));
        else CHECK(dispatch(edited) <= dispatch(base));
      }
    }
  }
}

TEST_CASE("counterfactuals on observed pairs") {
  Fixture f;
  const Model m = f.model();

  const auto vc = f.find(3);  // view + cart, no buy
  REQUIRE(vc.has_value());
  const auto& u = f.data.users.decode(vc->first);
  const auto& i = f.data.items.decode(vc->second);
  const auto drop = counterfactual(m, u, i, {CounterfactualEdit::Kind::Drop, "cart"});
  CHECK(drop.base.path == "Medium; Conjunction");
  CHECK(drop.edited.path == "Weak; Disjunction");
  CHECK(drop.transition == "downgrade");
  CHECK(drop.score_delta == doctest::Approx(drop.edited.score - drop.base.score));
  const auto before = step(drop.base, "retrieve")->neighbors;
  const auto after = step(drop.edited, "retrieve")->neighbors;
  auto has = [](const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  for (const auto& n : drop.neighbors_added) CHECK((has(after, n) && !has(before, n)));
  for (const auto& n : drop.neighbors_removed) CHECK((has(before, n) && !has(after, n)));
  CHECK(after.size() - drop.neighbors_added.size() == before.size() - drop.neighbors_removed.size());

  const auto c = f.find(2);  // cart only
  REQUIRE(c.has_value());
  const auto add = counterfactual(m, f.data.users.decode(c->first), f.data.items.decode(c->second),
                                  {CounterfactualEdit::Kind::Add, "view"});
  CHECK(add.base.path == "Weak; Disjunction");
  CHECK(add.edited.path == "Medium; Conjunction");
  CHECK(add.transition == "upgrade");

  const auto cart_only = counterfactual(m, u, i, {CounterfactualEdit::Kind::Drop, "view"});
  CHECK(cart_only.transition == "downgrade");
  CHECK(cart_only.edited.path == "Weak; Disjunction");

  const auto all = f.find(7);
  REQUIRE(all.has_value());
  const auto same = counterfactual(m, f.data.users.decode(all->first), f.data.items.decode(all->second),
                                   {CounterfactualEdit::Kind::Drop, "view"});
  CHECK(same.transition == "unchanged");
  CHECK(same.edited.path == "Strong; Direct");
  CHECK(same.neighbors_added.empty());

  const auto j = nlohmann::json::parse(to_json_line(drop));
  CHECK(j["transition"] == "downgrade");
  CHECK(parse_explanation(j["edited"].dump()) == drop.edited);

  // the model itself is untouched
  CHECK(explain(m, u, i) == drop.base);
}
