#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "cnre/dataset.hpp"
#include "cnre/error.hpp"
#include "cnre/log.hpp"
#include "support.hpp"

using namespace cnre;

namespace {

struct WarningCapture {
  std::vector<std::string> messages;
  WarningHandler previous;
  WarningCapture() {
    previous = set_warning_handler([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_handler(previous); }
};

InteractionDataset small() {
  std::vector<std::vector<RawInteraction>> per = {
      {{"alice", "x"}, {"alice", "y"}, {"bob", "y"}, {"bob", "z"}},
      {{"alice", "y"}, {"bob", "z"}},
      {{"alice", "y"}, {"bob", "x"}},
  };
  return build_dataset(per, BehaviorSpec{{"view", "cart", "buy"}});
}

}  // namespace

TEST_CASE("behavior spec validation") {
  CHECK_NOTHROW(BehaviorSpec{{"view", "buy"}}.validate());
  CHECK_THROWS_AS(BehaviorSpec{{"buy"}}.validate(), InvalidArgument);
  CHECK_THROWS_AS((BehaviorSpec{{"view", "view"}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((BehaviorSpec{{"view", ""}}.validate()), InvalidArgument);
  const BehaviorSpec s{{"view", "cart", "buy"}};
  CHECK(s.target() == "buy");
  CHECK(s.find("cart") == 1u);
  CHECK_FALSE(s.find("fav").has_value());
}

TEST_CASE("id map is a first-seen bijection") {
  IdMap m;
  CHECK(m.encode("b") == 0);
  CHECK(m.encode("a") == 1);
  CHECK(m.encode("b") == 0);
  CHECK(m.decode(1) == "a");
  CHECK(m.find("a") == 1u);
  CHECK_FALSE(m.find("c").has_value());
  CHECK(m.size() == 2);
}

TEST_CASE("parsing interaction lines") {
  std::istringstream ok("u1\ti1\r\nu1\ti1\n\nu2\ti1\n");
  const auto rows = parse_interactions(ok, "mem");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == RawInteraction{"u1", "i1"});
  CHECK(rows[1] == RawInteraction{"u2", "i1"});

  for (const char* bad : {"u1 i1\n", "u1\t\n", "\ti1\n", "u1\ti1\textra\n"}) {
    CAPTURE(bad);
    std::istringstream in(std::string("a\tb\n") + bad);
    try {
      parse_interactions(in, "f.tsv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  WarningCapture w;
  std::istringstream empty("");
  CHECK(parse_interactions(empty, "empty.tsv").empty());
  CHECK(w.messages.size() == 1);
}

TEST_CASE("dataset construction") {
  const auto d = small();
  CHECK(d.num_users() == 2);
  CHECK(d.num_items() == 3);
  CHECK(d.users.decode(0) == "alice");
  CHECK(d.items.decode(2) == "z");
  CHECK(d.edges[0].size() == 4);
  CHECK(d.target().contains(1, 0));
  CHECK_FALSE(d.target().contains(1, 2));
  CHECK(d.user_interactions(0) == 4);
  CHECK(d.total_edges() == 8);
  const auto items = d.edges[0].items_of(0);
  CHECK(std::vector<std::uint32_t>(items.begin(), items.end()) == std::vector<std::uint32_t>{0, 1});

  std::vector<std::vector<RawInteraction>> no_target = {{{"a", "x"}}, {}};
  CHECK_THROWS_AS(build_dataset(no_target, BehaviorSpec{{"view", "buy"}}), InvalidArgument);
  CHECK_THROWS_AS(EdgeSet(1, 1, {{0, 1}}), InvalidArgument);
}

TEST_CASE("file round trip") {
  const auto d = small();
  const auto dir = std::filesystem::temp_directory_path() / "cnre_dataset_test";
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (std::size_t b = 0; b < d.num_behaviors(); ++b) {
    files.push_back(dir / (d.behaviors.names[b] + ".tsv"));
    write_interactions(files.back(), d, b);
  }
  const auto back = load_dataset(files, d.behaviors);
  for (std::size_t b = 0; b < d.num_behaviors(); ++b) {
    CHECK(std::equal(back.edges[b].edges().begin(), back.edges[b].edges().end(),
                     d.edges[b].edges().begin(), d.edges[b].edges().end()));
  }
  CHECK_THROWS_AS(load_interactions(dir / "missing.tsv", "x"), InvalidArgument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("conversion order") {
  // view converts 1/4, fav converts 2/2
  std::vector<std::vector<RawInteraction>> per = {
      {{"a", "1"}, {"a", "2"}, {"b", "3"}, {"b", "4"}},
      {{"a", "1"}, {"b", "4"}},
      {{"a", "1"}, {"b", "4"}},
  };
  const auto d = build_dataset(per, BehaviorSpec{{"fav", "view", "buy"}});
  CHECK(conversion_rate(d, 0) == doctest::Approx(0.5));
  CHECK(conversion_rate(d, 1) == doctest::Approx(1.0));
  CHECK(compute_conversion_order(d) == std::vector<std::size_t>{0, 1, 2});
  const auto r = d.reordered(std::vector<std::size_t>{1, 0, 2});
  CHECK(r.behaviors.names == std::vector<std::string>{"view", "fav", "buy"});
  CHECK(r.edges[1].size() == 4);
  CHECK(compute_conversion_order(r) == std::vector<std::size_t>{1, 0, 2});
  CHECK_THROWS_AS(d.reordered(std::vector<std::size_t>{0, 0, 2}), InvalidArgument);
}

TEST_CASE("leave-one-out split partitions target edges") {
  const auto d = cnre::testing::random_dataset(25, 20, {"view", "cart", "buy"}, 0.1, 3);
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    CAPTURE(seed);
    const auto split = leave_one_out_split(d, seed);
    std::set<Edge> train(split.train.target().edges().begin(), split.train.target().edges().end());
    std::size_t held = 0;
    for (const auto& p : split.test) {
      CHECK_FALSE(train.contains(Edge{p.user, p.item}));
      CHECK(d.target().contains(p.user, p.item));
      ++held;
    }
    CHECK(train.size() + held == d.target().size());
    for (std::uint32_t u = 0; u < d.num_users(); ++u) {
      const auto n = static_cast<std::size_t>(
          std::count_if(split.test.begin(), split.test.end(), [&](const TestPair& p) { return p.user == u; }));
      CHECK(n == (d.target().degree(u) >= 2 ? 1u : 0u));
    }
    for (std::size_t b = 0; b + 1 < d.num_behaviors(); ++b) CHECK(split.train.edges[b].size() == d.edges[b].size());
    CHECK(std::is_sorted(split.test.begin(), split.test.end(),
                         [](const TestPair& a, const TestPair& b) { return a.user < b.user; }));
  }
  CHECK(leave_one_out_split(d, 9).test == leave_one_out_split(d, 9).test);
}

TEST_CASE("bpr triple sampling") {
  const auto d = cnre::testing::random_dataset(15, 12, {"view", "buy"}, 0.2, 4);
  std::mt19937_64 rng(1);
  const auto triples = sample_bpr_triples(d, 0, 500, rng);
  CHECK(triples.size() == 500);
  for (const auto& t : triples) {
    CHECK(d.edges[0].contains(t.user, t.pos_item));
    CHECK_FALSE(d.edges[0].contains(t.user, t.neg_item));
    CHECK(t.behavior == 0);
  }
}

TEST_CASE("sparsity groups") {
  const auto d = cnre::testing::random_dataset(20, 15, {"view", "buy"}, 0.3, 6);
  const auto groups = group_users_by_sparsity(d, 4);
  REQUIRE(groups.size() == 4);
  std::set<std::uint32_t> all;
  std::size_t prev_max = 0;
  for (const auto& g : groups) {
    CHECK(g.size() == 5);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (auto u : g) {
      all.insert(u);
      lo = std::min(lo, d.user_interactions(u));
      hi = std::max(hi, d.user_interactions(u));
    }
    CHECK(lo >= prev_max);
    prev_max = hi;
  }
  CHECK(all.size() == 20);
  CHECK_THROWS_AS(group_users_by_sparsity(d, 21), InvalidArgument);
}

TEST_CASE("history drop") {
  const auto d = cnre::testing::random_dataset(20, 15, {"view", "cart", "buy"}, 0.3, 7);
  const auto split = leave_one_out_split(d, 1);
  const auto same = drop_history(split, 0.5, 0.0, 3);
  CHECK(same.train.total_edges() == split.train.total_edges());

  const auto dropped = drop_history(split, 0.5, 0.5, 3);
  CHECK(dropped.test == split.test);
  std::size_t touched = 0;
  for (std::uint32_t u = 0; u < d.num_users(); ++u) {
    const auto before = split.train.user_interactions(u);
    const auto after = dropped.train.user_interactions(u);
    CHECK(after <= before);
    if (after < before) {
      ++touched;
      CHECK(after == before - static_cast<std::size_t>(std::lround(0.5 * static_cast<double>(before))));
    }
  }
  CHECK(touched <= 10);
  CHECK_THROWS_AS(drop_history(split, 1.5, 0.1, 1), InvalidArgument);
}

TEST_CASE("planted dataset") {
  const auto a = make_planted_dataset({});
  const auto b = make_planted_dataset({});
  CHECK(a.num_users() == 50);
  CHECK(a.num_items() == 30);
  CHECK(a.behaviors.names == std::vector<std::string>{"view", "cart", "buy"});
  for (std::size_t k = 0; k < a.num_behaviors(); ++k) {
    CHECK(std::equal(a.edges[k].edges().begin(), a.edges[k].edges().end(), b.edges[k].edges().begin(),
                     b.edges[k].edges().end()));
  }
  for (std::uint32_t u = 0; u < a.num_users(); ++u) CHECK(a.target().degree(u) >= 2);
  // carts come from views
  for (const auto& e : a.edges[1].edges()) CHECK(a.edges[0].contains(e.user, e.item));
}
