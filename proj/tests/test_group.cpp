#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "racglab/errors.hpp"
#include "racglab/group.hpp"

using namespace racglab;

namespace {

std::vector<DefiningGraph> test_graphs() {
  return {graphs::path(4), graphs::cycle(4), graphs::cycle(5), graphs::complete(3),
          graphs::discrete(3)};
}

Word random_word(std::mt19937_64& rng, std::size_t rank, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> letter(0, static_cast<int>(rank) - 1);
  Word w(len(rng));
  for (auto& s : w) s = static_cast<Letter>(letter(rng));
  return w;
}

// Random Tits moves that do not change the element: swap adjacent commuting
// letters, insert a cancelling pair s s.
Word scramble(const Group& g, Word w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<int> letter(0, static_cast<int>(g.rank()) - 1);
  for (int move = 0; move < 12; ++move) {
    if (coin(rng) == 0 || w.size() < 2) {
      std::uniform_int_distribution<std::size_t> pos(0, w.size());
      auto p = static_cast<std::ptrdiff_t>(pos(rng));
      Letter s = static_cast<Letter>(letter(rng));
      w.insert(w.begin() + p, {s, s});
    } else {
      std::uniform_int_distribution<std::size_t> pos(0, w.size() - 2);
      auto p = pos(rng);
      if (g.commute(w[p], w[p + 1])) std::swap(w[p], w[p + 1]);
    }
  }
  return w;
}

}  // namespace

TEST_CASE("canonicalize examples") {
  Group tree(graphs::discrete(3));
  CHECK(tree.parse("a.a").is_identity());

  Group k2(graphs::complete(2));
  CHECK(k2.format(k2.parse("b.a")) == "a.b");

  Group p4(graphs::path(4));
  CHECK(p4.parse("a.b.a.b").is_identity());
  CHECK(p4.format(p4.parse("c.a")) == "c.a");
  CHECK(p4.format(p4.parse("c.b")) == "b.c");
  CHECK(p4.format(p4.parse("b.d.c.a")) == "b.c.d.a");
}

TEST_CASE("ShortLex-least form is found even where adjacent swaps stall") {
  // Order c < a < b; a commutes with b and c, b and c do not commute.
  // The word b.c.a has no descending adjacent commuting pair, yet a.b.c is smaller.
  auto g = parse_graph(R"({"vertices":["c","a","b"],"edges":[["a","b"],["a","c"]]})");
  Group grp(g);
  CHECK(grp.format(grp.parse("b.c.a")) == "a.b.c");
}

TEST_CASE("multiply, invert and errors") {
  Group tree(graphs::discrete(3));
  auto a = tree.parse("a");
  CHECK(tree.multiply(a, a).is_identity());
  CHECK(tree.multiply(tree.parse("a.b"), tree.parse("b.a")).is_identity());
  auto abab = tree.multiply(tree.parse("a.b"), tree.parse("a.b"));
  CHECK(tree.format(abab) == "a.b.a.b");
  CHECK(abab.length() == 4);
  CHECK(oracle::word_length(tree.graph(), abab.word()) == 4);

  CHECK(tree.format(tree.invert(tree.parse("a.b"))) == "b.a");
  CHECK(tree.invert(tree.identity()).is_identity());

  Group p4(graphs::path(4));
  auto abc = p4.parse("a.b.c");
  CHECK(p4.multiply(abc, p4.invert(abc)).is_identity());
  CHECK(p4.invert(abc) == p4.canonicalize(Word{2, 1, 0}));

  Group other(graphs::discrete(3));
  CHECK_THROWS_AS(tree.multiply(a, other.parse("a")), ValidationError);
  CHECK_THROWS_AS(tree.canonicalize(Word{0, 7}), ValidationError);
  CHECK_THROWS_AS(tree.parse("a.q"), ValidationError);
}

TEST_CASE("distance examples") {
  Group tree(graphs::discrete(3));
  auto x = tree.parse("a.c");
  CHECK(tree.distance(x, x) == 0);
  CHECK(tree.distance(tree.identity(), tree.parse("a.b.a.b.a.b")) == 6);
  Group k2(graphs::complete(2));
  CHECK(k2.distance(k2.identity(), k2.parse("a.b.a.b")) == 0);
}

TEST_CASE("canonical forms are invariant under Tits moves and name the same element") {
  std::mt19937_64 rng(20241017);
  for (const auto& graph : test_graphs()) {
    Group g(graph);
    oracle::TitsRep rep(graph);
    int failures = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      Word w = random_word(rng, g.rank(), 14);
      auto c = g.canonicalize(w);
      if (g.canonicalize(c.word()) != c) ++failures;
      if (g.canonicalize(scramble(g, w, rng)) != c) ++failures;
      if (rep.of(w) != rep.of(c.word())) ++failures;
    }
    CHECK(failures == 0);
  }
}

TEST_CASE("canonical length is the word metric") {
  std::mt19937_64 rng(7);
  for (const auto& graph : test_graphs()) {
    Group g(graph);
    for (int trial = 0; trial < 60; ++trial) {
      Word w = random_word(rng, g.rank(), 9);
      CHECK(static_cast<int>(g.canonicalize(w).length()) == oracle::word_length(graph, w));
    }
  }
}

TEST_CASE("distance equals BFS distance inside the ball") {
  for (const auto& graph : test_graphs()) {
    Group g(graph);
    // Geodesics between points of the radius-3 ball stay inside radius 6.
    auto ball = enumerate_ball(g, 6);
    const auto inner = ball.count_within(3);
    int mismatches = 0;
    for (std::uint32_t x = 0; x < inner; ++x) {
      auto bfs = oracle::ball_bfs(ball, x);
      for (std::uint32_t y = 0; y < inner; ++y)
        if (static_cast<int>(g.distance(ball.elements[x], ball.elements[y])) != bfs[y])
          ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("length parity under right multiplication by a generator") {
  std::mt19937_64 rng(11);
  for (const auto& graph : test_graphs()) {
    Group g(graph);
    for (int trial = 0; trial < 2000; ++trial) {
      auto x = g.canonicalize(random_word(rng, g.rank(), 16));
      for (std::size_t s = 0; s < g.rank(); ++s) {
        auto y = g.multiply(x, static_cast<Letter>(s));
        auto diff = static_cast<long>(y.length()) - static_cast<long>(x.length());
        CHECK((diff == 1 || diff == -1));
      }
    }
  }
}

TEST_CASE("ball enumeration") {
  Group tree(graphs::discrete(3));
  auto b3 = enumerate_ball(tree, 3);
  CHECK(b3.sphere_sizes() == std::vector<std::size_t>{1, 3, 6, 12});
  CHECK(b3.elements.front().is_identity());
  CHECK(b3.sphere_sizes() == oracle::sphere_sizes(tree.graph(), 3));

  Group k3(graphs::complete(3));
  auto bk3 = enumerate_ball(k3, 3);
  CHECK(bk3.size() == 8);
  CHECK(bk3.sphere_sizes() == std::vector<std::size_t>{1, 3, 3, 1});

  Group k2(graphs::complete(2));
  CHECK(enumerate_ball(k2, 2).size() == 4);

  for (const auto& graph : test_graphs()) {
    Group g(graph);
    auto ball = enumerate_ball(g, 6);
    CHECK(ball.sphere_sizes() == oracle::sphere_sizes(graph, 6));
    // Adjacency is an involution per generator and never silently wraps.
    for (std::uint32_t i = 0; i < ball.size(); ++i)
      for (std::size_t s = 0; s < g.rank(); ++s) {
        auto j = ball.neighbour(i, static_cast<Letter>(s));
        if (j == BallIndex::kOutside) {
          CHECK(ball.elements[i].length() == 6);
          continue;
        }
        CHECK(ball.neighbour(j, static_cast<Letter>(s)) == i);
        CHECK(ball.elements[j] == g.multiply(ball.elements[i], static_cast<Letter>(s)));
      }
  }

  CHECK_THROWS_AS(enumerate_ball(tree, 10, 100), BudgetExceeded);
  CHECK_THROWS_AS(enumerate_ball(tree, -1), ValidationError);
}

TEST_CASE("free product of three Z/2 has spheres 3 * 2^(n-1)") {
  Group tree(graphs::discrete(3));
  auto sizes = enumerate_ball(tree, 16).sphere_sizes();
  for (std::size_t n = 1; n <= 16; ++n) CHECK(sizes[n] == 3 * (std::size_t{1} << (n - 1)));
}

TEST_CASE("geodesic words and the geodesic oracle") {
  Group tree(graphs::discrete(3));
  auto e = tree.identity();
  CHECK(tree.geodesic_word(e, e).empty());
  auto path = tree.vertex_path(e, tree.geodesic_word(e, tree.parse("a.b")));
  REQUIRE(path.size() == 3);
  CHECK(tree.format(path[1]) == "a");
  CHECK(tree.format(path[2]) == "a.b");
  CHECK(tree.all_geodesics(tree.parse("b.c"), tree.parse("a.b.a")).words.size() == 1);

  Group k2(graphs::complete(2));
  auto two = k2.all_geodesics(k2.identity(), k2.parse("a.b"));
  CHECK(two.words.size() == 2);
  CHECK_FALSE(two.truncated);

  Group p4(graphs::path(4));
  auto ca = p4.parse("c.a");
  CHECK(p4.geodesic_word(p4.identity(), ca).size() == p4.distance(p4.identity(), ca));
  for (const auto& w : p4.all_geodesics(p4.identity(), ca).words)
    CHECK(p4.canonicalize(w) == ca);

  // C4 = D_inf x D_inf; k steps in each factor give binomial(2k, k) interleavings.
  Group c4(graphs::cycle(4));
  const std::size_t binom[] = {1, 2, 6, 20};
  for (int k = 1; k <= 3; ++k) {
    Word w;
    for (int i = 0; i < k; ++i) w.push_back(i % 2 == 0 ? 0 : 2);  // a c a ...
    for (int i = 0; i < k; ++i) w.push_back(i % 2 == 0 ? 1 : 3);  // b d b ...
    auto target = c4.canonicalize(w);
    CHECK(target.length() == static_cast<std::size_t>(2 * k));
    CHECK(c4.all_geodesics(c4.identity(), target).words.size() == binom[k]);
  }

  auto capped = c4.all_geodesics(c4.identity(), c4.parse("a.c.a.b.d.b"), 5);
  CHECK(capped.truncated);
  CHECK(capped.words.size() == 5);
}

TEST_CASE("critical exponent") {
  Group tree(graphs::discrete(3));
  auto ce = critical_exponent_estimate(tree, 14);
  for (int r = 1; r <= 14; ++r)
    CHECK(ce.sequence[r - 1] == doctest::Approx(std::log(3.0 * std::pow(2.0, r) - 2.0) / r));
  CHECK(ce.estimate > std::log(2.0));

  Group k3(graphs::complete(3));
  auto fin = critical_exponent_estimate(k3, 12);
  CHECK(fin.estimate == doctest::Approx(std::log(8.0) / 12));
  CHECK(fin.sequence.back() < fin.sequence.front());

  CHECK_THROWS_AS(critical_exponent_estimate(tree, 1), ValidationError);
}

TEST_CASE("word text format") {
  Group p4(graphs::path(4));
  CHECK(p4.parse("").is_identity());
  CHECK(p4.format(p4.identity()).empty());
  CHECK(p4.parse_word("d.c.b") == Word{3, 2, 1});
  CHECK_THROWS_AS(p4.parse_word("a..b"), ValidationError);
}
