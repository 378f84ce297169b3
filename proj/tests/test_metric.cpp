#include <doctest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "racglab/errors.hpp"
#include "racglab/metric.hpp"

using namespace racglab;

namespace {

FiniteSubset path(const Group& g, std::string_view word, std::string_view start = "") {
  return path_subset(g, g.parse(start), g.parse_word(word));
}

std::vector<oracle::GridPoint> grid_of(const FiniteSubset& s) {
  std::vector<oracle::GridPoint> out;
  for (const auto& p : s) out.push_back(oracle::c4_point(p.word()));
  return out;
}

// All packings of letter-disjoint qualifying intervals, best total length.
std::size_t exhaustive_packing(std::size_t n, const std::vector<std::vector<bool>>& q,
                               std::size_t from = 0) {
  std::size_t best = 0;
  for (std::size_t i = from; i < n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j)
      if (q[i][j]) best = std::max(best, (j - i) + exhaustive_packing(n, q, j));
  return best;
}

// Earliest start of a first segment among optimal packings.
std::size_t exhaustive_first_start(std::size_t n, const std::vector<std::vector<bool>>& q) {
  const auto opt = exhaustive_packing(n, q);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j)
      if (q[i][j] && (j - i) + exhaustive_packing(n, q, j) == opt) return i;
  return n;
}

}  // namespace

TEST_CASE("projection examples") {
  Group tree(graphs::discrete(3));
  auto y = path(tree, "a.b.c.a.b");
  for (const auto& p : y) CHECK(project(tree, p, y) == FiniteSubset{p});

  // Brute-force argmin with BFS distances inside a ball large enough to be exact.
  auto ball = enumerate_ball(tree, 10);
  for (std::uint32_t i = 0; i < ball.count_within(4); ++i) {
    auto proj = project(tree, ball.elements[i], y);
    CHECK(proj.size() == 1);
    auto bfs = oracle::ball_bfs(ball, i);
    int best = 1 << 30;
    for (const auto& p : y) best = std::min(best, bfs[ball.require_rank(p)]);
    for (const auto& p : y)
      CHECK((bfs[ball.require_rank(p)] == best) == (p == proj.front()));
  }

  // C4 flat: projecting the diagonal (k, k) onto the x-axis lands on (k, 0).
  Group c4(graphs::cycle(4));
  auto axis = path(c4, "c.a.c.a.c.a.c.a");
  auto diag = c4.vertex_path(c4.identity(), c4.parse_word("c.b.a.d.c.b.a.d"));
  for (std::size_t k = 0; k < diag.size(); k += 2) {
    auto p = project(c4, diag[k], axis);
    REQUIRE(p.size() == 1);
    auto gp = oracle::c4_point(p.front().word());
    CHECK(gp.x == static_cast<long>(k / 2));
    CHECK(gp.y == 0);
  }
}

TEST_CASE("empirical contraction constant") {
  Group tree(graphs::discrete(3));
  auto y = path(tree, "a.b.c.a.b.c");
  CHECK(empirical_contraction_constant(tree, y, neighbourhood(tree, y, 4)) == 0);
  auto single = make_subset({tree.parse("a.b")});
  CHECK(empirical_contraction_constant(tree, single, neighbourhood(tree, single, 3)) == 0);
  CHECK(is_D_contracting_at_scale(tree, y, 0, 4));

  // C4: a grid axis is not uniformly contracting; the constant grows with the scale.
  Group c4(graphs::cycle(4));
  auto axis = path(c4, "c.a.c.a.c.a.c.a");
  std::vector<std::size_t> seen;
  for (int t : {4, 6, 8}) {
    auto d = empirical_contraction_constant(c4, axis, neighbourhood(c4, axis, t));
    CHECK(static_cast<long>(d) == oracle::grid_contraction(grid_of(axis), t));
    seen.push_back(d);
  }
  CHECK(seen == std::vector<std::size_t>{4, 6, 8});

  auto diag = path(c4, "c.b.a.d.c.b.a.d");
  CHECK_FALSE(is_D_contracting_at_scale(c4, diag, 2, 6));
  CHECK(static_cast<long>(empirical_contraction_constant(c4, diag, neighbourhood(c4, diag, 6))) ==
        oracle::grid_contraction(grid_of(diag), 6));
}

TEST_CASE("projection is coarsely 1-Lipschitz with the empirical constant") {
  std::mt19937_64 rng(17);
  for (auto [graph, word] : {std::pair{graphs::discrete(3), "a.b.c.b.a.c"},
                             std::pair{graphs::path(4), "a.d.a.c.a.d"}}) {
    Group g(graph);
    auto y = path(g, word);
    auto test = neighbourhood(g, y, 3);
    auto d_emp = empirical_contraction_constant(g, y, test);
    std::uniform_int_distribution<std::size_t> pick(0, test.size() - 1);
    int violations = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      const auto& a = test[pick(rng)];
      const auto& b = test[pick(rng)];
      if (g.distance(a, b) > distance_to(g, a, y)) continue;
      auto u = project(g, a, y);
      auto v = project(g, b, y);
      u.insert(u.end(), v.begin(), v.end());
      if (diameter(g, make_subset(u)) > g.distance(a, b) + d_emp) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("every subsegment of a D-contracting segment is 2D-contracting") {
  Group tree(graphs::discrete(3));
  Group p4(graphs::path(4));
  Group c4(graphs::cycle(4));
  struct Case {
    const Group* g;
    const char* word;
    int scale;
  };
  for (const auto& c : {Case{&tree, "a.b.c.a.b", 3}, Case{&p4, "a.d.a.c.a", 3},
                        Case{&c4, "c.a.c.b.a.d", 3}, Case{&c4, "c.b.a.d", 4}}) {
    const Group& g = *c.g;
    auto pts = g.vertex_path(g.identity(), g.parse_word(c.word));
    auto whole = make_subset(pts);
    auto d = empirical_contraction_constant(g, whole, neighbourhood(g, whole, c.scale));
    REQUIRE(is_D_contracting_at_scale(g, whole, d, c.scale));
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i; j < pts.size(); ++j) {
        auto sub = make_subset({pts.begin() + static_cast<long>(i), pts.begin() + static_cast<long>(j) + 1});
        CHECK(is_D_contracting_at_scale(g, sub, 2 * d, c.scale));
      }
  }
}

TEST_CASE("decompose_DL examples") {
  Group tree(graphs::discrete(3));
  auto w = tree.parse_word("a.b.c.a.b.c.a.b.c.a");
  auto dec = decompose_DL(tree, tree.identity(), w, 1, 3, 3);
  REQUIRE(dec.segments.size() == 1);
  CHECK(dec.segments.front() == Interval{0, 10});
  CHECK(dec.contraction_length == 10);
  CHECK(dec.proportion() == 1.0);

  Group c4(graphs::cycle(4));
  auto none = decompose_DL(c4, c4.identity(), c4.parse_word("c.b.a.d.c.b.a.d"), 0, 4, 3);
  CHECK(none.segments.empty());
  CHECK(none.proportion() == 0.0);

  CHECK_THROWS_AS(decompose_DL(tree, tree.identity(), w, 1, 0, 3), ValidationError);
  CHECK_THROWS_AS(decompose_DL(tree, tree.identity(), tree.parse_word("a.a"), 1, 1, 3),
                  ValidationError);

  auto j = dec.to_json();
  CHECK(j["contraction_length"] == 10);
  CHECK(j["segments"][0][1] == 10);
}

TEST_CASE("packing DP matches exhaustive search on random interval sets") {
  std::mt19937_64 rng(99);
  int deviations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng() % 12;
    double density = 0.05 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
    std::bernoulli_distribution coin(density);
    std::vector<std::vector<bool>> q(n + 1, std::vector<bool>(n + 1, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j <= n; ++j) q[i][j] = coin(rng);
    auto packing = optimal_packing(0, n, [&](std::size_t i, std::size_t j) { return q[i][j]; });
    std::size_t total = 0, last_end = 0;
    bool valid = true;
    for (const auto& [b, e] : packing) {
      valid = valid && q[b][e] && b >= last_end;
      last_end = e;
      total += e - b;
    }
    if (!valid || total != exhaustive_packing(n, q)) ++deviations;
    if (!packing.empty() && packing.front().first != exhaustive_first_start(n, q)) ++deviations;
  }
  CHECK(deviations == 0);
}

TEST_CASE("good points") {
  Group tree(graphs::discrete(3));
  auto w = tree.parse_word("a.b.c.a.b.c.a.b");
  auto all = good_points(tree, tree.identity(), w, {1.0, 3, 1, 2, 2});
  CHECK(all.good_indices.size() == w.size() + 1);
  CHECK(good_points(tree, tree.identity(), w, {1.01, 3, 1, 2, 2}).good_indices.empty());

  Group c4(graphs::cycle(4));
  auto diag = c4.parse_word("c.b.a.d.c.b.a.d");
  CHECK(good_points(c4, c4.identity(), diag, {0.5, 3, 2, 4, 6}).good_indices.empty());

  CHECK_THROWS_AS(good_points(tree, tree.identity(), tree.parse_word("a.b"), {0.5, 3, 1, 1, 2}),
                  ValidationError);

  // Raising theta shrinks the good set.
  Group p4(graphs::path(4));
  for (const auto& [g, word] : {std::pair{&p4, "a.d.a.c.a.d.b.d"}, std::pair{&c4, "c.a.c.b.a.d.c"}}) {
    auto ww = g->parse_word(word);
    for (std::size_t l : {1, 2, 3})
      for (std::size_t d : {0, 1, 2}) {
        ContractionTable table(*g, g->identity(), ww, d, l, 2);
        std::vector<std::size_t> prev;
        bool first = true;
        for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
          auto cur = good_points(table, ww, {theta, 2, d, l, 2}).good_indices;
          if (!first) CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
          prev = cur;
          first = false;
        }
      }
  }
}

TEST_CASE("narrow points") {
  Group tree(graphs::discrete(3));
  auto pts = tree.vertex_path(tree.identity(), tree.parse_word("a.b.c.a.b.c"));
  for (std::size_t k = 0; k < pts.size(); ++k) {
    auto y1 = make_subset({pts.begin(), pts.begin() + static_cast<long>(k) + 1});
    auto y2 = make_subset({pts.begin() + static_cast<long>(k), pts.end()});
    CHECK(is_narrow_at(tree, y1, y2, pts[k], 0));
    CHECK(narrow_geodesic_oracle(tree, y1, y2, pts[k], 0));
  }

  Group p4(graphs::path(4));
  auto z = p4.parse("a.d");
  auto around = neighbourhood(p4, make_subset({z}), 2);
  CHECK(is_narrow_at(p4, around, around, z, 4));

  // Two parallel grid lines y = 0 and y = 2 with z between them.
  Group c4(graphs::cycle(4));
  auto low = path(c4, "c.a.c.a.c.a");
  auto high = path(c4, "c.a.c.a.c.a", "d.b");
  auto zc = c4.parse("d");
  CHECK(oracle::c4_point(high.front().word()).y == 2);
  CHECK_FALSE(is_narrow_at(c4, low, high, zc, 0));
  CHECK_FALSE(narrow_geodesic_oracle(c4, low, high, zc, 1));
}

TEST_CASE("geodesic narrowness implies metric narrowness") {
  std::mt19937_64 rng(23);
  int checked = 0, violations = 0;
  for (auto graph : {graphs::discrete(3), graphs::path(4), graphs::cycle(4)}) {
    Group g(graph);
    auto ball = enumerate_ball(g, 4);
    std::uniform_int_distribution<std::size_t> pick(0, ball.size() - 1);
    for (int trial = 0; trial < 150; ++trial) {
      auto y1 = make_subset({ball.elements[pick(rng)], ball.elements[pick(rng)]});
      auto y2 = make_subset({ball.elements[pick(rng)], ball.elements[pick(rng)]});
      const auto& z = ball.elements[pick(rng)];
      for (std::size_t r0 : {0, 1, 2}) {
        if (!narrow_geodesic_oracle(g, y1, y2, z, r0)) continue;
        ++checked;
        if (!is_narrow_at(g, y1, y2, z, 2 * r0)) ++violations;
      }
    }
  }
  CHECK(checked > 50);
  CHECK(violations == 0);
}

TEST_CASE("antipodal pairs") {
  Group tree(graphs::discrete(3));
  auto pts = tree.vertex_path(tree.identity(), tree.parse_word("a.b.c.a.b.c"));
  auto y1 = make_subset({pts.begin(), pts.begin() + 4});
  auto y2 = make_subset({pts.begin() + 3, pts.end()});
  const auto& z = pts[3];
  CHECK(antipodal(tree, pts[0], pts[6], y1, y2, z, 0));

  // Hanging off the ends at depth 2; each is 3 along the geodesic from z.
  auto x = tree.multiply(pts[0], tree.parse("b.c"));
  auto y = tree.multiply(pts[6], tree.parse("b.c"));
  CHECK(tree.distance(x, pts[0]) == 2);
  CHECK(antipodal(tree, x, y, y1, y2, z, 1));
  CHECK_FALSE(antipodal(tree, x, y, y1, y2, z, 0.5));
  // Swapped parts: projections land in the wrong half.
  CHECK_FALSE(antipodal(tree, y, x, y1, y2, z, 10));
  // A point hanging off the Y2 side projects into Y2 only.
  auto off = tree.multiply(pts[4], tree.parse("c"));
  CHECK(project(tree, off, make_subset(pts)) == FiniteSubset{pts[4]});
  CHECK_FALSE(antipodal(tree, off, y, y1, y2, z, 10));

  CHECK_THROWS_AS(antipodal(tree, x, y, y1, y2, tree.parse("c"), 1), ValidationError);
}

TEST_CASE("barriers") {
  Group tree(graphs::discrete(3));
  auto f = tree.parse("a.b");
  auto axis = tree.vertex_path(tree.identity(), tree.parse_word("a.b.a.b.a.b"));
  auto search = enumerate_ball(tree, 8);
  auto bars = barriers(tree, axis, f, 0, search);
  for (int k = 0; k < 3; ++k) {
    auto h = tree.power(f, k);
    CHECK(std::find(bars.begin(), bars.end(), h) != bars.end());
  }
  // At r = 0 a barrier is an exact sub-path reading f.
  for (const auto& h : bars) {
    CHECK(std::find(axis.begin(), axis.end(), h) != axis.end());
    CHECK(std::find(axis.begin(), axis.end(), tree.multiply(h, f)) != axis.end());
  }
  CHECK(barriers(tree, axis, tree.parse("c"), 0, search).empty());
  CHECK_THROWS_AS(barriers(tree, axis, f, 3, search), ValidationError);

  Group p4(graphs::path(4));
  auto g = p4.parse("a.d");
  auto p4_axis = p4.vertex_path(p4.identity(), p4.parse_word("a.d.a.d.a.d.a.d"));
  auto p4_bars = barriers(p4, p4_axis, g, 2, enumerate_ball(p4, 10));
  for (int k = 0; k < 4; ++k) {
    auto anchor = p4.power(g, k);
    bool near = std::any_of(p4_bars.begin(), p4_bars.end(),
                            [&](const GroupElement& h) { return p4.distance(h, anchor) <= 2; });
    CHECK(near);
  }
}

TEST_CASE("admissible sequences") {
  Group tree(graphs::discrete(3));
  std::string word;
  for (int i = 0; i < 36; ++i) word += std::string(i ? "." : "") + "abc"[i % 3];
  auto pts = tree.vertex_path(tree.identity(), tree.parse_word(word));
  auto seg = [&](std::size_t i, std::size_t j) {
    return make_subset({pts.begin() + static_cast<long>(i), pts.begin() + static_cast<long>(j) + 1});
  };
  CHECK(validate_admissible(tree, {seg(0, 12), seg(12, 24), seg(24, 36)}, 1, 1, 2).empty());
  CHECK(validate_admissible(tree, {seg(0, 36)}, 1, 1, 2).empty());

  auto overlap = validate_admissible(tree, {seg(0, 12), seg(4, 16), seg(16, 28)}, 1, 1, 2);
  CHECK(std::any_of(overlap.begin(), overlap.end(),
                    [](const std::string& v) { return v.rfind("condition 4", 0) == 0; }));

  auto gap = validate_admissible(tree, {seg(0, 8), seg(8, 10), seg(10, 15), seg(15, 20), seg(20, 30)}, 1, 1, 2);
  CHECK(std::any_of(gap.begin(), gap.end(),
                    [](const std::string& v) { return v.rfind("condition 3", 0) == 0; }));

  auto apart = validate_admissible(tree, {seg(0, 10), seg(12, 20), seg(20, 30)}, 1, 1, 2);
  CHECK(std::any_of(apart.begin(), apart.end(),
                    [](const std::string& v) { return v.rfind("condition 2", 0) == 0; }));

  Group c4(graphs::cycle(4));
  auto diag = path(c4, "c.b.a.d.c.b.a.d");
  auto flat = validate_admissible(c4, {diag}, 1, 1, 6);
  REQUIRE(flat.size() == 1);
  CHECK(flat.front().rfind("condition 1", 0) == 0);

  CHECK_THROWS_AS(validate_admissible(tree, {seg(0, 3), seg(3, 6)}, 1, 1, 2), ValidationError);
}
