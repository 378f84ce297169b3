#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "racglab/errors.hpp"
#include "racglab/walk.hpp"

using namespace racglab;

namespace {

Domain ball_domain(const Group& g, int radius) {
  return Domain(std::make_shared<const BallIndex>(enumerate_ball(g, radius)));
}

// p_n(x, y) for the uniform walk by listing all k^n words: no DP, no ball.
std::vector<double> brute_return_terms(const Group& g, const GroupElement& x, const GroupElement& y,
                                       int n_max) {
  std::vector<double> out;
  const auto k = g.rank();
  for (int n = 0; n <= n_max; ++n) {
    std::size_t total = 1, hits = 0;
    for (int i = 0; i < n; ++i) total *= k;
    Word w(static_cast<std::size_t>(n));
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t c = code;
      for (auto& s : w) {
        s = static_cast<Letter>(c % k);
        c /= k;
      }
      if (g.multiply(x, g.canonicalize(w)) == y) ++hits;
    }
    out.push_back(static_cast<double>(hits) / static_cast<double>(total));
  }
  return out;
}

// Number of length-n Cayley paths from src to every rank, all vertices inside the ball.
std::vector<std::vector<double>> path_counts(const BallIndex& ball, std::uint32_t src, int n_max) {
  std::vector<std::vector<double>> out;
  std::vector<double> cur(ball.size(), 0.0);
  cur[src] = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    out.push_back(cur);
    std::vector<double> next(ball.size(), 0.0);
    for (std::uint32_t r = 0; r < ball.size(); ++r)
      for (std::size_t s = 0; s < ball.generators(); ++s) {
        auto nb = ball.neighbour(r, static_cast<Letter>(s));
        if (nb != BallIndex::kOutside) next[nb] += cur[r];
      }
    cur = std::move(next);
  }
  return out;
}

}  // namespace

TEST_CASE("measure specs") {
  auto p4 = graphs::path(4);
  auto mu = MeasureSpec::uniform(p4);
  CHECK(mu.weights.size() == 4);
  CHECK(mu.weights[2] == 0.25);
  CHECK(MeasureSpec::uniform(p4, 0.2).holding == 0.2);
  CHECK_THROWS_AS(MeasureSpec::uniform(p4, 1.0), ValidationError);

  auto parsed = MeasureSpec::parse(
      p4, R"({"weights":{"a":0.1,"b":0.2,"c":0.3,"d":0.2},"holding":0.2})");
  CHECK(parsed.weights[2] == 0.3);
  CHECK(parsed.holding == 0.2);

  CHECK_THROWS_AS(MeasureSpec::parse(p4, R"({"weights":{"a":0.5,"b":0.5,"c":0.0,"d":0.0}})"),
                  ValidationError);
  CHECK_THROWS_AS(MeasureSpec::parse(p4, R"({"weights":{"a":0.5,"b":0.5}})"), ValidationError);
  CHECK_THROWS_AS(MeasureSpec::parse(p4, R"({"weights":{"a":0.3,"b":0.3,"c":0.3,"d":0.3}})"),
                  ValidationError);
  CHECK_THROWS_AS(MeasureSpec::parse(p4, R"({"weights":{"a":0.25,"b":0.25,"c":0.25,"z":0.25}})"),
                  ValidationError);
  CHECK_THROWS_AS(MeasureSpec::parse(p4, "[1,2"), ValidationError);

  auto tree = MeasureSpec::uniform(graphs::discrete(3));
  for (const auto& q : tree.rational_weights()) CHECK(q == mpq_class(1, 3));
  CHECK(MeasureSpec::uniform(p4, 0.2).rational_holding() == mpq_class(1, 5));
}

TEST_CASE("restricted Green function: small cases against word enumeration") {
  Group tree(graphs::discrete(3));
  auto dom = ball_domain(tree, 10);
  auto mu = MeasureSpec::uniform(tree.graph());
  auto e = tree.identity();
  CHECK(restricted_green(e, e, dom, mu, 0).value == 1.0);
  CHECK(restricted_green(e, tree.parse("a"), dom, mu, 1).value == doctest::Approx(1.0 / 3));

  Group p4(graphs::path(4));
  auto p4dom = ball_domain(p4, 10);
  auto p4mu = MeasureSpec::uniform(p4.graph());
  for (const char* target : {"", "a", "a.c", "b.d", "a.b"}) {
    auto y = p4.parse(target);
    auto series = green_series(p4.identity(), y, p4dom, p4mu, 8);
    auto brute = brute_return_terms(p4, p4.identity(), y, 8);
    for (int n = 0; n <= 8; ++n) CHECK(series[n] == doctest::Approx(brute[n]).epsilon(1e-12));
    auto exact = green_series_exact(p4.identity(), y, p4dom, p4mu, 8);
    for (int n = 0; n <= 8; ++n) CHECK(exact[n].get_d() == doctest::Approx(brute[n]).epsilon(1e-15));
  }
}

TEST_CASE("tree Green function closed form") {
  Group tree(graphs::discrete(3));
  auto dom = ball_domain(tree, 16);
  GreenSolver solver(dom, MeasureSpec::uniform(tree.graph()), 500);
  auto e = tree.identity();
  auto gee = solver.value(e, e);
  CHECK(std::abs(gee.value - 2.0) < 1e-3);
  CHECK(std::abs(solver.green(e, tree.parse("a")) - 1.0) < 1e-3);
  CHECK(std::abs(solver.green(e, tree.parse("a.b.c")) - 0.25) < 1e-3);
  CHECK(gee.last_term < 1e-10);
  CHECK(gee.tail_ratio > 0.9);
  CHECK(gee.tail_ratio < 1.0);
  CHECK(gee.n_max == 500);
  CHECK(gee.to_json(tree)["domain"]["radius"] == 16);
}

TEST_CASE("restricted Green function is symmetric and monotone") {
  Group p4(graphs::path(4));
  auto base = ball_domain(p4, 8);
  auto mu = MeasureSpec::uniform(p4.graph());
  auto dom = base;
  dom.forbid(p4.parse("b")).forbid(p4.parse("a.d"));
  GreenSolver small(dom, mu, 60), large(base, mu, 60), longer(base, mu, 120);
  std::mt19937_64 rng(1);
  const auto& ball = base.ball();
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(ball.count_within(3) - 1));
  for (int trial = 0; trial < 60; ++trial) {
    const auto& x = ball.elements[pick(rng)];
    const auto& y = ball.elements[pick(rng)];
    CHECK(small.green(x, y) == doctest::Approx(small.green(y, x)).epsilon(1e-12));
    CHECK(small.green(x, y) <= large.green(x, y) + 1e-12);
    CHECK(large.green(x, y) <= longer.green(x, y) + 1e-12);
  }
  CHECK(small.cached_rows() <= 120);
}

TEST_CASE("the starting point is never masked") {
  Group tree(graphs::discrete(3));
  auto dom = ball_domain(tree, 6);
  auto a = tree.parse("a");
  dom.forbid(a);
  auto mu = MeasureSpec::uniform(tree.graph());
  // A forbidden start or end is fine; only interior visits are excluded.
  CHECK(restricted_green(a, tree.identity(), dom, mu, 1).value == doctest::Approx(1.0 / 3));
  CHECK(restricted_green(a, tree.parse("a.b"), dom, mu, 1).value == doctest::Approx(1.0 / 3));
  // Returns to a are first returns: from a the walk goes to e or a.x and must
  // come straight back, so G(a,a) = 1 / (1 - F) with F < 1.
  auto gaa = restricted_green(a, a, dom, mu, 200).value;
  CHECK(gaa > 1.0);
  CHECK(gaa < 3.0);
  CHECK(restricted_green(tree.identity(), tree.parse("a.b"), dom, mu, 40).value == 0.0);
}

TEST_CASE("mass conservation") {
  for (auto graph : {graphs::discrete(3), graphs::path(4), graphs::cycle(5)}) {
    Group g(graph);
    auto dom = ball_domain(g, 6);
    auto mu = MeasureSpec::uniform(graph, 0.1);
    CHECK(mass_conservation_defect(g.identity(), dom, mu, 80) < 1e-12);
    dom.forbid_ball(g.generator(1), 1);
    CHECK(mass_conservation_defect(g.generator(0), dom, mu, 80) < 1e-12);
  }
}

TEST_CASE("per-length mass equals path count times k^-n for uniform measures") {
  for (auto graph : {graphs::discrete(3), graphs::path(4)}) {
    Group g(graph);
    auto dom = ball_domain(g, 6);
    auto mu = MeasureSpec::uniform(graph);
    auto counts = path_counts(dom.ball(), 0, 12);
    const double k = static_cast<double>(g.rank());
    for (std::uint32_t y = 0; y < dom.ball().count_within(3); ++y) {
      auto series = green_series(g.identity(), dom.ball().elements[y], dom, mu, 12);
      for (int n = 0; n <= 12; ++n)
        CHECK(series[n] == doctest::Approx(counts[n][y] * std::pow(k, -n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("first-visit splitting identity") {
  Group tree(graphs::discrete(3));
  auto dom = ball_domain(tree, 8);
  auto mu = MeasureSpec::uniform(tree.graph());
  CHECK(green_identity_check_exact(tree.parse("a.b"), tree.parse("a"), dom, mu, 40) == 0);
  CHECK(green_identity_check(tree.parse("a"), tree.parse("a"), dom, mu, 40) < 1e-15);

  Group p4(graphs::path(4));
  auto pdom = ball_domain(p4, 8);
  auto pmu = MeasureSpec::uniform(p4.graph());
  std::mt19937_64 rng(8);
  const auto& ball = pdom.ball();
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(ball.count_within(3) - 1));
  int checked = 0;
  while (checked < 20) {
    const auto& x = ball.elements[pick(rng)];
    const auto& z = ball.elements[pick(rng)];
    if (p4.distance(x, z) > 4) continue;
    ++checked;
    CHECK(green_identity_check(x, z, pdom, pmu, 120) <= 1e-12);
  }
  CHECK(green_identity_check_exact(p4.parse("a.c"), p4.parse("b"), pdom, pmu, 24) == 0);
}

TEST_CASE("Monte Carlo Green estimates") {
  Group tree(graphs::discrete(3));
  auto mu = MeasureSpec::uniform(tree.graph());
  auto e = tree.identity();
  auto trivial = mc_green(tree, e, e, mu, 0, 100, 1);
  CHECK(trivial.estimate == 1.0);
  CHECK(trivial.half_width == 0.0);
  CHECK_THROWS_AS(mc_green(tree, e, e, mu, 10, 99, 1), ValidationError);

  auto big = mc_green(tree, e, e, mu, 400, 100000, 12345, 2);
  CHECK(std::abs(big.estimate - 2.0) <= big.half_width);
  auto same = mc_green(tree, e, e, mu, 400, 100000, 12345, 1);
  CHECK(same.estimate == big.estimate);
  CHECK(same.half_width == big.half_width);

  // Cross-check against the exact DP. Leaving radius 12 from within radius 2
  // and returning within radius 2 takes more than 20 steps, so the ball is exact.
  Group p4(graphs::path(4));
  auto pmu = MeasureSpec::uniform(p4.graph());
  GreenSolver solver(ball_domain(p4, 12), pmu, 20);
  const auto& ball = solver.domain().ball();
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(ball.count_within(2) - 1));
  int outside = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const auto& x = ball.elements[pick(rng)];
    const auto& y = ball.elements[pick(rng)];
    auto mc = mc_green(p4, x, y, pmu, 20, 4000, 1000 + pair);
    if (std::abs(mc.estimate - solver.green(x, y)) > 3 * mc.half_width + 1e-12) ++outside;
  }
  CHECK(outside == 0);
}

TEST_CASE("counter RNG streams are reproducible") {
  CounterRng a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 5; ++i) {
    auto va = a.next();
    CHECK(va == b.next());
    CHECK(va != c.next());
  }
  CounterRng u(1, 0);
  double mean = 0;
  for (int i = 0; i < 100000; ++i) {
    double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
    mean += v;
  }
  CHECK(mean / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("spectral radius lower bounds") {
  Group tree(graphs::discrete(3));
  auto dom = ball_domain(tree, 16);
  auto r = spectral_radius_lower(MeasureSpec::uniform(tree.graph()), dom, 50);
  REQUIRE(r.size() == 50);
  for (std::size_t n = 1; n < r.size(); ++n) CHECK(r[n] >= r[n - 1] - 1e-12);
  CHECK(r.front() == doctest::Approx(std::sqrt(1.0 / 3)));
  CHECK(r.back() < 2 * std::sqrt(2.0) / 3);
  CHECK(r.back() > 0.89);

  Group k3(graphs::complete(3));
  auto fin = spectral_radius_lower(MeasureSpec::uniform(k3.graph()), ball_domain(k3, 3), 50);
  for (std::size_t n = 1; n < fin.size(); ++n) CHECK(fin[n] >= fin[n - 1] - 1e-12);
  // (Z/2)^3: p_2n(e,e) -> 1/4, so r_50 = 4^(-1/100).
  CHECK(fin.back() == doctest::Approx(std::pow(0.25, 0.01)).epsilon(1e-9));
}

TEST_CASE("Martin kernels on the tree") {
  Group tree(graphs::discrete(3));
  GreenSolver solver(ball_domain(tree, 14), MeasureSpec::uniform(tree.graph()), 300);
  auto e = tree.identity();
  auto y = tree.parse("a.b.c.a.b.c.a.b");
  CHECK(martin_kernel(solver, e, y) == 1.0);
  auto path = tree.vertex_path(e, y.word());
  for (const auto& x : path) {
    const double expect = std::pow(2.0, static_cast<double>(x.length()));
    const double k = martin_kernel(solver, x, y);
    // Excursions toward the ball boundary bias far points; the error is relative.
    if (x.length() <= 4) CHECK(std::abs(k - expect) < 1e-2);
    CHECK(std::abs(k / expect - 1.0) < 1e-2);
  }
  auto x = tree.parse("c.b");
  CHECK(martin_kernel(solver, x, e) == doctest::Approx(solver.green(x, e) / solver.green(e, e)));

  auto ab = tree.parse("a.b");
  auto along = kernel_series_along(solver, ab, tree.parse("a"), 6);
  CHECK(std::abs(along.values.back() - 2.0) < 1e-2);
  CHECK(along.differences.size() == 5);
  auto off = kernel_series_along(solver, ab, tree.parse("c"), 6);
  CHECK(std::abs(off.values.back() - 0.5) < 1e-2);
  for (double v : kernel_series_along(solver, ab, e, 6).values) CHECK(v == 1.0);
  CHECK_THROWS_AS(kernel_series_along(solver, ab, e, 8), ValidationError);  // (ab)^8 has length 16

  GreenSolver shallow(ball_domain(tree, 12), MeasureSpec::uniform(tree.graph()), 2);
  CHECK_THROWS_AS(martin_kernel(shallow, e, y), BudgetExceeded);
}

TEST_CASE("Ancona ratios") {
  Group tree(graphs::discrete(3));
  GreenSolver solver(ball_domain(tree, 14), MeasureSpec::uniform(tree.graph()), 300);
  auto x = tree.parse("c.b");
  auto y = tree.parse("a.b.c");
  CHECK(ancona_ratio(solver, x, x, y) == 1.0);
  auto path = tree.vertex_path(x, tree.geodesic_word(x, y));
  for (const auto& z : path) CHECK(std::abs(ancona_ratio(solver, x, z, y) - 1.0) < 5e-3);

  Group p4(graphs::path(4));
  GreenSolver p4s(ball_domain(p4, 8), MeasureSpec::uniform(p4.graph()), 400);
  const auto& ball = p4s.domain().ball();
  std::mt19937_64 rng(5);
  // Sources come from a small pool so that every Green value reuses a cached row.
  std::uniform_int_distribution<std::uint32_t> pool(0, 20);
  std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(ball.count_within(4) - 1));
  double worst = 2.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& a = ball.elements[pool(rng)];
    const auto& z = ball.elements[pool(rng)];
    const auto& b = ball.elements[any(rng)];
    worst = std::min(worst, ancona_ratio(p4s, a, z, b));
  }
  CHECK(worst >= 1 - 1e-9);
}

TEST_CASE("deviation ratios") {
  Group tree(graphs::discrete(3));
  GreenSolver solver(ball_domain(tree, 10), MeasureSpec::uniform(tree.graph()), 200);
  auto x = tree.parse("c");
  auto y = tree.parse("a.b");
  CHECK(deviation_ratio(x, y, tree.parse("a"), 0, solver) == 0.0);
  CHECK(deviation_ratio(x, y, tree.identity(), 10, solver) == 0.0);
  CHECK(deviation_ratio(x, tree.identity(), x, 20, solver) > 0.0);  // one-step trajectory survives

  Group p4(graphs::path(4));
  GreenSolver p4s(ball_domain(p4, 8), MeasureSpec::uniform(p4.graph()), 200);
  auto px = p4.parse("a.d");
  auto py = p4.parse("d.a.d.a");
  auto pz = p4.parse("d");
  double prev = 1.0 + 1e-12;
  for (std::size_t r = 0; r <= 4; ++r) {
    double v = deviation_ratio(px, py, pz, r, p4s);
    CHECK(v <= prev + 1e-12);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("thread count does not change Green values") {
  Group c5(graphs::cycle(5));
  auto dom = ball_domain(c5, 7);
  auto mu = MeasureSpec::uniform(c5.graph());
  GreenSolver one(dom, mu, 50, 1), four(dom, mu, 50, 4);
  auto x = c5.parse("a.c");
  CHECK(one.row(x).value == four.row(x).value);
}

TEST_CASE("Harnack-type neighbour ratios are bounded and stable") {
  Group p4(graphs::path(4));
  auto mu = MeasureSpec::uniform(p4.graph());
  std::vector<double> maxima;
  for (int radius : {8, 10}) {
    GreenSolver solver(ball_domain(p4, radius), mu, 300);
    const auto& ball = solver.domain().ball();
    auto y = p4.identity();
    auto z = p4.parse("a");
    double worst = 0.0;
    for (std::uint32_t i = 0; i < ball.count_within(4); ++i)
      worst = std::max(worst, solver.green(y, ball.elements[i]) / solver.green(z, ball.elements[i]));
    CHECK(worst <= 4.0 + 1e-9);  // one step of mass 1/4 links the two
    maxima.push_back(worst);
  }
  CHECK(maxima[0] == doctest::Approx(maxima[1]).epsilon(0.02));
}
