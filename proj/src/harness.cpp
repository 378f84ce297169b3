#include "racglab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include "racglab/errors.hpp"
#include "racglab/metric.hpp"
#include "racglab/walls.hpp"

namespace racglab {

namespace {

using nlohmann::json;

const std::vector<std::pair<ExperimentKind, std::string>>& kind_table() {
  static const std::vector<std::pair<ExperimentKind, std::string>> t = {
      {ExperimentKind::MorseAxis, "morse-axis"}, {ExperimentKind::Barrier, "barrier"},
      {ExperimentKind::Antipodal, "antipodal"},  {ExperimentKind::Deviation, "deviation"},
      {ExperimentKind::Martin, "martin"},        {ExperimentKind::Control, "control"}};
  return t;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool infinite_order(const Group& group, const GroupElement& g) {
  return !group.power(g, 2).is_identity();
}

GroupElement parse_element(const Group& group, const std::string& text, const char* what) {
  try {
    return group.parse(text);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

bool in_ball(const BallIndex& ball, const GroupElement& g) { return ball.rank_of(g).has_value(); }

auto spec_key(const TripleSpec& s) { return std::tie(s.role, s.offset, s.x, s.z, s.y); }

void sort_specs(std::vector<TripleSpec>& specs) {
  std::sort(specs.begin(), specs.end(),
            [](const TripleSpec& a, const TripleSpec& b) { return spec_key(a) < spec_key(b); });
  specs.erase(std::unique(specs.begin(), specs.end(),
                          [](const TripleSpec& a, const TripleSpec& b) {
                            return spec_key(a) == spec_key(b);
                          }),
              specs.end());
}

void shuffle(std::vector<std::size_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next() % i]);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Diagnostics {
  double last = 0.0, tail = 0.0;
  void add(const GreenValue& v) {
    if (v.value > 0.0) last = std::max(last, v.last_term / v.value);
    tail = std::max(tail, v.tail_ratio);
  }
};

TripleRecord blank_record(const Group& group, const TripleSpec& s) {
  TripleRecord r;
  r.x = group.format(s.x);
  r.z = group.format(s.z);
  r.y = group.format(s.y);
  r.dxz = group.distance(s.x, s.z);
  r.dzy = group.distance(s.z, s.y);
  r.role = s.role;
  r.offset = s.offset;
  return r;
}

// Greedy push away from the path: the earliest generator that raises d(., path)
// and stays in the ball.
std::optional<GroupElement> push_off(const Group& group, const BallIndex& ball,
                                     const FiniteSubset& path, const GroupElement& z, int t) {
  GroupElement cur = z;
  std::size_t dist = distance_to(group, cur, path);
  for (int step = 0; step < t; ++step) {
    bool moved = false;
    for (Letter s = 0; s < group.rank() && !moved; ++s) {
      auto next = group.multiply(cur, s);
      if (!in_ball(ball, next)) continue;
      if (distance_to(group, next, path) == dist + 1) {
        cur = next;
        ++dist;
        moved = true;
      }
    }
    if (!moved) return std::nullopt;
  }
  return cur;
}

struct BarrierTriples {
  std::vector<TripleSpec> specs;
  std::vector<FiniteSubset> paths;  // parallel to specs
  json notes = json::object();
};

BarrierTriples collect_barrier_triples(Workspace& ws, const ExperimentConfig& cfg) {
  const Group& group = ws.group();
  const BallIndex& ball = ws.ball();
  const auto e = group.identity();
  BarrierTriples out;
  const bool local = cfg.barrier_mode == "local";

  GroupElement f;
  std::size_t margin = 1;
  if (!local) {
    auto v = group.graph().index_of(cfg.wall);
    if (!v) throw ValidationError("wall generator '" + cfg.wall + "' is not a vertex");
    if (!(morse_walls(group.graph()) & vertex_bit(*v)))
      throw ValidationError("the wall of '" + cfg.wall + "' is not Morse");
    const auto wall = wall_of_edge(group, e, static_cast<Letter>(*v));
    GroupElement g;
    if (cfg.element.empty()) {
      g = find_skewering_element(group, static_cast<Letter>(*v));
    } else {
      g = parse_element(group, cfg.element, "element");
      if (!infinite_order(group, g)) throw ValidationError("element has finite order");
      if (!skewers(group, g, wall, 4))
        throw ValidationError("'" + cfg.element + "' does not skewer the wall of " + cfg.wall);
    }
    f = group.power(g, cfg.power);
    margin = f.length() + 2 * cfg.r;
    out.notes["skewering_element"] = group.format(g);
    out.notes["f"] = group.format(f);
  }
  out.notes["barrier_mode"] = cfg.barrier_mode;
  out.notes["margin"] = margin;

  std::size_t geodesics = 0, without = 0;
  for (const auto& y : ball.elements) {
    const std::size_t n = y.length();
    if (n < cfg.min_length || n > cfg.max_length) continue;
    if (n + cfg.r > static_cast<std::size_t>(ball.radius)) continue;
    auto points = group.vertex_path(e, y.word());
    auto path = make_subset(points);
    ++geodesics;
    std::size_t found = 0;
    auto add = [&](const GroupElement& h) {
      out.specs.push_back({e, h, y, "barrier", 0});
      out.paths.push_back(path);
      ++found;
    };
    if (local) {
      for (std::size_t p = 1; p < n; ++p) add(points[p]);
    } else {
      for (const auto& h : barriers(group, points, f, cfg.r, ball)) {
        std::size_t best = SIZE_MAX, p = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          auto d = group.distance(h, points[i]);
          if (d < best) best = d, p = i;
        }
        if (p >= margin && p + margin <= n) add(h);
      }
    }
    if (found == 0) ++without;
  }
  out.notes["geodesics"] = geodesics;
  out.notes["geodesics_without_barrier"] = without;
  if (out.specs.empty()) out.notes["warning"] = "no barrier found";
  return out;
}

// Keeps specs and their paths aligned through sampling.
BarrierTriples sample_barriers(const Group& group, BarrierTriples all, std::size_t max,
                               std::uint64_t seed) {
  std::map<std::tuple<GroupElement, GroupElement, GroupElement>, std::size_t> where;
  for (std::size_t i = 0; i < all.specs.size(); ++i)
    where.emplace(std::make_tuple(all.specs[i].x, all.specs[i].z, all.specs[i].y), i);
  auto picked = stratified_sample(group, all.specs, max, seed);
  BarrierTriples out;
  out.notes = all.notes;
  out.notes["candidates"] = all.specs.size();
  for (auto& s : picked) {
    out.paths.push_back(all.paths[where.at(std::make_tuple(s.x, s.z, s.y))]);
    out.specs.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  for (const auto& [k, name] : kind_table())
    if (k == kind) return name;
  return "?";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& [k, n] : kind_table())
    if (n == name) return k;
  throw ValidationError("unknown experiment kind '" + std::string(name) + "'");
}

json ExperimentConfig::to_json() const {
  return json{{"graph_file", graph_file},
              {"measure_file", measure_file},
              {"output", output},
              {"kind", kind_name(kind)},
              {"element", element},
              {"wall", wall},
              {"barrier_mode", barrier_mode},
              {"mode", mode},
              {"geodesic", geodesic},
              {"split", split},
              {"narrow_s", narrow_s},
              {"k", k},
              {"r", r},
              {"power", power},
              {"d", d},
              {"l", l},
              {"good_r", good_r},
              {"theta", theta},
              {"scale", scale},
              {"min_length", min_length},
              {"max_length", max_length},
              {"offsets", offsets},
              {"deviation_offset", deviation_offset},
              {"max_r", max_r},
              {"base_points", base_points},
              {"n_max", n_max},
              {"radius", radius},
              {"steps", steps},
              {"lazy", lazy},
              {"max_triples", max_triples},
              {"max_sources", max_sources},
              {"seed", seed},
              {"threads", threads}};
}

void ExperimentConfig::apply(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  std::map<std::string, std::function<void(const json&)>> set = {
      {"graph_file", [&](const json& v) { graph_file = v.get<std::string>(); }},
      {"measure_file", [&](const json& v) { measure_file = v.get<std::string>(); }},
      {"output", [&](const json& v) { output = v.get<std::string>(); }},
      {"kind", [&](const json& v) { kind = parse_kind(v.get<std::string>()); }},
      {"element", [&](const json& v) { element = v.get<std::string>(); }},
      {"wall", [&](const json& v) { wall = v.get<std::string>(); }},
      {"barrier_mode", [&](const json& v) { barrier_mode = v.get<std::string>(); }},
      {"mode", [&](const json& v) { mode = v.get<std::string>(); }},
      {"geodesic", [&](const json& v) { geodesic = v.get<std::string>(); }},
      {"split", [&](const json& v) { split = v.get<std::size_t>(); }},
      {"narrow_s", [&](const json& v) { narrow_s = v.get<std::size_t>(); }},
      {"k", [&](const json& v) { k = v.get<double>(); }},
      {"r", [&](const json& v) { r = v.get<std::size_t>(); }},
      {"power", [&](const json& v) { power = v.get<int>(); }},
      {"d", [&](const json& v) { d = v.get<std::size_t>(); }},
      {"l", [&](const json& v) { l = v.get<std::size_t>(); }},
      {"good_r", [&](const json& v) { good_r = v.get<std::size_t>(); }},
      {"theta", [&](const json& v) { theta = v.get<double>(); }},
      {"scale", [&](const json& v) { scale = v.get<int>(); }},
      {"min_length", [&](const json& v) { min_length = v.get<std::size_t>(); }},
      {"max_length", [&](const json& v) { max_length = v.get<std::size_t>(); }},
      {"offsets", [&](const json& v) { offsets = v.get<int>(); }},
      {"deviation_offset", [&](const json& v) { deviation_offset = v.get<int>(); }},
      {"max_r", [&](const json& v) { max_r = v.get<int>(); }},
      {"base_points", [&](const json& v) { base_points = v.get<std::vector<std::string>>(); }},
      {"n_max", [&](const json& v) { n_max = v.get<int>(); }},
      {"radius", [&](const json& v) { radius = v.get<int>(); }},
      {"steps", [&](const json& v) { steps = v.get<int>(); }},
      {"lazy", [&](const json& v) { lazy = v.get<double>(); }},
      {"max_triples", [&](const json& v) { max_triples = v.get<std::size_t>(); }},
      {"max_sources", [&](const json& v) { max_sources = v.get<std::size_t>(); }},
      {"seed", [&](const json& v) { seed = v.get<std::uint64_t>(); }},
      {"threads", [&](const json& v) { threads = v.get<unsigned>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = set.find(key);
    if (it == set.end()) throw ValidationError("unknown config key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.apply(j);
  return cfg;
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
  };
  need(radius >= 1, "radius must be positive");
  need(steps >= 1, "steps must be positive");
  need(max_length >= min_length, "max_length must be at least min_length");
  need(max_triples >= 1 && max_sources >= 1, "max_triples and max_sources must be positive");
  need(k >= 0.0, "k must be non-negative");
  need(theta > 0.0 && theta <= 1.0, "theta must lie in (0, 1]");
  need(l >= 1 && good_r >= 1, "l and good_r must be positive");
  need(scale >= 0, "scale must be non-negative");
  need(power >= 1, "power must be positive");
  need(lazy >= 0.0 && lazy < 1.0, "lazy must lie in [0, 1)");
  need(threads >= 1, "threads must be positive");
  need(n_max >= 2, "n_max must be at least 2");
  need(offsets >= 0 && deviation_offset >= 0, "offsets must be non-negative");
  need(mode == "narrow" || mode == "goodpoint", "mode must be narrow or goodpoint");
  need(barrier_mode == "skewer" || barrier_mode == "local", "barrier_mode must be skewer or local");
}

Workspace::Workspace(const DefiningGraph& graph, MeasureSpec mu, int radius, int steps,
                     unsigned threads) {
  if (radius < 1) throw ValidationError("radius must be positive");
  ball_ = std::make_shared<const BallIndex>(enumerate_ball(Group(graph), radius));
  solver_ = std::make_unique<GreenSolver>(Domain(ball_), std::move(mu), steps, threads);
}

std::vector<TripleRecord> evaluate_triples(Workspace& ws, std::vector<TripleSpec> specs) {
  const Group& group = ws.group();
  GreenSolver& solver = ws.solver();
  for (const auto& s : specs) {
    ws.ball().require_rank(s.x);
    ws.ball().require_rank(s.z);
    ws.ball().require_rank(s.y);
  }
  sort_specs(specs);

  std::set<GroupElement> sources;
  for (const auto& s : specs) sources.insert(s.x), sources.insert(s.z);
  const std::size_t row_bytes = ws.ball().size() * 5 * sizeof(double);
  const std::size_t max_rows = std::max<std::size_t>(2, (std::size_t{256} << 20) / row_bytes);
  const bool evict = sources.size() > max_rows;

  std::vector<std::size_t> order(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(specs[a].z, specs[a].x) < std::tie(specs[b].z, specs[b].x);
  });

  std::vector<TripleRecord> out(specs.size());
  std::vector<GroupElement> live;
  for (std::size_t idx : order) {
    const auto& s = specs[idx];
    if (evict) {
      for (const auto& g : live)
        if (g != s.x && g != s.z) solver.drop_row(g);
      live = {s.x, s.z};
    }
    Diagnostics diag;
    auto zz = solver.value(s.z, s.z);
    auto xz = solver.value(s.x, s.z);
    auto zy = solver.value(s.z, s.y);
    auto xy = solver.value(s.x, s.y);
    for (const auto* v : {&zz, &xz, &zy, &xy}) diag.add(*v);
    auto rec = blank_record(group, s);
    rec.ratio = ancona_ratio(solver, s.x, s.z, s.y);
    rec.n_max = solver.steps();
    rec.last_term = diag.last;
    rec.tail_ratio = diag.tail;
    out[idx] = std::move(rec);
  }
  if (evict)
    for (const auto& g : live) solver.drop_row(g);
  return out;
}

std::vector<TripleSpec> stratified_sample(const Group& group, std::vector<TripleSpec> candidates,
                                          std::size_t max, std::uint64_t seed) {
  sort_specs(candidates);
  if (candidates.size() <= max) return candidates;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    strata[{group.distance(c.x, c.z), group.distance(c.z, c.y)}].push_back(i);
  }
  std::uint64_t stream = 0;
  for (auto& [key, members] : strata) {
    CounterRng rng(seed, stream++);
    shuffle(members, rng);
  }
  std::vector<TripleSpec> out;
  for (std::size_t round = 0; out.size() < max; ++round)
    for (auto& [key, members] : strata)
      if (round < members.size() && out.size() < max) out.push_back(candidates[members[round]]);
  sort_specs(out);
  return out;
}

std::vector<TripleSpec> on_geodesic_triples(const Workspace& ws,
                                            const std::vector<GroupElement>& sources,
                                            std::size_t min_length, std::size_t max_length,
                                            std::size_t max, std::uint64_t seed) {
  const Group& group = ws.group();
  const BallIndex& ball = ws.ball();
  if (sources.size() < 2) throw ValidationError("need at least two sources");
  for (const auto& s : sources) ball.require_rank(s);

  // Strata (d(x,z), d(z,y)); each draws a source pair and a sphere element w, y = z w.
  struct Stratum {
    std::size_t a, b;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t failures = 0;
  };
  std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> by_dist;
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = 0; j < sources.size(); ++j)
      if (i != j) by_dist[group.distance(sources[i], sources[j])].push_back({i, j});
  std::vector<Stratum> strata;
  for (const auto& [a, pairs] : by_dist)
    for (std::size_t b = 1; a + b <= max_length && b <= static_cast<std::size_t>(ball.radius); ++b)
      if (a + b >= min_length) strata.push_back({a, b, pairs, 0});
  if (strata.empty()) return {};

  CounterRng rng(seed, 0x7e1a);
  std::set<std::tuple<GroupElement, GroupElement, GroupElement>> seen;
  std::vector<TripleSpec> out;
  const std::size_t give_up = 400;
  bool progress = true;
  while (out.size() < max && progress) {
    progress = false;
    for (auto& st : strata) {
      if (out.size() >= max) break;
      if (st.failures >= give_up) continue;
      progress = true;
      auto [i, j] = st.pairs[rng.next() % st.pairs.size()];
      const auto lo = ball.count_within(static_cast<int>(st.b) - 1);
      const auto hi = ball.count_within(static_cast<int>(st.b));
      const auto& w = ball.elements[lo + rng.next() % (hi - lo)];
      const auto& x = sources[i];
      const auto& z = sources[j];
      auto y = group.multiply(z, w);
      if (!in_ball(ball, y) || group.distance(x, y) != st.a + st.b ||
          !seen.insert({x, z, y}).second) {
        ++st.failures;
        continue;
      }
      st.failures = 0;
      out.push_back({x, z, y, "on-geodesic", 0});
    }
  }
  sort_specs(out);
  return out;
}

GroupElement find_skewering_element(const Group& group, Letter v, int search_radius) {
  auto ball = enumerate_ball(group, search_radius);
  std::vector<GroupElement> elems = ball.elements;
  std::sort(elems.begin(), elems.end());
  const auto wall = wall_of_edge(group, group.identity(), v);
  for (const auto& g : elems)
    if (!g.is_identity() && infinite_order(group, g) && skewers(group, g, wall, 4)) return g;
  throw ValidationError("no element of length <= " + std::to_string(search_radius) +
                        " skewers the wall of " + group.graph().label(v));
}

ExperimentResult exp_morse_axis(Workspace& ws, const ExperimentConfig& cfg) {
  const Group& group = ws.group();
  const BallIndex& ball = ws.ball();
  auto g = parse_element(group, cfg.element, "element");
  if (g.is_identity() || !infinite_order(group, g))
    throw ValidationError("axis element must have infinite order");
  if (!in_ball(ball, g)) throw ValidationError("axis leaves the ball");

  std::vector<std::pair<long, GroupElement>> axis{{0, group.identity()}};
  for (int dir : {1, -1})
    for (long i = dir;; i += dir) {
      auto p = group.power(g, i);
      if (!in_ball(ball, p)) break;
      axis.emplace_back(i, p);
    }
  std::sort(axis.begin(), axis.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<TripleSpec> cands;
  for (std::size_t a = 0; a < axis.size(); ++a)
    for (std::size_t c = a + 2; c < axis.size(); ++c) {
      auto len = group.distance(axis[a].second, axis[c].second);
      if (len < cfg.min_length || len > cfg.max_length) continue;
      for (std::size_t b = a + 1; b < c; ++b)
        cands.push_back({axis[a].second, axis[b].second, axis[c].second, "axis", 0});
    }
  ExperimentResult res;
  res.notes["element"] = group.format(g);
  res.notes["axis_exponents"] = {axis.front().first, axis.back().first};
  res.notes["candidates"] = cands.size();
  res.records = evaluate_triples(ws, stratified_sample(group, cands, cfg.max_triples, cfg.seed));
  return res;
}

ExperimentResult exp_barrier(Workspace& ws, const ExperimentConfig& cfg) {
  auto all = collect_barrier_triples(ws, cfg);
  auto picked = sample_barriers(ws.group(), std::move(all), cfg.max_triples, cfg.seed);
  ExperimentResult res;
  res.notes = picked.notes;
  res.records = evaluate_triples(ws, std::move(picked.specs));
  return res;
}

ExperimentResult exp_control(Workspace& ws, const ExperimentConfig& cfg) {
  const Group& group = ws.group();
  auto all = collect_barrier_triples(ws, cfg);
  auto picked = sample_barriers(group, std::move(all), cfg.max_triples, cfg.seed);
  std::vector<TripleSpec> specs;
  std::size_t stuck = 0;
  for (std::size_t i = 0; i < picked.specs.size(); ++i) {
    const auto& s = picked.specs[i];
    for (int t = 0; t <= cfg.offsets; ++t) {
      auto zt = push_off(group, ws.ball(), picked.paths[i], s.z, t);
      if (!zt) {
        ++stuck;
        break;
      }
      specs.push_back({s.x, *zt, s.y, "control", t});
    }
  }
  ExperimentResult res;
  res.notes = picked.notes;
  res.notes["offsets"] = cfg.offsets;
  res.notes["pushes_blocked"] = stuck;
  res.records = evaluate_triples(ws, std::move(specs));
  return res;
}

ExperimentResult exp_deviation(Workspace& ws, const ExperimentConfig& cfg) {
  const Group& group = ws.group();
  GreenSolver& solver = ws.solver();
  auto all = collect_barrier_triples(ws, cfg);
  auto picked = sample_barriers(group, std::move(all), cfg.max_triples, cfg.seed);
  const int max_r = cfg.max_r < 0 ? ws.ball().radius : cfg.max_r;

  std::vector<TripleSpec> specs;
  for (std::size_t i = 0; i < picked.specs.size(); ++i) {
    const auto& s = picked.specs[i];
    for (int t = 0; t <= cfg.deviation_offset; ++t) {
      auto zt = push_off(group, ws.ball(), picked.paths[i], s.z, t);
      if (!zt) break;
      specs.push_back({s.x, *zt, s.y, "deviation", t});
    }
  }
  sort_specs(specs);

  ExperimentResult res;
  res.notes = picked.notes;
  res.notes["max_r"] = max_r;
  std::size_t flagged = 0;
  for (const auto& s : specs) {
    auto rec = blank_record(group, s);
    Diagnostics diag;
    diag.add(solver.value(s.x, s.y));
    rec.ratio = std::nan("");
    for (int r = 0; r <= max_r; ++r)
      if (deviation_ratio(s.x, s.y, s.z, static_cast<std::size_t>(r), solver) <= 0.5) {
        rec.ratio = r;
        break;
      }
    if (std::isnan(rec.ratio)) ++flagged;
    rec.n_max = solver.steps();
    rec.last_term = diag.last;
    rec.tail_ratio = diag.tail;
    res.records.push_back(std::move(rec));
  }
  res.notes["unreached"] = flagged;
  return res;
}

ExperimentResult exp_antipodal(Workspace& ws, const ExperimentConfig& cfg) {
  const Group& group = ws.group();
  const BallIndex& ball = ws.ball();
  const auto e = group.identity();
  const Word word = group.parse_word(cfg.geodesic);
  if (word.size() < 2) throw ValidationError("antipodal runs need a geodesic of length >= 2");
  const auto points = geodesic_points(group, e, word);
  const std::size_t n = word.size();
  const auto whole = make_subset(points);

  std::vector<std::size_t> splits;
  std::string role;
  ExperimentResult res;
  if (cfg.mode == "narrow") {
    std::size_t p = cfg.split == 0 ? n / 2 : cfg.split;
    if (p == 0 || p >= n) throw ValidationError("split must be an interior index of the geodesic");
    splits.push_back(p);
    role = "narrow";
  } else {
    GoodPointParams params{cfg.theta, cfg.good_r, cfg.d, cfg.l, cfg.scale};
    auto rep = good_points(group, e, word, params);
    for (auto p : rep.good_indices)
      if (p > 0 && p < n) splits.push_back(p);
    if (splits.empty()) throw ValidationError("no interior good points on the geodesic");
    res.notes["good_indices"] = rep.good_indices;
    role = "good-point";
  }

  const auto near = neighbourhood(group, whole, cfg.offsets);
  std::vector<TripleSpec> specs;
  std::size_t pairs_total = 0;
  for (std::size_t p : splits) {
    const auto& z = points[p];
    auto y1 = make_subset({points.begin(), points.begin() + static_cast<long>(p) + 1});
    auto y2 = make_subset({points.begin() + static_cast<long>(p), points.end()});
    if (cfg.mode == "narrow" && !is_narrow_at(group, y1, y2, z, cfg.narrow_s))
      throw ValidationError("z is not " + std::to_string(cfg.narrow_s) + "-narrow");
    std::vector<GroupElement> xs, ys;
    for (const auto& c : near) {
      if (!in_ball(ball, c)) continue;
      if (antipodal(group, c, z, y1, y2, z, cfg.k)) xs.push_back(c);
      if (antipodal(group, z, c, y1, y2, z, cfg.k)) ys.push_back(c);
    }
    if (xs.size() > cfg.max_sources) {
      std::vector<std::size_t> idx(xs.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      CounterRng rng(cfg.seed, 0xa11 + p);
      shuffle(idx, rng);
      idx.resize(cfg.max_sources);
      std::sort(idx.begin(), idx.end());
      std::vector<GroupElement> keep;
      for (auto i : idx) keep.push_back(xs[i]);
      xs = std::move(keep);
    }
    std::vector<TripleSpec> cands;
    for (const auto& x : xs)
      for (const auto& y : ys) {
        auto len = group.distance(x, y);
        if (len < cfg.min_length || len > cfg.max_length) continue;
        cands.push_back({x, z, y, role, 0});
      }
    pairs_total += cands.size();
    for (auto& s : stratified_sample(group, std::move(cands), cfg.max_triples, cfg.seed + p)) {
      if (!antipodal(group, s.x, s.y, y1, y2, z, cfg.k))
        throw std::logic_error("antipodal prefilter disagrees with the pair test");
      specs.push_back(std::move(s));
    }
  }
  if (specs.empty()) throw ValidationError("no antipodal pairs in the ball");
  res.notes["splits"] = splits;
  res.notes["candidate_pairs"] = pairs_total;
  res.records = evaluate_triples(ws, std::move(specs));
  return res;
}

ExperimentResult exp_martin(Workspace& ws, const ExperimentConfig& cfg) {
  const Group& group = ws.group();
  GreenSolver& solver = ws.solver();
  auto g = parse_element(group, cfg.element, "element");
  if (g.is_identity() || !infinite_order(group, g))
    throw ValidationError("axis element must have infinite order");

  std::vector<GroupElement> panel;
  if (cfg.base_points.empty()) {
    panel.push_back(group.identity());
    for (Letter s : g.word()) panel.push_back(group.generator(s));
  } else {
    for (const auto& b : cfg.base_points) panel.push_back(parse_element(group, b, "base point"));
  }
  std::sort(panel.begin(), panel.end());
  panel.erase(std::unique(panel.begin(), panel.end()), panel.end());

  const auto e = group.identity();
  ExperimentResult res;
  for (const auto& x : panel) {
    auto series = kernel_series_along(solver, g, x, cfg.n_max);
    for (int n = 1; n <= cfg.n_max; ++n) {
      auto y = group.power(g, n);
      TripleRecord rec;
      rec.x = group.format(x);
      rec.z = group.format(g);
      rec.y = group.format(y);
      rec.dxz = x.length();
      rec.dzy = y.length();
      rec.role = "martin";
      rec.offset = n;
      rec.ratio = series.values[n - 1];
      Diagnostics diag;
      diag.add(solver.value(x, y));
      diag.add(solver.value(e, y));
      rec.n_max = solver.steps();
      rec.last_term = diag.last;
      rec.tail_ratio = diag.tail;
      res.records.push_back(std::move(rec));
    }
  }
  res.notes["element"] = group.format(g);
  return res;
}

ExperimentResult run_experiment(Workspace& ws, const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ExperimentKind::MorseAxis: return exp_morse_axis(ws, cfg);
    case ExperimentKind::Barrier: return exp_barrier(ws, cfg);
    case ExperimentKind::Antipodal: return exp_antipodal(ws, cfg);
    case ExperimentKind::Deviation: return exp_deviation(ws, cfg);
    case ExperimentKind::Martin: return exp_martin(ws, cfg);
    case ExperimentKind::Control: return exp_control(ws, cfg);
  }
  throw ValidationError("unknown experiment kind");
}

json environment_fingerprint() {
  return json{{"tool", "lab"},
              {"version", kToolVersion},
              {"compiler", std::string("gcc ") + __VERSION__},
              {"cxx", static_cast<long>(__cplusplus)}};
}

json ReportSummary::to_json() const {
  json b = json::array();
  for (const auto& k : buckets)
    b.push_back({{"role", k.role},
                 {"offset", k.offset},
                 {"length", k.length},
                 {"count", k.count},
                 {"min", k.min},
                 {"median", k.median},
                 {"max", k.max}});
  const bool any = count > flagged;
  return json{{"schema", kReportSchema},
              {"kind", kind},
              {"manifest", manifest},
              {"count", count},
              {"flagged", flagged},
              {"min", any ? json(min) : json(nullptr)},
              {"median", any ? json(median) : json(nullptr)},
              {"max", any ? json(max) : json(nullptr)},
              {"buckets", b},
              {"parameters", parameters},
              {"environment", environment},
              {"extras", extras}};
}

ReportSummary ReportSummary::from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema)
      throw ValidationError("unsupported summary schema");
    ReportSummary s;
    s.kind = j.at("kind").get<std::string>();
    s.manifest = j.value("manifest", std::string());
    s.count = j.at("count").get<std::size_t>();
    s.flagged = j.at("flagged").get<std::size_t>();
    auto opt = [&](const char* key) { return j.at(key).is_null() ? 0.0 : j.at(key).get<double>(); };
    s.min = opt("min");
    s.median = opt("median");
    s.max = opt("max");
    for (const auto& b : j.at("buckets"))
      s.buckets.push_back({b.at("role").get<std::string>(), b.at("offset").get<int>(),
                           b.at("length").get<std::size_t>(), b.at("count").get<std::size_t>(),
                           b.at("min").get<double>(), b.at("median").get<double>(),
                           b.at("max").get<double>()});
    s.parameters = j.at("parameters");
    s.environment = j.at("environment");
    s.extras = j.at("extras");
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed summary: ") + e.what());
  }
}

ReportSummary summarize(const std::vector<TripleRecord>& records, const json& parameters,
                        const json& notes) {
  ReportSummary s;
  s.parameters = parameters;
  if (parameters.is_object() && parameters.contains("kind"))
    s.kind = parameters["kind"].get<std::string>();
  s.environment = environment_fingerprint();
  s.count = records.size();

  std::vector<double> finite;
  std::map<std::tuple<std::string, int, std::size_t>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (std::isnan(r.ratio)) {
      ++s.flagged;
      continue;
    }
    finite.push_back(r.ratio);
    groups[{r.role, r.offset, r.dxz + r.dzy}].push_back(r.ratio);
  }
  if (!finite.empty()) {
    s.min = *std::min_element(finite.begin(), finite.end());
    s.max = *std::max_element(finite.begin(), finite.end());
    s.median = median_of(finite);
  }
  for (auto& [key, vals] : groups) {
    auto [role, offset, length] = key;
    s.buckets.push_back({role, offset, length, vals.size(),
                         *std::min_element(vals.begin(), vals.end()), median_of(vals),
                         *std::max_element(vals.begin(), vals.end())});
  }

  json extras = json::object();
  if (!notes.empty()) extras["notes"] = notes;

  // Kernel traces, one per base point, ordered by n.
  std::map<std::string, std::map<int, double>> traces;
  std::map<int, std::vector<double>> control;
  std::map<int, std::size_t> half_radius;
  std::size_t dev_rows = 0;
  for (const auto& r : records) {
    if (r.role == "martin") traces[r.x][r.offset] = r.ratio;
    if (r.role == "control" && !std::isnan(r.ratio)) control[r.offset].push_back(r.ratio);
    if (r.role == "deviation") {
      ++dev_rows;
      if (!std::isnan(r.ratio)) ++half_radius[static_cast<int>(r.ratio)];
    }
  }
  if (!traces.empty()) {
    json m = json::object();
    for (const auto& [x, byn] : traces) {
      std::vector<double> vals, diffs, rel;
      for (const auto& [n, v] : byn) vals.push_back(v);
      for (std::size_t i = 1; i < vals.size(); ++i) {
        diffs.push_back(std::abs(vals[i] - vals[i - 1]));
        rel.push_back(vals[i - 1] != 0.0 ? std::abs(vals[i] / vals[i - 1] - 1.0) : 0.0);
      }
      bool decreasing = diffs.size() >= 3;
      for (std::size_t i = diffs.size() >= 3 ? diffs.size() - 2 : 0; decreasing && i < diffs.size();
           ++i)
        decreasing = diffs[i] < diffs[i - 1];
      m[x.empty() ? std::string("e") : x] = {
          {"values", vals},
          {"differences", diffs},
          {"relative_steps", rel},
          {"sup_difference", diffs.empty() ? 0.0 : *std::max_element(diffs.begin(), diffs.end())},
          {"last_difference", diffs.empty() ? 0.0 : diffs.back()},
          {"last3_decreasing", decreasing}};
    }
    extras["martin"] = m;
  }
  if (!control.empty()) {
    json c = json::object();
    for (auto& [t, vals] : control)
      c[std::to_string(t)] = {{"count", vals.size()}, {"median", median_of(vals)}};
    extras["control"] = {{"by_offset", c}};
    if (control.size() > 1) {
      double m0 = median_of(control.begin()->second);
      double mt = median_of(control.rbegin()->second);
      extras["control"]["separated"] = mt > m0;
    }
  }
  if (dev_rows > 0) {
    json h = json::object();
    for (auto [r, c] : half_radius) h[std::to_string(r)] = c;
    extras["deviation"] = {{"rows", dev_rows}, {"half_radius_histogram", h},
                           {"unreached", s.flagged}};
  }
  s.extras = extras;
  return s;
}

std::string records_to_csv(const std::vector<TripleRecord>& records, const std::string& manifest) {
  std::string out = "# manifest=" + manifest + "\n" + kRecordHeader + "\n";
  for (const auto& r : records) {
    out += r.x + "," + r.z + "," + r.y + "," + std::to_string(r.dxz) + "," +
           std::to_string(r.dzy) + "," + r.role + "," + std::to_string(r.offset) + "," +
           num(r.ratio) + "," + std::to_string(r.n_max) + "," + num(r.last_term) + "," +
           num(r.tail_ratio) + "\n";
  }
  return out;
}

std::vector<TripleRecord> records_from_csv(const std::string& text, std::string* manifest) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<TripleRecord> out;
  auto fail = [&](const std::string& why) {
    throw ValidationError("line " + std::to_string(lineno) + ": " + why);
  };
  auto to_size = [&](const std::string& f, const char* name) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size()) fail(std::string("bad ") + name + " '" + f + "'");
    return v;
  };
  auto to_int = [&](const std::string& f, const char* name) {
    int v = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size()) fail(std::string("bad ") + name + " '" + f + "'");
    return v;
  };
  auto to_real = [&](const std::string& f, const char* name) {
    if (f.empty()) fail(std::string("empty ") + name);
    char* end = nullptr;
    double v = std::strtod(f.c_str(), &end);
    if (end != f.c_str() + f.size()) fail(std::string("bad ") + name + " '" + f + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# manifest=";
      if (manifest && line.rfind(tag, 0) == 0) *manifest = line.substr(tag.size());
      continue;
    }
    if (!header) {
      if (line != kRecordHeader) fail("expected header '" + std::string(kRecordHeader) + "'");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 11) fail("expected 11 fields, found " + std::to_string(f.size()));
    TripleRecord r;
    r.x = f[0];
    r.z = f[1];
    r.y = f[2];
    r.dxz = to_size(f[3], "dxz");
    r.dzy = to_size(f[4], "dzy");
    r.role = f[5];
    if (r.role.empty()) fail("empty role");
    r.offset = to_int(f[6], "offset");
    r.ratio = to_real(f[7], "ratio");
    r.n_max = to_int(f[8], "n_max");
    r.last_term = to_real(f[9], "last_term");
    r.tail_ratio = to_real(f[10], "tail_ratio");
    out.push_back(std::move(r));
  }
  if (!header) throw ValidationError("record file has no header line");
  return out;
}

RenderedReport render_report(const ReportSummary& summary, const std::vector<TripleRecord>& records) {
  const double W = 640, H = 400, left = 60, right = 20, top = 30, bottom = 50;
  const bool martin = summary.extras.contains("martin");

  // x: exponent n for kernel traces, d(x,z) + d(z,y) otherwise.
  auto xval = [&](const TripleRecord& r) {
    return martin ? static_cast<double>(r.offset) : static_cast<double>(r.dxz + r.dzy);
  };
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& r : records) {
    if (std::isnan(r.ratio)) continue;
    double x = xval(r), y = r.ratio;
    if (first) x0 = x1 = x, y0 = y1 = y, first = false;
    x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (x1 - x0 < 1) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
                    "viewBox=\"0 0 640 400\">\n";
  if (!summary.manifest.empty()) svg += "<!-- manifest=" + summary.manifest + " -->\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
         (summary.kind.empty() ? std::string("records") : summary.kind) + " (" +
         std::to_string(summary.count) + " rows)</text>\n";
  svg += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(H - bottom, 1) + "\" x2=\"" +
         fixed(W - right, 1) + "\" y2=\"" + fixed(H - bottom, 1) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(top, 1) + "\" x2=\"" + fixed(left, 1) +
         "\" y2=\"" + fixed(H - bottom, 1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    svg += "<text x=\"" + fixed(px(xv), 1) + "\" y=\"" + fixed(H - bottom + 16, 1) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + fixed(xv, 1) + "</text>\n";
    svg += "<text x=\"" + fixed(left - 4, 1) + "\" y=\"" + fixed(py(yv) + 3, 1) +
           "\" text-anchor=\"end\" font-size=\"10\">" + fixed(yv, 4) + "</text>\n";
  }
  svg += "<text x=\"320\" y=\"390\" text-anchor=\"middle\" font-size=\"11\">" +
         std::string(martin ? "n" : "d(x,z) + d(z,y)") + "</text>\n";

  if (martin) {
    std::map<std::string, std::vector<std::pair<double, double>>> lines;
    for (const auto& r : records)
      if (r.role == "martin") lines[r.x].emplace_back(xval(r), r.ratio);
    for (const auto& [x, pts] : lines) {
      std::string d;
      for (const auto& [a, b] : pts) d += (d.empty() ? "" : " ") + fixed(px(a), 2) + "," + fixed(py(b), 2);
      svg += "<polyline fill=\"none\" stroke=\"steelblue\" points=\"" + d + "\"/>\n";
      svg += "<text x=\"" + fixed(px(pts.back().first) - 4, 1) + "\" y=\"" +
             fixed(py(pts.back().second) - 4, 1) + "\" text-anchor=\"end\" font-size=\"9\">" +
             (x.empty() ? "e" : x) + "</text>\n";
    }
  } else {
    for (const auto& r : records) {
      if (std::isnan(r.ratio)) continue;
      svg += "<circle cx=\"" + fixed(px(xval(r)), 2) + "\" cy=\"" + fixed(py(r.ratio), 2) +
             "\" r=\"2\" fill=\"" + (r.role == "control" && r.offset > 0 ? "crimson" : "steelblue") +
             "\" fill-opacity=\"0.5\"/>\n";
    }
  }
  svg += "</svg>\n";

  std::string md = "# " + (summary.kind.empty() ? std::string("Record") : summary.kind) + " report\n\n";
  if (!summary.manifest.empty()) md += "- manifest: " + summary.manifest + "\n";
  md += "- rows: " + std::to_string(summary.count) + "\n";
  md += "- flagged: " + std::to_string(summary.flagged) + "\n";
  if (summary.count > summary.flagged)
    md += "- min / median / max: " + fixed(summary.min, 6) + " / " + fixed(summary.median, 6) +
          " / " + fixed(summary.max, 6) + "\n";
  md += "- tool: " + summary.environment.value("tool", std::string("lab")) + " " +
        summary.environment.value("version", std::string("")) + "\n\n";
  if (!summary.buckets.empty()) {
    md += "| role | offset | length | count | min | median | max |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& b : summary.buckets)
      md += "| " + b.role + " | " + std::to_string(b.offset) + " | " + std::to_string(b.length) +
            " | " + std::to_string(b.count) + " | " + fixed(b.min, 6) + " | " + fixed(b.median, 6) +
            " | " + fixed(b.max, 6) + " |\n";
  }
  if (martin) {
    md += "\n## Kernel traces\n\n| x | last K | last difference | last 3 decreasing |\n|---|---|---|---|\n";
    for (const auto& [x, t] : summary.extras["martin"].items())
      md += "| " + x + " | " + fixed(t["values"].back().get<double>(), 6) + " | " +
            num(t["last_difference"].get<double>()) + " | " +
            (t["last3_decreasing"].get<bool>() ? "yes" : "no") + " |\n";
  }
  if (summary.extras.contains("control")) {
    md += "\n## Control medians\n\n| offset | count | median |\n|---|---|---|\n";
    for (const auto& [t, c] : summary.extras["control"]["by_offset"].items())
      md += "| " + t + " | " + std::to_string(c["count"].get<std::size_t>()) + " | " +
            fixed(c["median"].get<double>(), 6) + " |\n";
  }
  if (summary.extras.contains("deviation")) {
    md += "\n## Half radius\n\n| R | triples |\n|---|---|\n";
    for (const auto& [r, c] : summary.extras["deviation"]["half_radius_histogram"].items())
      md += "| " + r + " | " + std::to_string(c.get<std::size_t>()) + " |\n";
    md += "\nunreached: " + std::to_string(summary.flagged) + "\n";
  }
  return {svg, md};
}

json max_ratio_by_window(const std::vector<TripleRecord>& records, std::size_t width) {
  if (width == 0) throw ValidationError("window width must be positive");
  std::map<std::size_t, double> best;
  for (const auto& r : records) {
    if (std::isnan(r.ratio)) continue;
    std::size_t len = r.dxz + r.dzy;
    std::size_t lo = len == 0 ? 0 : (len - 1) / width * width + 1;
    auto [it, inserted] = best.emplace(lo, r.ratio);
    if (!inserted) it->second = std::max(it->second, r.ratio);
  }
  json out = json::object();
  for (auto [lo, v] : best) out[std::to_string(lo) + "-" + std::to_string(lo + width - 1)] = v;
  return out;
}

std::vector<std::string> compare_baseline(const json& pinned, const json& fresh, double tolerance) {
  std::vector<std::string> bad;
  for (const auto& [key, v] : pinned.items()) {
    if (!fresh.contains(key)) {
      bad.push_back("window " + key + " missing");
      continue;
    }
    double p = v.get<double>(), f = fresh[key].get<double>();
    if (std::abs(f - p) > tolerance * std::abs(p))
      bad.push_back("window " + key + ": pinned " + num(p) + ", got " + num(f));
  }
  return bad;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace racglab
