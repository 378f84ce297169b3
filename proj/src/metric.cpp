#include "racglab/metric.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "racglab/errors.hpp"

namespace racglab {

FiniteSubset make_subset(std::vector<GroupElement> points) {
  if (points.empty()) throw ValidationError("finite subset must be nonempty");
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

std::vector<GroupElement> geodesic_points(const Group& group, const GroupElement& start,
                                          const Word& word) {
  if (group.canonicalize(word).length() != word.size())
    throw ValidationError("word '" + group.format(word) + "' is not geodesic");
  return group.vertex_path(start, word);
}

FiniteSubset path_subset(const Group& group, const GroupElement& start, const Word& word) {
  return make_subset(geodesic_points(group, start, word));
}

std::size_t distance_to(const Group& group, const GroupElement& x, const FiniteSubset& y) {
  std::size_t best = SIZE_MAX;
  for (const auto& p : y) best = std::min(best, group.distance(x, p));
  return best;
}

std::size_t set_distance(const Group& group, const FiniteSubset& a, const FiniteSubset& b) {
  std::size_t best = SIZE_MAX;
  for (const auto& p : a) best = std::min(best, distance_to(group, p, b));
  return best;
}

std::size_t diameter(const Group& group, const FiniteSubset& s) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) best = std::max(best, group.distance(s[i], s[j]));
  return best;
}

FiniteSubset project(const Group& group, const GroupElement& x, const FiniteSubset& y) {
  std::size_t best = SIZE_MAX;
  std::vector<GroupElement> out;
  for (const auto& p : y) {
    auto d = group.distance(x, p);
    if (d < best) {
      best = d;
      out.clear();
    }
    if (d == best) out.push_back(p);
  }
  return out;  // y is sorted, so out is too
}

FiniteSubset project_set(const Group& group, const FiniteSubset& xs, const FiniteSubset& y) {
  std::vector<GroupElement> out;
  for (const auto& x : xs) {
    auto p = project(group, x, y);
    out.insert(out.end(), p.begin(), p.end());
  }
  return make_subset(std::move(out));
}

namespace {

FiniteSubset neighbourhood_with(const Group& group, const FiniteSubset& y, const BallIndex& ball,
                                int t) {
  std::unordered_set<GroupElement, ElementHash> seen;
  const auto count = ball.count_within(t);
  for (const auto& p : y)
    for (std::size_t i = 0; i < count; ++i) seen.insert(group.multiply(p, ball.elements[i]));
  return make_subset({seen.begin(), seen.end()});
}

std::size_t contraction_pairwise(const Group& group, const FiniteSubset& test,
                                 const std::vector<std::size_t>& dist,
                                 const std::function<std::size_t(std::size_t, std::size_t)>& diam,
                                 std::size_t stop_above) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    for (std::size_t j = 0; j < test.size(); ++j) {
      auto u = diam(i, j);
      if (u <= best) continue;
      if (group.distance(test[i], test[j]) > dist[i]) continue;
      best = u;
      if (best > stop_above) return best;
    }
  return best;
}

std::size_t contraction_constant(const Group& group, const FiniteSubset& y,
                                 const FiniteSubset& test, const BallIndex* ball,
                                 std::size_t stop_above) {
  if (test.empty()) throw ValidationError("contraction test set must be nonempty");
  std::vector<std::vector<std::size_t>> dy(y.size(), std::vector<std::size_t>(y.size(), 0));
  for (std::size_t a = 0; a < y.size(); ++a)
    for (std::size_t b = a + 1; b < y.size(); ++b) dy[a][b] = dy[b][a] = group.distance(y[a], y[b]);

  std::vector<std::vector<std::size_t>> proj(test.size());
  std::vector<std::size_t> dist(test.size(), SIZE_MAX), own(test.size(), 0);
  std::size_t max_dist = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t a = 0; a < y.size(); ++a) {
      auto d = group.distance(test[i], y[a]);
      if (d < dist[i]) {
        dist[i] = d;
        proj[i].clear();
      }
      if (d == dist[i]) proj[i].push_back(a);
    }
    for (auto a : proj[i])
      for (auto b : proj[i]) own[i] = std::max(own[i], dy[a][b]);
    max_dist = std::max(max_dist, dist[i]);
  }
  auto union_diam = [&](std::size_t i, std::size_t j) {
    std::size_t u = std::max(own[i], own[j]);
    for (auto a : proj[i])
      for (auto b : proj[j]) u = std::max(u, dy[a][b]);
    return u;
  };

  // Walk each x's own d(x, Y)-ball when it is smaller than the test set.
  std::optional<BallIndex> local;
  if (!ball || ball->radius < static_cast<int>(max_dist)) {
    try {
      local.emplace(enumerate_ball(group, static_cast<int>(max_dist), 4 * test.size() + 64));
      ball = &*local;
    } catch (const BudgetExceeded&) {
      return contraction_pairwise(group, test, dist, union_diam, stop_above);
    }
  }
  std::unordered_map<GroupElement, std::size_t, ElementHash> where;
  for (std::size_t i = 0; i < test.size(); ++i) where.emplace(test[i], i);
  std::size_t best = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto count = ball->count_within(static_cast<int>(dist[i]));
    for (std::size_t k = 0; k < count; ++k) {
      auto it = where.find(group.multiply(test[i], ball->elements[k]));
      if (it == where.end()) continue;
      best = std::max(best, union_diam(i, it->second));
      if (best > stop_above) return best;
    }
  }
  return best;
}

}  // namespace

FiniteSubset neighbourhood(const Group& group, const FiniteSubset& y, int t, std::size_t cap) {
  return neighbourhood_with(group, y, enumerate_ball(group, t, cap), t);
}

std::size_t empirical_contraction_constant(const Group& group, const FiniteSubset& y,
                                           const FiniteSubset& test_set, std::size_t stop_above) {
  return contraction_constant(group, y, test_set, nullptr, stop_above);
}

bool is_D_contracting_at_scale(const Group& group, const FiniteSubset& y, std::size_t d, int t,
                               std::size_t cap) {
  auto ball = enumerate_ball(group, t, cap);
  auto test = neighbourhood_with(group, y, ball, t);
  return contraction_constant(group, y, test, &ball, d) <= d;
}

nlohmann::json Decomposition::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& [b, e] : segments) segs.push_back({b, e});
  return {{"segments", segs},
          {"word_length", word_length},
          {"contraction_length", contraction_length},
          {"proportion", proportion()},
          {"D", d},
          {"L", l},
          {"scale", scale}};
}

std::vector<Interval> optimal_packing(
    std::size_t lo, std::size_t hi, const std::function<bool(std::size_t, std::size_t)>& qualifies) {
  if (hi <= lo) return {};
  const std::size_t n = hi - lo;
  std::vector<std::size_t> best(n + 1, 0), take(n + 1, 0);  // take = segment end, 0 = skip
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t i = lo + k;
    best[k] = best[k + 1];
    std::size_t top = 0, top_end = 0;
    for (std::size_t j = hi; j > i; --j) {
      if (!qualifies(i, j)) continue;
      auto v = (j - i) + best[j - lo];
      if (top_end == 0 || v > top) {
        top = v;
        top_end = j;
      }
    }
    if (top_end != 0 && top >= best[k]) {
      best[k] = top;
      take[k] = top_end;
    }
  }
  std::vector<Interval> out;
  for (std::size_t k = 0; k < n;) {
    if (take[k] == 0) {
      ++k;
      continue;
    }
    out.emplace_back(lo + k, take[k]);
    k = take[k] - lo;
  }
  return out;
}

ContractionTable::ContractionTable(const Group& group, const GroupElement& start,
                                   const Word& word, std::size_t d, std::size_t l, int scale,
                                   std::size_t cap)
    : n_(word.size()), d_(d), l_(l), scale_(scale), table_((n_ + 1) * (n_ + 1), 0) {
  if (l < 1) throw ValidationError("L must be at least 1");
  auto points = geodesic_points(group, start, word);
  auto ball = enumerate_ball(group, scale, cap);
  for (std::size_t i = 0; i + l <= n_; ++i)
    for (std::size_t j = i + l; j <= n_; ++j) {
      auto y = make_subset({points.begin() + static_cast<long>(i),
                            points.begin() + static_cast<long>(j) + 1});
      auto test = neighbourhood_with(group, y, ball, scale);
      table_[i * (n_ + 1) + j] = contraction_constant(group, y, test, &ball, d) <= d;
    }
}

Decomposition ContractionTable::decompose(std::size_t lo, std::size_t hi) const {
  Decomposition out;
  out.segments = optimal_packing(lo, hi, [this](std::size_t i, std::size_t j) { return qualifies(i, j); });
  out.word_length = hi - lo;
  for (const auto& [b, e] : out.segments) out.contraction_length += e - b;
  out.d = d_;
  out.l = l_;
  out.scale = scale_;
  return out;
}

Decomposition decompose_DL(const Group& group, const GroupElement& start, const Word& word,
                           std::size_t d, std::size_t l, int scale, std::size_t cap) {
  return ContractionTable(group, start, word, d, l, scale, cap).decompose(0, word.size());
}

nlohmann::json GoodPointReport::to_json(const Group& group) const {
  return {{"geodesic", group.format(geodesic)},
          {"theta", params.theta},
          {"R", params.r},
          {"D", params.d},
          {"L", params.l},
          {"scale", params.scale},
          {"good_indices", good_indices}};
}

GoodPointReport good_points(const ContractionTable& table, const Word& word,
                            const GoodPointParams& params) {
  const std::size_t n = word.size();
  if (n < params.r) throw ValidationError("geodesic shorter than R");
  GoodPointReport out{word, params, {}};
  for (std::size_t i = 0; i <= n; ++i) {
    bool good = true;
    for (std::size_t j = 0; j <= n && good; ++j) {
      const std::size_t gap = i > j ? i - j : j - i;
      if (gap < params.r || gap == 0) continue;
      auto dec = table.decompose(std::min(i, j), std::max(i, j));
      good = static_cast<double>(dec.contraction_length) >= params.theta * static_cast<double>(gap);
    }
    if (good) out.good_indices.push_back(i);
  }
  return out;
}

GoodPointReport good_points(const Group& group, const GroupElement& start, const Word& word,
                            const GoodPointParams& params, std::size_t cap) {
  if (word.size() < params.r) throw ValidationError("geodesic shorter than R");
  ContractionTable table(group, start, word, params.d, params.l, params.scale, cap);
  return good_points(table, word, params);
}

bool is_narrow_at(const Group& group, const FiniteSubset& y1, const FiniteSubset& y2,
                  const GroupElement& z, std::size_t s) {
  for (const auto& a : y1) {
    const auto az = group.distance(a, z);
    for (const auto& b : y2)
      if (group.distance(a, b) + s < az + group.distance(z, b)) return false;
  }
  return true;
}

bool narrow_geodesic_oracle(const Group& group, const FiniteSubset& y1, const FiniteSubset& y2,
                            const GroupElement& z, std::size_t r0, std::size_t cap) {
  for (const auto& a : y1)
    for (const auto& b : y2) {
      auto geos = group.all_geodesics(a, b, cap);
      if (geos.truncated) throw BudgetExceeded("geodesic enumeration exceeded the cap");
      for (const auto& w : geos.words) {
        bool meets = false;
        for (const auto& p : group.vertex_path(a, w))
          if (group.distance(p, z) <= r0) {
            meets = true;
            break;
          }
        if (!meets) return false;
      }
    }
  return true;
}

bool antipodal(const Group& group, const GroupElement& x, const GroupElement& y,
               const FiniteSubset& y1, const FiniteSubset& y2, const GroupElement& z, double k) {
  std::vector<GroupElement> all(y1);
  all.insert(all.end(), y2.begin(), y2.end());
  auto whole = make_subset(std::move(all));
  if (!std::binary_search(whole.begin(), whole.end(), z))
    throw ValidationError("antipodal: z must lie in Y1 u Y2");
  auto inside = [](const FiniteSubset& part, const FiniteSubset& whole_part) {
    return std::includes(whole_part.begin(), whole_part.end(), part.begin(), part.end());
  };
  auto spread = [&](const GroupElement& p, const FiniteSubset& part) {
    auto s = project(group, p, part);
    s.push_back(z);
    return static_cast<double>(diameter(group, make_subset(std::move(s))));
  };
  if (!inside(project(group, x, whole), y1) || !inside(project(group, y, whole), y2)) return false;
  return static_cast<double>(distance_to(group, x, whole)) <= k * spread(x, y1) &&
         static_cast<double>(distance_to(group, y, whole)) <= k * spread(y, y2);
}

std::vector<GroupElement> barriers(const Group& group, const std::vector<GroupElement>& path,
                                   const GroupElement& f, std::size_t r, const BallIndex& search) {
  if (path.empty()) throw ValidationError("barrier search needs a nonempty path");
  for (const auto& p : path)
    if (p.length() + r > static_cast<std::size_t>(search.radius))
      throw ValidationError("search ball of radius " + std::to_string(search.radius) +
                            " does not cover the " + std::to_string(r) +
                            "-neighbourhood of the path");
  auto near = neighbourhood_with(group, make_subset(path), search, static_cast<int>(r));
  auto path_set = make_subset(path);
  std::vector<GroupElement> out;
  for (const auto& h : near)
    if (distance_to(group, group.multiply(h, f), path_set) <= r) out.push_back(h);
  return out;
}

std::vector<std::string> validate_admissible(const Group& group,
                                             const std::vector<FiniteSubset>& sequence,
                                             std::size_t d, std::size_t b, int scale,
                                             std::size_t cap) {
  if (sequence.empty() || sequence.size() % 2 == 0)
    throw ValidationError("admissible sequence must read P1, Q1, ..., Qn, Pn+1");
  for (const auto& s : sequence)
    if (s.empty()) throw ValidationError("admissible sequence members must be nonempty");
  const std::size_t n = sequence.size() / 2;
  auto P = [&](std::size_t i) -> const FiniteSubset& { return sequence[2 * (i - 1)]; };
  auto Q = [&](std::size_t i) -> const FiniteSubset& { return sequence[2 * i - 1]; };
  auto meet = [](const FiniteSubset& a, const FiniteSubset& c) {
    FiniteSubset out;
    std::set_intersection(a.begin(), a.end(), c.begin(), c.end(), std::back_inserter(out));
    return out;
  };
  auto join = [](const FiniteSubset& a, const FiniteSubset& c) {
    std::vector<GroupElement> out(a);
    out.insert(out.end(), c.begin(), c.end());
    return make_subset(std::move(out));
  };
  auto name = [](char c, std::size_t i) { return std::string(1, c) + std::to_string(i); };

  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n + 1; ++i)
    if (!is_D_contracting_at_scale(group, P(i), d, scale, cap))
      out.push_back("condition 1: " + name('P', i) + " is not " + std::to_string(d) +
                    "-contracting at scale " + std::to_string(scale));
  for (std::size_t i = 1; i <= n; ++i) {
    if (meet(P(i), Q(i)).empty()) out.push_back("condition 2: " + name('P', i) + " misses " + name('Q', i));
    if (meet(Q(i), P(i + 1)).empty())
      out.push_back("condition 2: " + name('Q', i) + " misses " + name('P', i + 1));
  }
  for (std::size_t i = 2; i <= n; ++i) {
    auto a = meet(Q(i - 1), P(i));
    auto c = meet(P(i), Q(i));
    if (a.empty() || c.empty()) continue;
    auto gap = set_distance(group, a, c);
    if (gap < 2 * b + 10 * d)
      out.push_back("condition 3: transversal points of " + name('P', i) + " are " +
                    std::to_string(gap) + " apart, need " + std::to_string(2 * b + 10 * d));
  }
  for (std::size_t i = 1; i <= n + 1; ++i) {
    if (i > 1) {
      auto diam = diameter(group, project_set(group, join(P(i - 1), Q(i - 1)), P(i)));
      if (diam > b)
        out.push_back("condition 4: projection of " + name('P', i - 1) + " u " + name('Q', i - 1) +
                      " to " + name('P', i) + " has diameter " + std::to_string(diam));
    }
    if (i <= n) {
      auto diam = diameter(group, project_set(group, join(Q(i), P(i + 1)), P(i)));
      if (diam > b)
        out.push_back("condition 4: projection of " + name('Q', i) + " u " + name('P', i + 1) +
                      " to " + name('P', i) + " has diameter " + std::to_string(diam));
    }
  }
  return out;
}

}  // namespace racglab
