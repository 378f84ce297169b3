#include "racglab/group.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>

#include "racglab/errors.hpp"

namespace racglab {

namespace {

std::uint32_t next_group_id() {
  static std::atomic<std::uint32_t> counter{1};
  return counter.fetch_add(1);
}

// Appends s to a reduced word, cancelling against the last occurrence of s
// when every letter after it commutes with s.
void push_letter(Word& w, Letter s, const std::vector<VertexSet>& blockers) {
  for (std::size_t pos = w.size(); pos > 0; --pos) {
    Letter q = w[pos - 1];
    if (q == s) {
      w.erase(w.begin() + static_cast<std::ptrdiff_t>(pos - 1));
      return;
    }
    if ((blockers[s] >> q) & 1U) break;
  }
  w.push_back(s);
}

}  // namespace

Group::Group(DefiningGraph graph) : graph_(std::move(graph)), id_(next_group_id()) {
  blockers_.resize(graph_.size());
  for (std::size_t s = 0; s < graph_.size(); ++s)
    blockers_[s] = graph_.all() & ~graph_.neighbours(s);
}

void Group::check_same(const GroupElement& a) const {
  if (a.group_id() != id_) throw ValidationError("element belongs to a different group");
}

void Group::check_same(const GroupElement& a, const GroupElement& b) const {
  check_same(a);
  check_same(b);
}

GroupElement Group::generator(Letter s) const {
  if (s >= rank()) throw ValidationError("invalid generator index " + std::to_string(s));
  return GroupElement(id_, {s});
}

Word Group::reduce(std::span<const Letter> raw) const {
  Word out;
  out.reserve(raw.size());
  for (Letter s : raw) {
    if (s >= rank()) throw ValidationError("invalid generator index " + std::to_string(s));
    push_letter(out, s, blockers_);
  }
  return out;
}

void Group::push_reduced(Word& reduced, Letter s) const { push_letter(reduced, s, blockers_); }

Word Group::lex_normal(std::span<const Letter> reduced) const {
  // Repeatedly extract the smallest letter that can be shuffled to the front.
  const std::size_t n = reduced.size();
  Word out;
  out.reserve(n);
  std::vector<char> used(n, 0);
  for (std::size_t step = 0; step < n; ++step) {
    VertexSet blocked = 0;
    std::size_t best = n;
    for (std::size_t p = 0; p < n; ++p) {
      if (used[p]) continue;
      Letter s = reduced[p];
      if (!((blocked >> s) & 1U) && (best == n || s < reduced[best])) best = p;
      blocked |= blockers_[s];
      if (blocked == graph_.all()) break;
    }
    used[best] = 1;
    out.push_back(reduced[best]);
  }
  return out;
}

GroupElement Group::canonicalize(std::span<const Letter> raw) const {
  return GroupElement(id_, lex_normal(reduce(raw)));
}

GroupElement Group::multiply(const GroupElement& a, const GroupElement& b) const {
  check_same(a, b);
  Word w = a.word();
  for (Letter s : b.word()) push_letter(w, s, blockers_);
  return GroupElement(id_, lex_normal(w));
}

GroupElement Group::multiply(const GroupElement& a, Letter s) const {
  check_same(a);
  if (s >= rank()) throw ValidationError("invalid generator index " + std::to_string(s));
  Word w = a.word();
  push_letter(w, s, blockers_);
  return GroupElement(id_, lex_normal(w));
}

GroupElement Group::left_multiply(Letter s, const GroupElement& a) const {
  check_same(a);
  if (s >= rank()) throw ValidationError("invalid generator index " + std::to_string(s));
  Word w{s};
  for (Letter q : a.word()) push_letter(w, q, blockers_);
  return GroupElement(id_, lex_normal(w));
}

GroupElement Group::invert(const GroupElement& a) const {
  check_same(a);
  Word w(a.word().rbegin(), a.word().rend());
  return GroupElement(id_, lex_normal(w));
}

GroupElement Group::conjugate(const GroupElement& g, const GroupElement& x) const {
  check_same(g, x);
  Word w = g.word();
  for (Letter s : x.word()) push_letter(w, s, blockers_);
  for (auto it = g.word().rbegin(); it != g.word().rend(); ++it) push_letter(w, *it, blockers_);
  return GroupElement(id_, lex_normal(w));
}

GroupElement Group::power(const GroupElement& a, long n) const {
  check_same(a);
  Word base = a.word();
  if (n < 0) {
    std::reverse(base.begin(), base.end());
    n = -n;
  }
  Word w;
  for (long i = 0; i < n; ++i)
    for (Letter s : base) push_letter(w, s, blockers_);
  return GroupElement(id_, lex_normal(w));
}

std::size_t Group::distance(const GroupElement& a, const GroupElement& b) const {
  check_same(a, b);
  Word w(a.word().rbegin(), a.word().rend());
  for (Letter s : b.word()) push_letter(w, s, blockers_);
  return w.size();
}

Word Group::geodesic_word(const GroupElement& a, const GroupElement& b) const {
  return multiply(invert(a), b).word();
}

GeodesicList Group::all_geodesics(const GroupElement& a, const GroupElement& b,
                                  std::size_t cap) const {
  // A geodesic from a to b spells a^-1 b letter by letter; at each step the
  // next letter must be a left descent of what remains.
  GeodesicList out;
  Word remaining = geodesic_word(a, b);
  Word prefix;
  auto dfs = [&](auto&& self, const Word& rest) -> void {
    if (out.truncated) return;
    if (rest.empty()) {
      if (out.words.size() >= cap) {
        out.truncated = true;
        return;
      }
      out.words.push_back(prefix);
      return;
    }
    VertexSet blocked = 0;
    VertexSet tried = 0;
    std::vector<std::pair<Letter, std::size_t>> descents;
    for (std::size_t p = 0; p < rest.size(); ++p) {
      Letter s = rest[p];
      if (!((blocked >> s) & 1U) && !((tried >> s) & 1U)) {
        descents.emplace_back(s, p);
        tried |= vertex_bit(s);
      }
      blocked |= blockers_[s];
    }
    std::sort(descents.begin(), descents.end());
    for (auto [s, p] : descents) {
      Word next = rest;
      next.erase(next.begin() + static_cast<std::ptrdiff_t>(p));
      prefix.push_back(s);
      self(self, next);
      prefix.pop_back();
      if (out.truncated) return;
    }
  };
  dfs(dfs, remaining);
  return out;
}

std::vector<GroupElement> Group::vertex_path(const GroupElement& start,
                                             std::span<const Letter> word) const {
  std::vector<GroupElement> out{start};
  for (Letter s : word) out.push_back(multiply(out.back(), s));
  return out;
}

Word Group::parse_word(std::string_view text) const {
  Word w;
  if (text.empty()) return w;
  std::size_t start = 0;
  while (true) {
    auto dot = text.find('.', start);
    auto token = text.substr(start, dot == std::string_view::npos ? dot : dot - start);
    auto idx = graph_.index_of(token);
    if (!idx) throw ValidationError("unknown generator '" + std::string(token) + "' in word");
    w.push_back(static_cast<Letter>(*idx));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return w;
}

std::string Group::format(std::span<const Letter> word) const {
  std::string out;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (i) out += '.';
    out += graph_.label(word[i]);
  }
  return out;
}

std::optional<std::uint32_t> BallIndex::rank_of(const GroupElement& g) const {
  if (g.group_id() != group.id()) return std::nullopt;
  auto it = index.find(g.word());
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::uint32_t BallIndex::require_rank(const GroupElement& g) const {
  auto r = rank_of(g);
  if (!r)
    throw ValidationError("element '" + group.format(g) + "' lies outside the ball of radius " +
                          std::to_string(radius));
  return *r;
}

std::vector<std::size_t> BallIndex::sphere_sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(radius) + 1, 0);
  for (const auto& g : elements) ++out[g.length()];
  return out;
}

std::size_t BallIndex::count_within(int r) const {
  if (r >= radius) return elements.size();
  if (r < 0) return 0;
  auto it = std::partition_point(elements.begin(), elements.end(), [r](const GroupElement& g) {
    return g.length() <= static_cast<std::size_t>(r);
  });
  return static_cast<std::size_t>(it - elements.begin());
}

std::size_t default_ball_cap() {
  if (const char* env = std::getenv("LAB_MEM_CAP")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 20'000'000;
}

BallIndex enumerate_ball(const Group& group, int radius, std::size_t cap) {
  if (radius < 0) throw ValidationError("ball radius must be non-negative");
  BallIndex ball{group, radius, {}, {}, {}};
  const std::size_t k = group.rank();
  ball.elements.push_back(group.identity());
  ball.index.emplace(Word{}, 0);
  ball.adjacency.assign(k, BallIndex::kOutside);
  // BFS: elements are appended in discovery order, so processing them in
  // index order is the queue. Lengths change by exactly one along an edge, so
  // linking both ends when an edge is first seen fills every in-ball slot.
  for (std::size_t i = 0; i < ball.elements.size(); ++i) {
    if (ball.elements[i].length() == static_cast<std::size_t>(radius)) break;
    for (std::size_t s = 0; s < k; ++s) {
      if (ball.adjacency[i * k + s] != BallIndex::kOutside) continue;
      GroupElement next = group.multiply(ball.elements[i], static_cast<Letter>(s));
      auto [it, inserted] =
          ball.index.try_emplace(next.word(), static_cast<std::uint32_t>(ball.elements.size()));
      if (inserted) {
        if (ball.elements.size() >= cap)
          throw BudgetExceeded("ball of radius " + std::to_string(radius) + " exceeds " +
                               std::to_string(cap) + " elements");
        ball.elements.push_back(std::move(next));
        ball.adjacency.resize(ball.elements.size() * k, BallIndex::kOutside);
      }
      ball.adjacency[i * k + s] = it->second;
      ball.adjacency[static_cast<std::size_t>(it->second) * k + s] = static_cast<std::uint32_t>(i);
    }
  }
  return ball;
}

CriticalExponent critical_exponent_estimate(const Group& group, int radius, std::size_t cap) {
  if (radius < 2) throw ValidationError("critical exponent needs radius >= 2");
  BallIndex ball = enumerate_ball(group, radius, cap);
  CriticalExponent out;
  std::size_t total = 0;
  for (std::size_t n : ball.sphere_sizes()) {
    total += n;
    out.ball_sizes.push_back(total);
  }
  for (int r = 1; r <= radius; ++r)
    out.sequence.push_back(std::log(static_cast<double>(out.ball_sizes[r])) / r);
  out.estimate = out.sequence.back();
  return out;
}

}  // namespace racglab
