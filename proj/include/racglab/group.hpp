#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "racglab/graph.hpp"

namespace racglab {

using Letter = std::uint8_t;
using Word = std::vector<Letter>;

struct WordHash {
  std::size_t operator()(const Word& w) const noexcept {
    return std::hash<std::string_view>{}(
        std::string_view(reinterpret_cast<const char*>(w.data()), w.size()));
  }
};

// An element of a right-angled Coxeter group, held as its ShortLex-least
// geodesic word. Only Group constructs these, so the word is always canonical.
class GroupElement {
 public:
  GroupElement() = default;

  const Word& word() const { return word_; }
  std::size_t length() const { return word_.size(); }
  bool is_identity() const { return word_.empty(); }
  std::uint32_t group_id() const { return group_id_; }

  friend bool operator==(const GroupElement& a, const GroupElement& b) {
    return a.group_id_ == b.group_id_ && a.word_ == b.word_;
  }
  // ShortLex.
  friend std::strong_ordering operator<=>(const GroupElement& a, const GroupElement& b) {
    if (auto c = a.word_.size() <=> b.word_.size(); c != 0) return c;
    return a.word_ <=> b.word_;
  }

 private:
  friend class Group;
  GroupElement(std::uint32_t group_id, Word word) : group_id_(group_id), word_(std::move(word)) {}

  std::uint32_t group_id_ = 0;
  Word word_;
};

struct ElementHash {
  std::size_t operator()(const GroupElement& g) const noexcept { return WordHash{}(g.word()); }
};

struct GeodesicList {
  std::vector<Word> words;
  bool truncated = false;
};

class Group {
 public:
  explicit Group(DefiningGraph graph);

  const DefiningGraph& graph() const { return graph_; }
  std::size_t rank() const { return graph_.size(); }
  std::uint32_t id() const { return id_; }

  // Distinct generators joined by an edge.
  bool commute(Letter a, Letter b) const { return a != b && graph_.adjacent(a, b); }

  GroupElement identity() const { return GroupElement(id_, {}); }
  GroupElement generator(Letter s) const;

  // Tits deletions only: the result is geodesic but not necessarily ShortLex-least.
  Word reduce(std::span<const Letter> raw) const;
  // ShortLex-least rearrangement of a reduced word.
  Word lex_normal(std::span<const Letter> reduced) const;
  GroupElement canonicalize(std::span<const Letter> raw) const;
  // Appends s to a reduced word, cancelling it against an earlier s when possible.
  void push_reduced(Word& reduced, Letter s) const;

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const;
  GroupElement multiply(const GroupElement& a, Letter s) const;
  GroupElement left_multiply(Letter s, const GroupElement& a) const;
  GroupElement invert(const GroupElement& a) const;
  GroupElement conjugate(const GroupElement& g, const GroupElement& x) const;  // g x g^-1
  // Negative exponents use the inverse.
  GroupElement power(const GroupElement& a, long n) const;

  std::size_t distance(const GroupElement& a, const GroupElement& b) const;
  // Canonical word of a^-1 b; read as the vertex path a, a s1, a s1 s2, ..., b.
  Word geodesic_word(const GroupElement& a, const GroupElement& b) const;
  GeodesicList all_geodesics(const GroupElement& a, const GroupElement& b,
                             std::size_t cap = 100000) const;
  // Vertices start, start*w[0], start*w[0]w[1], ...
  std::vector<GroupElement> vertex_path(const GroupElement& start,
                                        std::span<const Letter> word) const;

  // Words are vertex labels joined by '.', the empty string is the identity.
  Word parse_word(std::string_view text) const;
  GroupElement parse(std::string_view text) const { return canonicalize(parse_word(text)); }
  std::string format(std::span<const Letter> word) const;
  std::string format(const GroupElement& g) const { return format(g.word()); }

 private:
  void check_same(const GroupElement& a) const;
  void check_same(const GroupElement& a, const GroupElement& b) const;

  DefiningGraph graph_;
  std::vector<VertexSet> blockers_;  // generators not commuting with s, s included
  std::uint32_t id_;
};

// All elements within a radius of the identity, in BFS order, with the right
// Cayley-graph action of every generator.
struct BallIndex {
  static constexpr std::uint32_t kOutside = std::numeric_limits<std::uint32_t>::max();

  Group group;
  int radius = 0;
  std::vector<GroupElement> elements;
  std::vector<std::uint32_t> adjacency;  // rank * group.rank() + s
  std::unordered_map<Word, std::uint32_t, WordHash> index;

  std::size_t size() const { return elements.size(); }
  std::size_t generators() const { return group.rank(); }
  std::uint32_t neighbour(std::uint32_t rank, Letter s) const {
    return adjacency[static_cast<std::size_t>(rank) * group.rank() + s];
  }
  std::optional<std::uint32_t> rank_of(const GroupElement& g) const;
  std::uint32_t require_rank(const GroupElement& g) const;  // throws ValidationError
  std::vector<std::size_t> sphere_sizes() const;
  // Number of elements of length <= r (BFS order makes these a prefix).
  std::size_t count_within(int r) const;
};

// Element cap from LAB_MEM_CAP, default 2e7.
std::size_t default_ball_cap();

// Throws BudgetExceeded when the ball would exceed `cap` elements.
BallIndex enumerate_ball(const Group& group, int radius, std::size_t cap = default_ball_cap());

struct CriticalExponent {
  double estimate = 0.0;
  std::vector<double> sequence;      // log|N(R)| / R for R = 1..radius
  std::vector<std::size_t> ball_sizes;  // |N(R)| for R = 0..radius
};

CriticalExponent critical_exponent_estimate(const Group& group, int radius,
                                            std::size_t cap = default_ball_cap());

}  // namespace racglab
