#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "racglab/group.hpp"

namespace racglab {

// Sorted (ShortLex), duplicate-free, nonempty.
using FiniteSubset = std::vector<GroupElement>;

FiniteSubset make_subset(std::vector<GroupElement> points);

// Vertices of the path start, start*w[0], ... after checking the word is geodesic.
FiniteSubset path_subset(const Group& group, const GroupElement& start, const Word& word);
std::vector<GroupElement> geodesic_points(const Group& group, const GroupElement& start,
                                          const Word& word);

std::size_t distance_to(const Group& group, const GroupElement& x, const FiniteSubset& y);
std::size_t set_distance(const Group& group, const FiniteSubset& a, const FiniteSubset& b);
std::size_t diameter(const Group& group, const FiniteSubset& s);

// Nearest-point projection by exact distance.
FiniteSubset project(const Group& group, const GroupElement& x, const FiniteSubset& y);
FiniteSubset project_set(const Group& group, const FiniteSubset& xs, const FiniteSubset& y);

// Every element within distance t of y.
FiniteSubset neighbourhood(const Group& group, const FiniteSubset& y, int t,
                           std::size_t cap = default_ball_cap());

// Least D with diam(pi(x) u pi(y)) <= D whenever x, y in test_set and
// d(x, y) <= d(x, Y). Scanning stops early once the value exceeds stop_above.
std::size_t empirical_contraction_constant(const Group& group, const FiniteSubset& y,
                                           const FiniteSubset& test_set,
                                           std::size_t stop_above = SIZE_MAX);

// Test set: the scale-t neighbourhood of y.
bool is_D_contracting_at_scale(const Group& group, const FiniteSubset& y, std::size_t d, int t,
                               std::size_t cap = default_ball_cap());

// Letter intervals [begin, end) of a word.
using Interval = std::pair<std::size_t, std::size_t>;

struct Decomposition {
  std::vector<Interval> segments;
  std::size_t word_length = 0;
  std::size_t contraction_length = 0;
  std::size_t d = 0, l = 0;
  int scale = 0;

  double proportion() const {
    return word_length == 0 ? 0.0 : static_cast<double>(contraction_length) / word_length;
  }
  nlohmann::json to_json() const;
};

// qualifies(i, j) for 0 <= i < j <= n. Maximum total length of letter-disjoint
// qualifying intervals inside [lo, hi); among optimal packings the first segment
// starts as early as possible, then is as long as possible.
std::vector<Interval> optimal_packing(std::size_t lo, std::size_t hi,
                                      const std::function<bool(std::size_t, std::size_t)>& qualifies);

// Cached qualification of every subinterval of one geodesic.
class ContractionTable {
 public:
  ContractionTable(const Group& group, const GroupElement& start, const Word& word, std::size_t d,
                   std::size_t l, int scale, std::size_t cap = default_ball_cap());

  std::size_t size() const { return n_; }
  bool qualifies(std::size_t i, std::size_t j) const { return table_[i * (n_ + 1) + j] != 0; }
  Decomposition decompose(std::size_t lo, std::size_t hi) const;

 private:
  std::size_t n_, d_, l_;
  int scale_;
  std::vector<char> table_;
};

Decomposition decompose_DL(const Group& group, const GroupElement& start, const Word& word,
                           std::size_t d, std::size_t l, int scale,
                           std::size_t cap = default_ball_cap());

struct GoodPointParams {
  double theta = 0.5;
  std::size_t r = 1;
  std::size_t d = 0, l = 1;
  int scale = 0;
};

struct GoodPointReport {
  Word geodesic;
  GoodPointParams params;
  std::vector<std::size_t> good_indices;
  nlohmann::json to_json(const Group& group) const;
};

GoodPointReport good_points(const Group& group, const GroupElement& start, const Word& word,
                            const GoodPointParams& params, std::size_t cap = default_ball_cap());
GoodPointReport good_points(const ContractionTable& table, const Word& word,
                            const GoodPointParams& params);

bool is_narrow_at(const Group& group, const FiniteSubset& y1, const FiniteSubset& y2,
                  const GroupElement& z, std::size_t s);

// Every geodesic between every y1, y2 meets the ball B(z, r0). Throws
// BudgetExceeded when a pair has more than `cap` geodesics.
bool narrow_geodesic_oracle(const Group& group, const FiniteSubset& y1, const FiniteSubset& y2,
                            const GroupElement& z, std::size_t r0, std::size_t cap = 100000);

bool antipodal(const Group& group, const GroupElement& x, const GroupElement& y,
               const FiniteSubset& y1, const FiniteSubset& y2, const GroupElement& z, double k);

// Elements h of the search ball with h and h*f within r of the path.
std::vector<GroupElement> barriers(const Group& group, const std::vector<GroupElement>& path,
                                   const GroupElement& f, std::size_t r, const BallIndex& search);

// (P1, Q1, P2, ..., Qn, Pn+1). Empty result means admissible.
std::vector<std::string> validate_admissible(const Group& group,
                                             const std::vector<FiniteSubset>& sequence,
                                             std::size_t d, std::size_t b, int scale,
                                             std::size_t cap = default_ball_cap());

}  // namespace racglab
