#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <gmpxx.h>
#include <nlohmann/json.hpp>

#include "racglab/group.hpp"

namespace racglab {

// Finitely supported symmetric measure: mass on each generator plus holding on e.
struct MeasureSpec {
  std::vector<double> weights;  // indexed by generator
  double holding = 0.0;

  static MeasureSpec uniform(const DefiningGraph& g, double lazy = 0.0);
  // {"weights": {"a": 0.25, ...}, "holding": 0.0}
  static MeasureSpec parse(const DefiningGraph& g, const std::string& text);
  static MeasureSpec load(const DefiningGraph& g, const std::string& path);

  // Throws ValidationError unless every weight is positive and the total is 1.
  void validate(std::size_t rank) const;
  // Weights as rationals: small-denominator fractions when a double is within
  // 1e-14 of one (so 1/3 stays 1/3), otherwise the exact binary value.
  std::vector<mpq_class> rational_weights() const;
  mpq_class rational_holding() const;
  nlohmann::json to_json(const DefiningGraph& g) const;
};

// Omega: the ball minus a forbidden set. Forbidden points may still be endpoints.
class Domain {
 public:
  explicit Domain(std::shared_ptr<const BallIndex> ball);

  const BallIndex& ball() const { return *ball_; }
  std::shared_ptr<const BallIndex> ball_ptr() const { return ball_; }
  const Group& group() const { return ball_->group; }
  bool allowed(std::uint32_t rank) const { return !forbidden_[rank]; }
  std::size_t forbidden_count() const;

  Domain& forbid(const GroupElement& g);
  Domain& forbid_rank(std::uint32_t rank);
  // Every ball element within distance r of z (exact word metric).
  Domain& forbid_ball(const GroupElement& z, std::size_t r);

  nlohmann::json descriptor() const;

 private:
  std::shared_ptr<const BallIndex> ball_;
  std::vector<char> forbidden_;
  std::vector<std::string> notes_;
};

struct GreenValue {
  double value = 0.0;
  GroupElement from, to;
  nlohmann::json domain;
  int n_max = 0;
  double last_term = 0.0;   // mass of the final two steps (covers period-2 walks)
  double tail_ratio = 0.0;  // per-step geometric decay fitted on the last four terms
  nlohmann::json to_json(const Group& group) const;
};

// Exact restricted Green values from one source to every ball element.
struct GreenRow {
  std::vector<double> value;
  std::vector<double> tail[4];  // u_N, u_{N-1}, u_{N-2}, u_{N-3}
  double retained = 0.0, leaked = 0.0, masked = 0.0;
};

// Caches one DP row per source. Values are independent of the thread count.
class GreenSolver {
 public:
  GreenSolver(Domain domain, MeasureSpec mu, int steps, unsigned threads = 1);

  const Domain& domain() const { return domain_; }
  const MeasureSpec& measure() const { return mu_; }
  int steps() const { return steps_; }

  const GreenRow& row(const GroupElement& source);
  const GreenRow& row_rank(std::uint32_t source);
  double green(const GroupElement& x, const GroupElement& y);
  GreenValue value(const GroupElement& x, const GroupElement& y);
  std::size_t cached_rows() const { return rows_.size(); }
  void drop_row(const GroupElement& source);

 private:
  bool cached(std::uint32_t rank);
  std::pair<std::uint32_t, std::uint32_t> orient(const GroupElement& x, const GroupElement& y);

  Domain domain_;
  MeasureSpec mu_;
  int steps_;
  unsigned threads_;
  std::mutex mutex_;
  std::map<std::uint32_t, std::unique_ptr<GreenRow>> rows_;
};

GreenValue restricted_green(const GroupElement& x, const GroupElement& y, const Domain& dom,
                            const MeasureSpec& mu, int steps, unsigned threads = 1);

// Per-length terms of the restricted Green function, n = 0..steps.
std::vector<double> green_series(const GroupElement& x, const GroupElement& y, const Domain& dom,
                                 const MeasureSpec& mu, int steps);
std::vector<mpq_class> green_series_exact(const GroupElement& x, const GroupElement& y,
                                          const Domain& dom, const MeasureSpec& mu, int steps);
mpq_class restricted_green_exact(const GroupElement& x, const GroupElement& y, const Domain& dom,
                                 const MeasureSpec& mu, int steps);

// |G(x,z; Omega) - G(x,z; Omega \ {z}) G(z,z; Omega)| with the product truncated
// at total depth <= steps. Zero up to rounding.
double green_identity_check(const GroupElement& x, const GroupElement& z, const Domain& dom,
                            const MeasureSpec& mu, int steps);
mpq_class green_identity_check_exact(const GroupElement& x, const GroupElement& z,
                                     const Domain& dom, const MeasureSpec& mu, int steps);

// Largest |retained + leaked + masked - 1| over the DP steps from x.
double mass_conservation_defect(const GroupElement& x, const Domain& dom, const MeasureSpec& mu,
                                int steps);

struct McEstimate {
  double estimate = 0.0;
  double half_width = 0.0;  // CLT 95%
  std::size_t walks = 0;
  int steps = 0;
  std::uint64_t seed = 0;
};

// Counter-based stream: SplitMix64 finaliser over (seed, stream, counter).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}
  std::uint64_t next() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Visits to y (time 0 included) over walks of `steps` steps from x in the full group.
McEstimate mc_green(const Group& group, const GroupElement& x, const GroupElement& y,
                    const MeasureSpec& mu, int steps, std::size_t walks, std::uint64_t seed,
                    unsigned threads = 1);

// r_n = p_{2n}(e,e)^{1/(2n)} in the ball, n = 1..n_max.
std::vector<double> spectral_radius_lower(const MeasureSpec& mu, const Domain& dom, int n_max);

// K_y(x) = G(x,y) / G(e,y). Throws BudgetExceeded when G(e,y) underflows.
double martin_kernel(GreenSolver& solver, const GroupElement& x, const GroupElement& y);

struct KernelSeries {
  std::vector<double> values;       // K_{g^n}(x), n = 1..n_max
  std::vector<double> differences;  // |K_{n+1} - K_n|
};
// Throws ValidationError when g^n leaves the ball.
KernelSeries kernel_series_along(GreenSolver& solver, const GroupElement& g, const GroupElement& x,
                                 int n_max);

// G(x,y) G(z,z) / (G(x,z) G(z,y)).
double ancona_ratio(GreenSolver& solver, const GroupElement& x, const GroupElement& z,
                    const GroupElement& y);

// G(x,y; Omega \ B(z,R)) / G(x,y; Omega).
double deviation_ratio(const GroupElement& x, const GroupElement& y, const GroupElement& z,
                       std::size_t r, GreenSolver& solver);

}  // namespace racglab
