#include "racglab/walk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "racglab/errors.hpp"

namespace racglab {

namespace {

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads <= 1 || n < 8192) {
    f(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(f, b, std::min(n, b + chunk));
  for (auto& t : pool) t.join();
}

mpq_class to_rational(double x) {
  if (x == 0.0) return 0;
  // Continued-fraction convergents h/k of x.
  double r = x;
  mpz_class h0 = 1, h1 = 0, k0 = 0, k1 = 1;
  for (int iter = 0; iter < 40; ++iter) {
    double a = std::floor(r);
    mpz_class ai = static_cast<long>(a);
    mpz_class h = ai * h0 + h1, k = ai * k0 + k1;
    h1 = h0;
    h0 = h;
    k1 = k0;
    k0 = k;
    if (k0 > 1000000) break;
    if (std::abs(x - h0.get_d() / k0.get_d()) <= 1e-14) return mpq_class(h0, k0);
    if (r - a < 1e-300) break;
    r = 1.0 / (r - a);
  }
  return mpq_class(x);
}

// One walk from src through `steps` steps. visit(n, u) sees the mass at time n
// before interior masking; the start is never masked.
template <class T, class Visit>
void run_walk(const Domain& dom, const std::vector<T>& w, const T& hold, std::uint32_t src,
              int steps, unsigned threads, Visit&& visit) {
  const BallIndex& ball = dom.ball();
  const std::size_t n = ball.size();
  const std::size_t k = ball.generators();
  std::vector<T> u(n, T(0)), next(n, T(0));
  u[src] = T(1);
  for (int step = 0; step <= steps; ++step) {
    visit(step, u);
    if (step == steps) break;
    if (step > 0)
      for (std::size_t r = 0; r < n; ++r)
        if (!dom.allowed(static_cast<std::uint32_t>(r))) u[r] = T(0);
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t r = b; r < e; ++r) {
        T acc = hold * u[r];
        for (std::size_t s = 0; s < k; ++s) {
          auto nb = ball.adjacency[r * k + s];
          if (nb != BallIndex::kOutside) acc += w[s] * u[nb];
        }
        next[r] = acc;
      }
    });
    std::swap(u, next);
  }
}

std::uint32_t rank_in(const Domain& dom, const GroupElement& g) { return dom.ball().require_rank(g); }

template <class T>
std::vector<T> series_of(const GroupElement& x, const GroupElement& y, const Domain& dom,
                         const std::vector<T>& w, const T& hold, int steps) {
  auto src = rank_in(dom, x);
  auto dst = rank_in(dom, y);
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  run_walk<T>(dom, w, hold, src, steps, 1,
              [&](int, const std::vector<T>& u) { out.push_back(u[dst]); });
  return out;
}

template <class T>
T split_residual(const std::vector<T>& c, const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = c.size();
  std::vector<T> prefix(n, T(0));
  T run(0);
  for (std::size_t j = 0; j < n; ++j) prefix[j] = (run += b[j]);
  T lhs(0), rhs(0);
  for (std::size_t i = 0; i < n; ++i) {
    lhs += c[i];
    rhs += a[i] * prefix[n - 1 - i];
  }
  T diff = lhs - rhs;
  return diff < 0 ? T(-diff) : diff;
}

template <class T>
std::vector<T> first_passage(const GroupElement& x, const GroupElement& z, const Domain& dom,
                             const std::vector<T>& w, const T& hold, int steps) {
  if (x == z) {
    std::vector<T> delta(static_cast<std::size_t>(steps) + 1, T(0));
    delta[0] = T(1);
    return delta;
  }
  Domain avoid = dom;
  avoid.forbid(z);
  return series_of<T>(x, z, avoid, w, hold, steps);
}

}  // namespace

// ---- MeasureSpec ----

MeasureSpec MeasureSpec::uniform(const DefiningGraph& g, double lazy) {
  if (!(lazy >= 0.0 && lazy < 1.0)) throw ValidationError("lazy holding must lie in [0, 1)");
  MeasureSpec m;
  m.holding = lazy;
  m.weights.assign(g.size(), (1.0 - lazy) / static_cast<double>(g.size()));
  return m;
}

MeasureSpec MeasureSpec::parse(const DefiningGraph& g, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("measure: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("weights") || !j["weights"].is_object())
    throw ValidationError("measure: expected an object with a \"weights\" object");
  MeasureSpec m;
  m.weights.assign(g.size(), 0.0);
  std::vector<char> seen(g.size(), 0);
  for (const auto& [label, value] : j["weights"].items()) {
    auto v = g.index_of(label);
    if (!v) throw ValidationError("measure: unknown generator '" + label + "'");
    if (!value.is_number()) throw ValidationError("measure: weight of '" + label + "' is not a number");
    m.weights[*v] = value.get<double>();
    seen[*v] = 1;
  }
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!seen[v]) throw ValidationError("measure: generator '" + g.label(v) + "' has no weight");
  if (j.contains("holding")) {
    if (!j["holding"].is_number()) throw ValidationError("measure: holding is not a number");
    m.holding = j["holding"].get<double>();
  }
  m.validate(g.size());
  return m;
}

MeasureSpec MeasureSpec::load(const DefiningGraph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(g, ss.str());
}

void MeasureSpec::validate(std::size_t rank) const {
  if (weights.size() != rank) throw ValidationError("measure: one weight per generator required");
  double total = holding;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("measure: weights must be positive");
    total += w;
  }
  if (!(holding >= 0.0)) throw ValidationError("measure: holding must be non-negative");
  if (std::abs(total - 1.0) > 1e-12)
    throw ValidationError("measure: total mass is " + std::to_string(total) + ", not 1");
}

std::vector<mpq_class> MeasureSpec::rational_weights() const {
  std::vector<mpq_class> out;
  for (double w : weights) out.push_back(to_rational(w));
  return out;
}

mpq_class MeasureSpec::rational_holding() const { return to_rational(holding); }

nlohmann::json MeasureSpec::to_json(const DefiningGraph& g) const {
  nlohmann::json w = nlohmann::json::object();
  for (std::size_t v = 0; v < weights.size(); ++v) w[g.label(v)] = weights[v];
  return {{"weights", w}, {"holding", holding}};
}

// ---- Domain ----

Domain::Domain(std::shared_ptr<const BallIndex> ball)
    : ball_(std::move(ball)), forbidden_(ball_->size(), 0) {}

std::size_t Domain::forbidden_count() const {
  return static_cast<std::size_t>(std::count(forbidden_.begin(), forbidden_.end(), 1));
}

Domain& Domain::forbid(const GroupElement& g) {
  forbidden_[ball_->require_rank(g)] = 1;
  notes_.push_back("forbid " + group().format(g));
  return *this;
}

Domain& Domain::forbid_rank(std::uint32_t rank) {
  if (rank >= forbidden_.size()) throw ValidationError("rank outside the ball");
  forbidden_[rank] = 1;
  return *this;
}

Domain& Domain::forbid_ball(const GroupElement& z, std::size_t r) {
  const auto& g = group();
  for (std::size_t i = 0; i < ball_->size(); ++i) {
    const auto& el = ball_->elements[i];
    auto gap = el.length() > z.length() ? el.length() - z.length() : z.length() - el.length();
    if (gap <= r && g.distance(el, z) <= r) forbidden_[i] = 1;
  }
  notes_.push_back("avoid-ball " + g.format(z) + "," + std::to_string(r));
  return *this;
}

nlohmann::json Domain::descriptor() const {
  return {{"radius", ball_->radius},
          {"size", ball_->size()},
          {"forbidden", forbidden_count()},
          {"constraints", notes_}};
}

// ---- Green functions ----

nlohmann::json GreenValue::to_json(const Group& group) const {
  return {{"value", value},         {"from", group.format(from)}, {"to", group.format(to)},
          {"domain", domain},       {"n_max", n_max},           {"last_term", last_term},
          {"tail_ratio", tail_ratio}};
}

GreenSolver::GreenSolver(Domain domain, MeasureSpec mu, int steps, unsigned threads)
    : domain_(std::move(domain)), mu_(std::move(mu)), steps_(steps), threads_(std::max(1U, threads)) {
  if (steps < 0) throw ValidationError("step count must be non-negative");
  mu_.validate(domain_.group().rank());
}

const GreenRow& GreenSolver::row(const GroupElement& source) {
  return row_rank(rank_in(domain_, source));
}

const GreenRow& GreenSolver::row_rank(std::uint32_t src) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = rows_.find(src);
    if (it != rows_.end()) return *it->second;
  }
  const BallIndex& ball = domain_.ball();
  const std::size_t n = ball.size(), k = ball.generators();
  auto out = std::make_unique<GreenRow>();
  out->value.assign(n, 0.0);
  for (auto& t : out->tail) t.assign(n, 0.0);
  // Per-rank mass that steps out of the ball.
  std::vector<double> boundary(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t s = 0; s < k; ++s)
      if (ball.adjacency[r * k + s] == BallIndex::kOutside) boundary[r] += mu_.weights[s];

  run_walk<double>(domain_, mu_.weights, mu_.holding, src, steps_, threads_,
                   [&](int step, const std::vector<double>& u) {
                     for (std::size_t r = 0; r < n; ++r) out->value[r] += u[r];
                     int back = steps_ - step;
                     if (back < 4) out->tail[back] = u;
                     if (step < steps_) {
                       for (std::size_t r = 0; r < n; ++r) {
                         if (step > 0 && !domain_.allowed(static_cast<std::uint32_t>(r))) {
                           out->masked += u[r];
                           continue;
                         }
                         out->leaked += u[r] * boundary[r];
                       }
                     } else {
                       for (std::size_t r = 0; r < n; ++r) out->retained += u[r];
                     }
                   });
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = rows_.emplace(src, std::move(out));
  return *it->second;
}

void GreenSolver::drop_row(const GroupElement& source) {
  auto r = rank_in(domain_, source);
  std::lock_guard<std::mutex> lock(mutex_);
  rows_.erase(r);
}

bool GreenSolver::cached(std::uint32_t rank) {
  std::lock_guard<std::mutex> lock(mutex_);
  return rows_.count(rank) != 0;
}

// G is symmetric, so either endpoint's row will do.
std::pair<std::uint32_t, std::uint32_t> GreenSolver::orient(const GroupElement& x,
                                                            const GroupElement& y) {
  auto a = rank_in(domain_, x), b = rank_in(domain_, y);
  if (!cached(a) && cached(b)) std::swap(a, b);
  return {a, b};
}

double GreenSolver::green(const GroupElement& x, const GroupElement& y) {
  auto [src, dst] = orient(x, y);
  return row_rank(src).value[dst];
}

GreenValue GreenSolver::value(const GroupElement& x, const GroupElement& y) {
  auto [src, dst] = orient(x, y);
  const auto& r = row_rank(src);
  GreenValue v;
  v.value = r.value[dst];
  v.from = x;
  v.to = y;
  v.domain = domain_.descriptor();
  v.n_max = steps_;
  v.last_term = r.tail[0][dst] + r.tail[1][dst];
  double earlier = r.tail[2][dst] + r.tail[3][dst];
  v.tail_ratio = earlier > 0.0 ? std::sqrt(v.last_term / earlier) : 0.0;
  return v;
}

GreenValue restricted_green(const GroupElement& x, const GroupElement& y, const Domain& dom,
                            const MeasureSpec& mu, int steps, unsigned threads) {
  GreenSolver solver(dom, mu, steps, threads);
  return solver.value(x, y);
}

std::vector<double> green_series(const GroupElement& x, const GroupElement& y, const Domain& dom,
                                 const MeasureSpec& mu, int steps) {
  mu.validate(dom.group().rank());
  return series_of<double>(x, y, dom, mu.weights, mu.holding, steps);
}

std::vector<mpq_class> green_series_exact(const GroupElement& x, const GroupElement& y,
                                          const Domain& dom, const MeasureSpec& mu, int steps) {
  mu.validate(dom.group().rank());
  return series_of<mpq_class>(x, y, dom, mu.rational_weights(), mu.rational_holding(), steps);
}

mpq_class restricted_green_exact(const GroupElement& x, const GroupElement& y, const Domain& dom,
                                 const MeasureSpec& mu, int steps) {
  mpq_class total = 0;
  for (const auto& t : green_series_exact(x, y, dom, mu, steps)) total += t;
  return total;
}

double green_identity_check(const GroupElement& x, const GroupElement& z, const Domain& dom,
                            const MeasureSpec& mu, int steps) {
  mu.validate(dom.group().rank());
  const auto& w = mu.weights;
  auto c = series_of<double>(x, z, dom, w, mu.holding, steps);
  auto a = first_passage<double>(x, z, dom, w, mu.holding, steps);
  auto b = series_of<double>(z, z, dom, w, mu.holding, steps);
  return split_residual(c, a, b);
}

mpq_class green_identity_check_exact(const GroupElement& x, const GroupElement& z,
                                     const Domain& dom, const MeasureSpec& mu, int steps) {
  mu.validate(dom.group().rank());
  auto w = mu.rational_weights();
  auto h = mu.rational_holding();
  auto c = series_of<mpq_class>(x, z, dom, w, h, steps);
  auto a = first_passage<mpq_class>(x, z, dom, w, h, steps);
  auto b = series_of<mpq_class>(z, z, dom, w, h, steps);
  return split_residual(c, a, b);
}

double mass_conservation_defect(const GroupElement& x, const Domain& dom, const MeasureSpec& mu,
                                int steps) {
  mu.validate(dom.group().rank());
  const BallIndex& ball = dom.ball();
  const std::size_t n = ball.size(), k = ball.generators();
  std::vector<double> boundary(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t s = 0; s < k; ++s)
      if (ball.adjacency[r * k + s] == BallIndex::kOutside) boundary[r] += mu.weights[s];
  double leaked = 0.0, masked = 0.0, worst = 0.0;
  run_walk<double>(dom, mu.weights, mu.holding, rank_in(dom, x), steps, 1,
                   [&](int step, const std::vector<double>& u) {
                     double retained = 0.0;
                     for (std::size_t r = 0; r < n; ++r) retained += u[r];
                     worst = std::max(worst, std::abs(retained + leaked + masked - 1.0));
                     for (std::size_t r = 0; r < n; ++r) {
                       if (step > 0 && !dom.allowed(static_cast<std::uint32_t>(r))) {
                         masked += u[r];
                         continue;
                       }
                       leaked += u[r] * boundary[r];
                     }
                   });
  return worst;
}

// ---- Monte Carlo ----

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

McEstimate mc_green(const Group& group, const GroupElement& x, const GroupElement& y,
                    const MeasureSpec& mu, int steps, std::size_t walks, std::uint64_t seed,
                    unsigned threads) {
  mu.validate(group.rank());
  if (walks < 100) throw ValidationError("mc_green needs at least 100 walks");
  if (steps < 0) throw ValidationError("step count must be non-negative");
  std::vector<double> cumulative;
  double acc = mu.holding;
  for (double w : mu.weights) cumulative.push_back(acc += w);

  threads = std::max(1U, threads);
  std::vector<unsigned long long> sum(threads, 0), sum_sq(threads, 0);
  auto worker = [&](unsigned t, std::size_t begin, std::size_t end) {
    for (std::size_t walk = begin; walk < end; ++walk) {
      CounterRng rng(seed, walk);
      Word cur = x.word();
      bool here = x == y;
      unsigned long long visits = here ? 1 : 0;
      for (int step = 0; step < steps; ++step) {
        double u = rng.uniform();
        if (u >= mu.holding) {
          auto s = static_cast<Letter>(
              std::min<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                        cumulative.begin(),
                                    mu.weights.size() - 1));
          group.push_reduced(cur, s);
          here = cur.size() == y.length() && group.lex_normal(cur) == y.word();
        }
        if (here) ++visits;
      }
      sum[t] += visits;
      sum_sq[t] += visits * visits;
    }
  };
  if (threads == 1) {
    worker(0, 0, walks);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (walks + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(worker, t, std::min(walks, t * chunk), std::min(walks, (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }
  unsigned long long total = 0, total_sq = 0;
  for (unsigned t = 0; t < threads; ++t) {
    total += sum[t];
    total_sq += sum_sq[t];
  }
  McEstimate out;
  out.walks = walks;
  out.steps = steps;
  out.seed = seed;
  const double k = static_cast<double>(walks);
  out.estimate = static_cast<double>(total) / k;
  double var = (static_cast<double>(total_sq) - k * out.estimate * out.estimate) / (k - 1.0);
  out.half_width = 1.96 * std::sqrt(std::max(0.0, var) / k);
  return out;
}

// ---- Spectral radius, kernels, ratios ----

std::vector<double> spectral_radius_lower(const MeasureSpec& mu, const Domain& dom, int n_max) {
  mu.validate(dom.group().rank());
  if (n_max < 1) throw ValidationError("n_max must be positive");
  std::vector<double> out;
  run_walk<double>(dom, mu.weights, mu.holding, 0, 2 * n_max, 1,
                   [&](int step, const std::vector<double>& u) {
                     if (step > 0 && step % 2 == 0)
                       out.push_back(u[0] > 0.0 ? std::pow(u[0], 1.0 / step) : 0.0);
                   });
  return out;
}

double martin_kernel(GreenSolver& solver, const GroupElement& x, const GroupElement& y) {
  const auto e = solver.domain().group().identity();
  double base = solver.green(e, y);
  if (!(base > 1e-300)) throw BudgetExceeded("G(e, y) vanishes at this truncation depth");
  return solver.green(x, y) / base;
}

KernelSeries kernel_series_along(GreenSolver& solver, const GroupElement& g, const GroupElement& x,
                                 int n_max) {
  const auto& group = solver.domain().group();
  KernelSeries out;
  for (int n = 1; n <= n_max; ++n) {
    auto y = group.power(g, n);
    if (!solver.domain().ball().rank_of(y))
      throw ValidationError("axis point g^" + std::to_string(n) + " leaves the ball");
    out.values.push_back(martin_kernel(solver, x, y));
    if (n > 1) out.differences.push_back(std::abs(out.values[n - 1] - out.values[n - 2]));
  }
  return out;
}

double ancona_ratio(GreenSolver& solver, const GroupElement& x, const GroupElement& z,
                    const GroupElement& y) {
  double den = solver.green(x, z) * solver.green(z, y);
  if (!(den > 0.0)) throw BudgetExceeded("Ancona ratio denominator vanishes at this depth");
  return solver.green(x, y) * solver.green(z, z) / den;
}

double deviation_ratio(const GroupElement& x, const GroupElement& y, const GroupElement& z,
                       std::size_t r, GreenSolver& solver) {
  double full = solver.green(x, y);
  if (!(full > 0.0)) throw BudgetExceeded("G(x, y) vanishes at this truncation depth");
  Domain avoid = solver.domain();
  avoid.forbid_ball(z, r);
  const auto& mu = solver.measure();
  auto series = series_of<double>(x, y, avoid, mu.weights, mu.holding, solver.steps());
  double part = 0.0;
  for (double t : series) part += t;
  return part / full;
}

}  // namespace racglab
