#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pgen/digits.hpp"
#include "pgen/errors.hpp"
#include "pgen/rational.hpp"
#include "pgen/stats.hpp"

namespace pgen {

// Exact arithmetic on finite unions of b-adic cylinder intervals
// [a/b^L, (a+1)/b^L). Levels are capped so b^L fits in 62 bits, which lets
// all span arithmetic run in uint64 without overflow.

struct BadicInterval {
  std::uint32_t level = 0;
  std::uint64_t index = 0;

  friend bool operator==(const BadicInterval&, const BadicInterval&) = default;
};

namespace detail {

inline constexpr std::int64_t kMaxGrid = std::int64_t{1} << 62;

inline std::uint64_t level_positions(std::uint32_t base, std::uint32_t level) {
  return static_cast<std::uint64_t>(checked_pow64(base, level, kMaxGrid));
}

}  // namespace detail

class IntervalSet {
 public:
  static IntervalSet empty(Base base) { return IntervalSet(base, {}); }
  static IntervalSet full(Base base) { return IntervalSet(base, {BadicInterval{0, 0}}); }

  // Canonicalizes an arbitrary (possibly overlapping, mixed-level) list.
  static IntervalSet from_intervals(Base base, std::vector<BadicInterval> iv) {
    std::uint32_t lmax = 0;
    for (const BadicInterval& i : iv) {
      std::uint64_t n = detail::level_positions(base.value(), i.level);
      if (i.index >= n)
        throw precondition_error("interval index " + std::to_string(i.index) +
                                 " out of range at level " + std::to_string(i.level));
      lmax = std::max(lmax, i.level);
    }
    IntervalSet s(base, {});
    s.iv_ = canonicalize(base.value(), to_spans(base.value(), iv, lmax), lmax);
    return s;
  }

  // Half-open runs of cylinder indices at one level.
  static IntervalSet from_runs(Base base, std::uint32_t level,
                               const std::vector<std::pair<std::uint64_t, std::uint64_t>>& runs) {
    std::uint64_t n = detail::level_positions(base.value(), level);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (auto [lo, hi] : runs) {
      if (lo >= hi || hi > n) throw precondition_error("bad cylinder run");
      if (!spans.empty() && spans.back().second >= lo)
        spans.back().second = std::max(spans.back().second, hi);
      else
        spans.emplace_back(lo, hi);
    }
    IntervalSet s(base, {});
    s.iv_ = canonicalize(base.value(), spans, level);
    return s;
  }

  Base base() const { return base_; }
  const std::vector<BadicInterval>& intervals() const { return iv_; }
  bool is_empty() const { return iv_.empty(); }

  Rational measure() const {
    std::map<std::uint32_t, std::uint64_t> per_level;
    for (const BadicInterval& i : iv_) ++per_level[i.level];
    Rational m = 0;
    for (auto [level, count] : per_level)
      m += Rational(count) / Rational(big_pow(base_.value(), level));
    return m;
  }

  bool contains(const Rational& point) const {
    for (const BadicInterval& i : iv_) {
      Rational den(big_pow(base_.value(), i.level));
      if (Rational(i.index) / den <= point && point < Rational(i.index + 1) / den) return true;
    }
    return false;
  }

  friend bool operator==(const IntervalSet& a, const IntervalSet& b) {
    return a.base_.value() == b.base_.value() && a.iv_ == b.iv_;
  }

  friend IntervalSet set_union(const IntervalSet& a, const IntervalSet& b);
  friend IntervalSet set_intersect(const IntervalSet& a, const IntervalSet& b);
  friend IntervalSet set_complement(const IntervalSet& a);

 private:
  IntervalSet(Base base, std::vector<BadicInterval> iv) : base_(base), iv_(std::move(iv)) {}

  using Span = std::pair<std::uint64_t, std::uint64_t>;

  // All spans are half-open index ranges on the level-lmax grid.
  static std::vector<Span> to_spans(std::uint32_t base, const std::vector<BadicInterval>& iv,
                                    std::uint32_t lmax) {
    std::vector<Span> spans;
    spans.reserve(iv.size());
    for (const BadicInterval& i : iv) {
      std::uint64_t unit = detail::level_positions(base, lmax - i.level);
      spans.emplace_back(i.index * unit, (i.index + 1) * unit);
    }
    std::sort(spans.begin(), spans.end());
    std::vector<Span> merged;
    for (const Span& s : spans) {
      if (!merged.empty() && merged.back().second >= s.first)
        merged.back().second = std::max(merged.back().second, s.second);
      else
        merged.push_back(s);
    }
    return merged;
  }

  // Greedy maximal aligned blocks, left to right. Yields the unique form in
  // which no parent cylinder has all b children present.
  static std::vector<BadicInterval> canonicalize(std::uint32_t base, const std::vector<Span>& spans,
                                                 std::uint32_t lmax) {
    std::vector<BadicInterval> out;
    for (const Span& span : spans) {
      std::uint64_t lo = span.first;
      while (lo < span.second) {
        std::uint64_t size = 1;
        std::uint32_t level = lmax;
        while (level > 0) {
          std::uint64_t bigger = size * base;
          if (lo % bigger == 0 && bigger <= span.second - lo) {
            size = bigger;
            --level;
          } else {
            break;
          }
        }
        out.push_back(BadicInterval{level, lo / size});
        lo += size;
      }
    }
    return out;
  }

  static std::vector<Span> intersect_spans(const std::vector<Span>& a, const std::vector<Span>& b) {
    std::vector<Span> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      std::uint64_t lo = std::max(a[i].first, b[j].first);
      std::uint64_t hi = std::min(a[i].second, b[j].second);
      if (lo < hi) out.emplace_back(lo, hi);
      if (a[i].second < b[j].second)
        ++i;
      else
        ++j;
    }
    return out;
  }

  static std::vector<Span> complement_spans(const std::vector<Span>& a, std::uint64_t total) {
    std::vector<Span> out;
    std::uint64_t cursor = 0;
    for (const Span& s : a) {
      if (cursor < s.first) out.emplace_back(cursor, s.first);
      cursor = s.second;
    }
    if (cursor < total) out.emplace_back(cursor, total);
    return out;
  }

  std::uint32_t max_level() const {
    std::uint32_t l = 0;
    for (const BadicInterval& i : iv_) l = std::max(l, i.level);
    return l;
  }

  Base base_;
  std::vector<BadicInterval> iv_;
};

inline IntervalSet set_union(const IntervalSet& a, const IntervalSet& b) {
  if (a.base_.value() != b.base_.value())
    throw precondition_error("set operands disagree on the base");
  std::vector<BadicInterval> all = a.iv_;
  all.insert(all.end(), b.iv_.begin(), b.iv_.end());
  return IntervalSet::from_intervals(a.base_, std::move(all));
}

inline IntervalSet set_intersect(const IntervalSet& a, const IntervalSet& b) {
  if (a.base_.value() != b.base_.value())
    throw precondition_error("set operands disagree on the base");
  std::uint32_t lmax = std::max(a.max_level(), b.max_level());
  auto sa = IntervalSet::to_spans(a.base_.value(), a.iv_, lmax);
  auto sb = IntervalSet::to_spans(b.base_.value(), b.iv_, lmax);
  IntervalSet out(a.base_, {});
  out.iv_ = IntervalSet::canonicalize(a.base_.value(), IntervalSet::intersect_spans(sa, sb), lmax);
  return out;
}

inline IntervalSet set_complement(const IntervalSet& a) {
  std::uint32_t lmax = a.max_level();
  std::uint64_t total = detail::level_positions(a.base_.value(), lmax);
  auto sa = IntervalSet::to_spans(a.base_.value(), a.iv_, lmax);
  IntervalSet out(a.base_, {});
  out.iv_ = IntervalSet::canonicalize(a.base_.value(), IntervalSet::complement_spans(sa, total), lmax);
  return out;
}

inline IntervalSet set_difference(const IntervalSet& a, const IntervalSet& b) {
  return set_intersect(a, set_complement(b));
}

inline Rational set_measure(const IntervalSet& s) { return s.measure(); }

// The finite grid of rates examined at word length k: all reduced fractions
// p/q with 1 <= q <= k and 0 < p/q < k, sorted ascending. Empty for k = 1.
inline std::vector<Rational> lambda_grid(std::uint32_t k) {
  if (k == 0) throw precondition_error("k must be positive");
  std::vector<Rational> grid;
  for (std::uint64_t q = 1; q <= k; ++q)
    for (std::uint64_t p = 1; p < static_cast<std::uint64_t>(k) * q; ++p)
      grid.emplace_back(p, q);  // cpp_rational reduces on construction
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Badness of a prefix: the empirical rate-lambda occupancy statistic of
// length-k words strays from the Poisson weight of j by more than epsilon.
// Membership depends only on the first floor(lambda*b^k)+k digits, so the
// set is a union of cylinders at exactly that level. The deviation test is
// evaluated in double precision (the Poisson weight is transcendental);
// everything downstream of the per-prefix verdict is exact.
struct BadSpec {
  Rational lambda;
  std::uint32_t k = 1;
  std::uint64_t j = 0;
  double epsilon = 1.0;
};

struct EnumerationOptions {
  std::uint64_t cap = std::uint64_t{1} << 24;
  unsigned threads = 1;
};

namespace detail {

struct BadGeometry {
  std::uint32_t level = 0;       // prefix length L
  std::uint64_t windows = 0;     // L - k + 1
  std::uint64_t word_count = 0;  // b^k
};

inline BadGeometry bad_geometry(Base base, const Rational& lambda, std::uint32_t k,
                                std::uint64_t cap) {
  if (lambda <= 0) throw precondition_error("lambda must be positive");
  if (k == 0) throw precondition_error("k must be positive");
  BadGeometry g;
  g.word_count = static_cast<std::uint64_t>(checked_pow64(base.value(), k));
  BigInt lam_scaled = floor_rational(lambda * Rational(big_pow(base.value(), k)));
  BigInt level = lam_scaled + k;
  BigInt positions = 1;
  std::uint32_t l = 0;
  while (BigInt(positions) <= BigInt(cap) && BigInt(l) < level) {
    positions *= base.value();
    ++l;
  }
  if (BigInt(l) < level || positions > cap)
    throw resource_error("enumeration needs b^" + level.convert_to<std::string>() +
                         " prefixes, above the cap of " + std::to_string(cap));
  g.level = static_cast<std::uint32_t>(level.convert_to<std::uint64_t>());
  g.windows = lam_scaled.convert_to<std::uint64_t>() + 1;
  return g;
}

// Enumerates every length-L digit string, maintaining the word-count table
// for the pred callback, and returns the half-open index runs where pred
// said bad. pred(cnt, distinct) must be safe to call from several threads.
template <class Pred>
std::vector<std::pair<std::uint64_t, std::uint64_t>> enumerate_bad_runs(
    Base base, std::uint32_t L, std::uint32_t k, Pred&& pred, const EnumerationOptions& opts) {
  const std::uint32_t b = base.value();
  const std::uint64_t total = level_positions(b, L);
  const std::uint64_t bk = level_positions(b, k);
  const std::uint64_t bkm1 = level_positions(b, k - 1);

  using Runs = std::vector<std::pair<std::uint64_t, std::uint64_t>>;
  auto worker = [&](std::uint64_t lo, std::uint64_t hi, Runs& runs) {
    std::vector<std::uint32_t> d(L);
    std::vector<std::uint32_t> cnt(bk, 0);
    std::vector<std::uint64_t> distinct;
    distinct.reserve(L);
    std::uint64_t rem = lo;
    for (std::uint32_t i = L; i-- > 0;) {
      d[i] = static_cast<std::uint32_t>(rem % b);
      rem /= b;
    }
    for (std::uint64_t p = lo; p < hi; ++p) {
      if (p != lo) {
        std::uint32_t i = L - 1;
        while (true) {
          if (++d[i] < b) break;
          d[i] = 0;
          --i;
        }
      }
      std::uint64_t code = 0;
      for (std::uint32_t i = 0; i < k; ++i) code = code * b + d[i];
      if (cnt[code]++ == 0) distinct.push_back(code);
      for (std::uint32_t s = k; s < L; ++s) {
        code = (code % bkm1) * b + d[s];
        if (cnt[code]++ == 0) distinct.push_back(code);
      }
      if (pred(cnt, distinct)) {
        if (!runs.empty() && runs.back().second == p)
          runs.back().second = p + 1;
        else
          runs.emplace_back(p, p + 1);
      }
      for (std::uint64_t c : distinct) cnt[c] = 0;
      distinct.clear();
    }
  };

  unsigned threads = std::max(1u, opts.threads);
  if (threads == 1 || total < 4 * threads) {
    Runs runs;
    worker(0, total, runs);
    return runs;
  }
  std::vector<Runs> parts(threads);
  std::vector<std::thread> pool;
  std::uint64_t chunk = total / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::uint64_t lo = t * chunk;
    std::uint64_t hi = (t + 1 == threads) ? total : lo + chunk;
    pool.emplace_back([&, lo, hi, t] { worker(lo, hi, parts[t]); });
  }
  for (std::thread& th : pool) th.join();
  Runs runs;
  for (Runs& part : parts)
    for (auto& r : part) {
      if (!runs.empty() && runs.back().second == r.first)
        runs.back().second = r.second;
      else
        runs.push_back(r);
    }
  return runs;
}

}  // namespace detail

inline std::uint32_t bad_enumeration_level(Base base, const Rational& lambda, std::uint32_t k,
                                           std::uint64_t cap = std::uint64_t{1} << 24) {
  return detail::bad_geometry(base, lambda, k, cap).level;
}

// Index runs (at the enumeration level) of the bad prefixes for one (lambda,
// k, j, epsilon). Exposed separately so tests can check cylinder locality
// before canonicalization.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> bad_prefix_runs(
    Base base, const BadSpec& spec, EnumerationOptions opts = {}) {
  detail::BadGeometry g = detail::bad_geometry(base, spec.lambda, spec.k, opts.cap);
  double lam = spec.lambda.convert_to<double>();
  double pj = poisson_pmf(lam, spec.j);
  if (spec.j >= g.windows + 1) {
    // More occurrences than windows: the statistic is identically zero.
    bool all_bad = pj > spec.epsilon;
    if (!all_bad) return {};
    return {{0, detail::level_positions(base.value(), g.level)}};
  }
  const double inv_bk = 1.0 / static_cast<double>(g.word_count);
  const std::uint64_t j = spec.j;
  const std::uint64_t bk = g.word_count;
  const double eps = spec.epsilon;
  auto pred = [=](const std::vector<std::uint32_t>& cnt,
                  const std::vector<std::uint64_t>& distinct) {
    std::uint64_t nj;
    if (j == 0) {
      nj = bk - distinct.size();
    } else {
      nj = 0;
      for (std::uint64_t c : distinct)
        if (cnt[c] == j) ++nj;
    }
    return std::abs(static_cast<double>(nj) * inv_bk - pj) > eps;
  };
  return detail::enumerate_bad_runs(base, g.level, spec.k, pred, opts);
}

inline IntervalSet bad_set(Base base, const BadSpec& spec, EnumerationOptions opts = {}) {
  detail::BadGeometry g = detail::bad_geometry(base, spec.lambda, spec.k, opts.cap);
  return IntervalSet::from_runs(base, g.level, bad_prefix_runs(base, spec, opts));
}

namespace detail {

// Union over all occupancy indices j in {0,...,b^k-1} for one rate, done in
// a single enumeration pass. For j beyond the window count the statistic is
// identically zero and the Poisson weights decrease monotonically, so only
// the first such j needs a check.
inline IntervalSet bad_all_j(Base base, const Rational& lambda, std::uint32_t k, double eps,
                             const EnumerationOptions& opts) {
  BadGeometry g = bad_geometry(base, lambda, k, opts.cap);
  double lam = lambda.convert_to<double>();
  const std::uint64_t bk = g.word_count;
  const std::uint64_t j_hi = std::min(g.windows, bk - 1);
  std::vector<double> pmf(j_hi + 1);
  for (std::uint64_t j = 0; j <= j_hi; ++j) pmf[j] = poisson_pmf(lam, j);
  if (j_hi + 1 <= bk - 1 && poisson_pmf(lam, j_hi + 1) > eps)
    return IntervalSet::full(base);
  const double inv_bk = 1.0 / static_cast<double>(bk);
  auto pred = [&, eps, bk, j_hi, inv_bk](const std::vector<std::uint32_t>& cnt,
                                         const std::vector<std::uint64_t>& distinct) {
    std::uint64_t n0 = bk - distinct.size();
    if (std::abs(static_cast<double>(n0) * inv_bk - pmf[0]) > eps) return true;
    thread_local std::vector<std::uint32_t> hist;
    hist.assign(j_hi + 1, 0);
    for (std::uint64_t c : distinct)
      if (cnt[c] <= j_hi) ++hist[cnt[c]];
    for (std::uint64_t j = 1; j <= j_hi; ++j)
      if (std::abs(static_cast<double>(hist[j]) * inv_bk - pmf[j]) > eps) return true;
    return false;
  };
  auto runs = enumerate_bad_runs(base, g.level, k, pred, opts);
  return IntervalSet::from_runs(base, g.level, runs);
}

}  // namespace detail

// Union of the bad sets over the whole rate grid and every occupancy index,
// with epsilon defaulting to 1/k.
inline IntervalSet bad_k_set(Base base, std::uint32_t k, std::optional<double> epsilon = {},
                             EnumerationOptions opts = {}) {
  double eps = epsilon.value_or(1.0 / static_cast<double>(k));
  IntervalSet acc = IntervalSet::empty(base);
  for (const Rational& lambda : lambda_grid(k)) {
    acc = set_union(acc, detail::bad_all_j(base, lambda, k, eps, opts));
    if (acc == IntervalSet::full(base)) break;
  }
  return acc;
}

// Complement of the union of bad_k_set over k in [k_lo, k_hi], both ends
// inclusive. An empty range gives the full unit interval.
inline IntervalSet e_set(Base base, std::uint32_t k_lo, std::uint32_t k_hi,
                         EnumerationOptions opts = {}) {
  IntervalSet acc = IntervalSet::empty(base);
  for (std::uint32_t k = k_lo; k <= k_hi && k_lo <= k_hi; ++k)
    acc = set_union(acc, bad_k_set(base, k, {}, opts));
  return set_complement(acc);
}

// Compares the exact measure of bad_k_set against the closed-form tail bound
// 2 b^k k^3 exp(-b^k / (2 k^5)). The bound only kicks in for large k, so for
// small k it is reported as vacuous or violated rather than asserted.
inline double fact1_bound_value(std::uint32_t base, std::uint32_t k) {
  double bk = std::pow(static_cast<double>(base), static_cast<double>(k));
  double k3 = static_cast<double>(k) * k * k;
  double k5 = k3 * k * k;
  return 2.0 * bk * k3 * std::exp(-bk / (2.0 * k5));
}

struct Fact1Row {
  std::uint32_t k = 0;
  Rational mu;
  double bound = 0.0;
  bool vacuous = false;  // bound >= 1 says nothing (measures never exceed 1)
  bool holds = false;    // mu < bound
};

inline Fact1Row check_fact1_bound(Base base, std::uint32_t k, EnumerationOptions opts = {}) {
  Fact1Row row;
  row.k = k;
  row.mu = bad_k_set(base, k, {}, opts).measure();
  row.bound = fact1_bound_value(base.value(), k);
  row.vacuous = row.bound >= 1.0;
  row.holds = row.mu.convert_to<double>() < row.bound;
  return row;
}

// Digit selection: starting from the unit interval, each step splits the
// current interval into b children and picks the least digit whose child
// keeps the running intersection with the constraint sets above the step's
// threshold (strict, exact rational comparison).

struct ThresholdRule {
  enum class Kind { grid, fixed };
  Kind kind = Kind::grid;   // grid: 1/b^(2n) at step n
  Rational fixed = Rational(1, 4);

  Rational at(std::uint32_t base, std::uint32_t n) const {
    if (kind == Kind::fixed) return fixed;
    return Rational(1, big_pow(base, 2 * static_cast<std::uint64_t>(n)));
  }
};

struct AlgorithmConfig {
  std::uint32_t base = 2;
  std::uint32_t steps = 8;
  // One entry per step, or a single entry applied to all steps, or empty
  // (every constraint set is the full interval). Ranges are inclusive.
  std::vector<std::optional<std::pair<std::uint32_t, std::uint32_t>>> step_ranges;
  ThresholdRule threshold;
  EnumerationOptions enumeration;
};

// The schedule the source construction prescribes: step n constrains word
// lengths k in [b^(2n), b^(2n+2) - 1]. Already at n = 1 in base 2 this needs
// prefixes of astronomical length, so it exists to be checked, not run.
inline AlgorithmConfig reference_config(std::uint32_t base, std::uint32_t steps) {
  AlgorithmConfig cfg;
  cfg.base = base;
  cfg.steps = steps;
  for (std::uint32_t n = 1; n <= steps; ++n) {
    std::int64_t lo = checked_pow64(base, 2 * static_cast<std::uint64_t>(n),
                                    std::int64_t{1} << 31);
    std::int64_t hi = checked_pow64(base, 2 * static_cast<std::uint64_t>(n) + 2,
                                    std::int64_t{1} << 31) - 1;
    cfg.step_ranges.push_back(std::make_pair(static_cast<std::uint32_t>(lo),
                                             static_cast<std::uint32_t>(hi)));
  }
  return cfg;
}

struct FeasibilityIssue {
  std::uint32_t step = 0;
  std::uint32_t k = 0;
  Rational lambda;
  BigInt level;  // required prefix length
};

namespace detail {

inline std::optional<std::pair<std::uint32_t, std::uint32_t>> range_for_step(
    const AlgorithmConfig& cfg, std::uint32_t n) {
  if (cfg.step_ranges.empty()) return std::nullopt;
  if (cfg.step_ranges.size() == 1) return cfg.step_ranges[0];
  if (cfg.step_ranges.size() != cfg.steps)
    throw precondition_error("step ranges must be empty, a single entry, or one per step");
  return cfg.step_ranges[n - 1];
}

}  // namespace detail

// Scans the configuration for any constraint set whose enumeration would
// exceed the cap. The largest rate on the grid at length k is (k^2 - 1)/k,
// so the deepest level needed is floor(((k^2-1)/k) * b^k) + k.
inline std::optional<FeasibilityIssue> find_infeasible(const AlgorithmConfig& cfg) {
  std::uint32_t lcap = 0;
  {
    std::uint64_t positions = 1;
    while (positions <= cfg.enumeration.cap / cfg.base) {
      positions *= cfg.base;
      ++lcap;
    }
  }
  for (std::uint32_t n = 1; n <= cfg.steps; ++n) {
    auto range = detail::range_for_step(cfg, n);
    if (!range) continue;
    for (std::uint32_t k = range->first; k <= range->second; ++k) {
      if (k <= 1) continue;  // the rate grid is empty at k = 1
      Rational lam_max(static_cast<std::uint64_t>(k) * k - 1, k);
      BigInt level = floor_rational(lam_max * Rational(big_pow(cfg.base, k))) + k;
      if (level > lcap) {
        FeasibilityIssue issue;
        issue.step = n;
        issue.k = k;
        issue.lambda = lam_max;
        issue.level = level;
        return issue;
      }
    }
  }
  return std::nullopt;
}

inline void check_feasibility(const AlgorithmConfig& cfg) {
  if (auto issue = find_infeasible(cfg)) {
    throw resource_error(
        "step " + std::to_string(issue->step) + " needs k = " + std::to_string(issue->k) +
        ", which requires enumerating " + std::to_string(cfg.base) + "^" +
        issue->level.convert_to<std::string>() + " prefixes; cap is " +
        std::to_string(cfg.enumeration.cap));
  }
}

struct AlgorithmStep {
  std::uint32_t n = 0;
  digit_t chosen = 0;
  BadicInterval interval;
  Rational measure;    // running intersection restricted to the new interval
  Rational threshold;
};

struct AlgorithmResult {
  std::vector<AlgorithmStep> trace;
  std::vector<digit_t> digits;
};

inline AlgorithmResult run_algorithm(const AlgorithmConfig& cfg) {
  check_feasibility(cfg);
  Base base(cfg.base);
  AlgorithmResult out;
  IntervalSet running = IntervalSet::full(base);
  BadicInterval current{0, 0};
  std::map<std::pair<std::uint32_t, std::uint32_t>, IntervalSet> cache;

  for (std::uint32_t n = 1; n <= cfg.steps; ++n) {
    auto range = detail::range_for_step(cfg, n);
    const IntervalSet* constraint = nullptr;
    if (range) {
      auto it = cache.find(*range);
      if (it == cache.end())
        it = cache.emplace(*range, e_set(base, range->first, range->second, cfg.enumeration))
                 .first;
      constraint = &it->second;
    }
    Rational threshold = cfg.threshold.at(cfg.base, n);

    bool found = false;
    std::string seen;
    for (digit_t v = 0; v < cfg.base; ++v) {
      BadicInterval child{current.level + 1, current.index * cfg.base + v};
      IntervalSet cand = set_intersect(running, IntervalSet::from_intervals(base, {child}));
      if (constraint) cand = set_intersect(cand, *constraint);
      Rational m = cand.measure();
      if (!seen.empty()) seen += ", ";
      seen += std::to_string(v) + ": " + decimal_string(m, 8);
      if (m > threshold) {
        out.trace.push_back(AlgorithmStep{n, v, child, m, threshold});
        out.digits.push_back(v);
        running = std::move(cand);
        current = child;
        found = true;
        break;
      }
    }
    if (!found)
      throw precondition_error("no admissible digit at step " + std::to_string(n) +
                               "; candidate measures {" + seen + "} all at or below threshold " +
                               decimal_string(threshold, 8));
  }
  return out;
}

}  // namespace pgen
