#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pgen/digits.hpp"
#include "pgen/errors.hpp"
#include "pgen/rational.hpp"
#include "pgen/words.hpp"

namespace pgen {

// Two window-count conventions for the occurrence profile of a prefix:
//   A: floor(lambda*b^k) + 1 windows (prefix of floor(lambda*b^k) + k digits)
//   B: floor(lambda*b^k) windows
// The L1 gap between the two resulting profiles is at most 4/b^k.
enum class Convention { A, B };

inline const char* convention_name(Convention c) { return c == Convention::A ? "A" : "B"; }

inline Rational validated_lambda(const Rational& lambda) {
  if (lambda <= 0) throw precondition_error("lambda must be positive");
  return lambda;
}

// Z_j = (number of length-k words occurring exactly j times among the
// counted windows) / b^k, kept exact. Buckets above j_max aggregate into
// z_overflow; the buckets sum to 1 exactly.
struct ZProfile {
  std::uint32_t base = 2;
  std::uint32_t k = 1;
  Rational lambda;
  Convention convention = Convention::A;
  std::uint64_t window_count = 0;
  std::vector<Rational> z;  // j in [0, j_max]
  Rational z_overflow;
};

inline std::uint64_t window_count_for(const Rational& lambda, std::uint32_t base,
                                      std::uint32_t k, Convention conv) {
  Rational scaled = lambda * Rational(big_pow(base, k));
  BigInt fl = floor_rational(scaled);
  if (fl > BigInt(std::uint64_t{1} << 62))
    throw resource_error("window count exceeds the machine-word budget");
  std::uint64_t w = fl.convert_to<std::uint64_t>();
  return conv == Convention::A ? w + 1 : w;
}

inline ZProfile z_profile(const DigitBuffer& buffer, std::uint32_t k, const Rational& lambda,
                          std::uint32_t j_max, Convention conv, CountingOptions opts = {}) {
  validated_lambda(lambda);
  std::uint64_t windows = window_count_for(lambda, buffer.base().value(), k, conv);
  ZProfile prof;
  prof.base = buffer.base().value();
  prof.k = k;
  prof.lambda = lambda;
  prof.convention = conv;
  prof.window_count = windows;
  BigInt space = big_pow(buffer.base().value(), k);
  OccurrenceTable table = count_words(buffer, WindowSpec{k, 1, windows}, opts);
  Histogram h = histogram(table, j_max);
  prof.z.reserve(j_max + 1);
  for (std::uint64_t n : h.n_j) prof.z.emplace_back(BigInt(n), space);
  prof.z_overflow = Rational(BigInt(h.overflow), space);
  return prof;
}

// e^-lambda lambda^j / j!, evaluated in log space so large j stay stable.
inline double poisson_pmf(double lambda, std::uint64_t j) {
  if (!(lambda > 0)) throw precondition_error("lambda must be positive");
  double logp = -lambda - std::lgamma(static_cast<double>(j) + 1.0);
  if (j > 0) logp += static_cast<double>(j) * std::log(lambda);
  return std::exp(logp);
}

struct PoissonRef {
  double lambda = 1.0;
  std::vector<double> pmf;  // j in [0, j_max]
};

inline PoissonRef poisson_ref(double lambda, std::uint32_t j_max) {
  PoissonRef ref;
  ref.lambda = lambda;
  ref.pmf.reserve(j_max + 1);
  for (std::uint32_t j = 0; j <= j_max; ++j) ref.pmf.push_back(poisson_pmf(lambda, j));
  return ref;
}

// Sup and L1 distance between a profile and the Poisson reference over
// j in [0, j_max]. Exact Z values are compared in double precision; the
// rounding slack is far below any tolerance used by callers.
struct Deviation {
  double sup = 0.0;
  double l1 = 0.0;
};

inline Deviation z_deviation(const ZProfile& profile, const PoissonRef& ref) {
  if (profile.z.size() != ref.pmf.size())
    throw precondition_error("profile and reference cover different j ranges");
  Deviation dev;
  for (std::size_t j = 0; j < profile.z.size(); ++j) {
    double d = std::fabs(profile.z[j].convert_to<double>() - ref.pmf[j]);
    dev.l1 += d;
    if (d > dev.sup) dev.sup = d;
  }
  return dev;
}

// Worst-case simple-normality deviation sup_w |W(x|n, w)/n - b^-len| over
// all words of length len <= max_len, denominator n. Exact rationals.
struct NormalityReport {
  std::vector<Rational> per_length;  // index len-1
  Rational sup;
};

inline NormalityReport normality_deviation(const DigitBuffer& buffer, std::uint64_t n,
                                           std::uint32_t max_len, CountingOptions opts = {}) {
  if (max_len < 1) throw precondition_error("max word length must be >= 1");
  if (n < max_len || n > buffer.size())
    throw precondition_error("prefix length out of range for the buffer");
  NormalityReport rep;
  rep.sup = Rational(0);
  for (std::uint32_t len = 1; len <= max_len; ++len) {
    std::int64_t space = checked_pow64(buffer.base().value(), len);
    if (static_cast<std::uint64_t>(space) > opts.dense_cap)
      throw resource_error("normality scan needs a dense table for every word length");
    OccurrenceTable t = count_words(buffer, WindowSpec{len, 1, n - len + 1}, opts);
    Rational ideal(BigInt(1), big_pow(buffer.base().value(), len));
    Rational worst(0);
    for (std::int64_t code = 0; code < space; ++code) {
      Rational freq(BigInt(t.count(code)), BigInt(n));
      Rational d = freq > ideal ? Rational(freq - ideal) : Rational(ideal - freq);
      if (d > worst) worst = d;
    }
    rep.per_length.push_back(worst);
    if (worst > rep.sup) rep.sup = worst;
  }
  return rep;
}

// (w, n)-discrepancy |n/b^|w| - W(x|n, w)|, exact.
inline Rational discrepancy(const DigitBuffer& buffer, const std::vector<digit_t>& word,
                            std::uint64_t n) {
  std::uint64_t hits = count_occurrences(buffer, word, n);
  Rational ideal(BigInt(n), big_pow(buffer.base().value(), word.size()));
  Rational observed(hits);
  return ideal > observed ? Rational(ideal - observed) : Rational(observed - ideal);
}

// All k in [k_lo, k_hi] whose Z_j deviates from the Poisson mass by less
// than epsilon. Witnesses that a stream looks Poisson at selected scales.
inline std::vector<std::uint32_t> weakly_poisson_scan(const DigitBuffer& buffer,
                                                      const Rational& lambda, std::uint64_t j,
                                                      double epsilon, std::uint32_t k_lo,
                                                      std::uint32_t k_hi,
                                                      Convention conv = Convention::A,
                                                      CountingOptions opts = {}) {
  validated_lambda(lambda);
  if (k_lo < 1 || k_lo > k_hi) throw precondition_error("bad k range");
  std::vector<std::uint32_t> witnesses;
  std::uint32_t j_max = static_cast<std::uint32_t>(j);
  for (std::uint32_t k = k_lo; k <= k_hi; ++k) {
    ZProfile prof = z_profile(buffer, k, lambda, j_max, conv, opts);
    double pmf = poisson_pmf(lambda.convert_to<double>(), j);
    double d = std::fabs(prof.z[j_max].convert_to<double>() - pmf);
    if (d < epsilon) witnesses.push_back(k);
  }
  return witnesses;
}

// Distribution of per-word occurrence counts over the window-start range
// (lambda*b^k, mu*b^k]: mass[j] = (words counted exactly j times) / b^k.
// Over (0, lambda] this equals the convention-B profile of lambda exactly.
struct CountDistribution {
  std::vector<Rational> mass;  // index j, trailing buckets trimmed
};

inline CountDistribution count_distribution(const DigitBuffer& buffer, std::uint32_t k,
                                            const Rational& lo, const Rational& hi,
                                            CountingOptions opts = {}) {
  if (lo < 0 || hi < lo) throw precondition_error("need 0 <= lo <= hi");
  BigInt space = big_pow(buffer.base().value(), k);
  Rational bk(space);
  std::uint64_t first = (floor_rational(lo * bk)).convert_to<std::uint64_t>() + 1;
  std::uint64_t last = (floor_rational(hi * bk)).convert_to<std::uint64_t>();
  CountDistribution dist;
  if (last < first) {
    dist.mass.emplace_back(1);  // every word occurs zero times
    return dist;
  }
  std::uint64_t windows = last - first + 1;
  OccurrenceTable table = count_words(buffer, WindowSpec{k, first, windows}, opts);
  std::uint64_t max_count = 0;
  table.for_each_present([&](std::int64_t, std::uint64_t c) {
    if (c > max_count) max_count = c;
  });
  std::vector<std::uint64_t> n_j(max_count + 1, 0);
  std::uint64_t present = 0;
  table.for_each_present([&](std::int64_t, std::uint64_t c) {
    ++present;
    ++n_j[c];
  });
  n_j[0] = (space - present).convert_to<std::uint64_t>();
  dist.mass.reserve(n_j.size());
  for (std::uint64_t n : n_j) dist.mass.emplace_back(BigInt(n), space);
  return dist;
}

// Total variation distance between two count distributions, exact.
inline Rational tv_distance(const CountDistribution& p, const CountDistribution& q) {
  std::size_t n = p.mass.size() > q.mass.size() ? p.mass.size() : q.mass.size();
  Rational sum(0);
  for (std::size_t j = 0; j < n; ++j) {
    Rational a = j < p.mass.size() ? p.mass[j] : Rational(0);
    Rational b = j < q.mass.size() ? q.mass[j] : Rational(0);
    sum += a > b ? Rational(a - b) : Rational(b - a);
  }
  return sum / 2;
}

// Total variation distance between Poisson(a) and Poisson(b), truncated
// once both remaining tails drop below 1e-12.
inline double tv_poisson(double a, double b) {
  if (!(a > 0) || !(b > 0)) throw precondition_error("Poisson rates must be positive");
  double sum = 0.0, tail_a = 1.0, tail_b = 1.0;
  for (std::uint64_t j = 0;; ++j) {
    double pa = poisson_pmf(a, j), pb = poisson_pmf(b, j);
    sum += std::fabs(pa - pb);
    tail_a -= pa;
    tail_b -= pb;
    double past_modes = static_cast<double>(j) > a && static_cast<double>(j) > b ? 1.0 : 0.0;
    if (past_modes != 0.0 && tail_a < 1e-12 && tail_b < 1e-12) break;
    if (j > 100000) break;  // unreachable for sane rates; guards nontermination
  }
  return sum / 2.0;
}

}  // namespace pgen
