#pragma once

#include <cstdint>
#include <memory>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pgen/digits.hpp"
#include "pgen/errors.hpp"
#include "pgen/rational.hpp"

namespace pgen {

// Word codes are big-endian base-b integers: code = sum w_i * b^(k-1-i).
// k is capped so that b^k fits comfortably in a signed 64-bit word.
inline std::int64_t encode_word(const std::vector<digit_t>& word, Base base) {
  std::int64_t c = 0;
  for (digit_t d : word) {
    if (d >= base.value()) throw precondition_error("word digit out of range for base");
    c = c * base.value() + d;
  }
  return c;
}

inline std::vector<digit_t> decode_word(std::int64_t code, std::uint32_t k, Base base) {
  std::vector<digit_t> w(k);
  for (std::uint32_t i = k; i-- > 0;) {
    w[i] = static_cast<digit_t>(code % base.value());
    code /= base.value();
  }
  return w;
}

// Windows of length k starting at positions first_pos .. first_pos+count-1.
struct WindowSpec {
  std::uint32_t k;
  std::uint64_t first_pos = 1;
  std::uint64_t count = 0;
};

struct CountingOptions {
  std::uint64_t dense_cap = std::uint64_t{1} << 26;  // table entries, not bytes
  unsigned threads = 1;
};

// Exact occurrence counts for every length-k word. Dense storage uses
// 16-bit saturating counters; a counter stuck at the cap redirects to an
// exact side ledger, so counts stay exact at any multiplicity. Sparse
// storage keeps only the words actually seen; the count of absent words
// is b^k minus the table population.
class OccurrenceTable {
public:
  static constexpr std::uint16_t kSaturated = 0xffff;

  OccurrenceTable(Base base, std::uint32_t k, std::uint64_t dense_cap)
      : base_(base), k_(k), space_(checked_pow64(base.value(), k)) {
    dense_ = static_cast<std::uint64_t>(space_) <= dense_cap;
    if (dense_) counters_.assign(static_cast<std::size_t>(space_), 0);
  }

  Base base() const { return base_; }
  std::uint32_t k() const { return k_; }
  std::int64_t word_space() const { return space_; }
  bool dense() const { return dense_; }
  std::uint64_t windows() const { return windows_; }

  void add(std::int64_t code) {
    ++windows_;
    if (dense_) {
      std::uint16_t& c = counters_[static_cast<std::size_t>(code)];
      if (c < kSaturated - 1) {
        ++c;
      } else if (c == kSaturated - 1) {
        c = kSaturated;
        ledger_[code] = kSaturated;
      } else {
        ++ledger_[code];
      }
    } else {
      ++map_[code];
    }
  }

  std::uint64_t count(std::int64_t code) const {
    if (code < 0 || code >= space_) throw precondition_error("word code out of range");
    if (dense_) {
      std::uint16_t c = counters_[static_cast<std::size_t>(code)];
      return c == kSaturated ? ledger_.at(code) : c;
    }
    auto it = map_.find(code);
    return it == map_.end() ? 0 : it->second;
  }

  // Number of distinct words with count > 0.
  std::uint64_t distinct() const {
    if (!dense_) return map_.size();
    std::uint64_t n = 0;
    for (std::uint16_t c : counters_)
      if (c > 0) ++n;
    return n;
  }

  // Visits (code, count) for every word with count > 0.
  template <typename F>
  void for_each_present(F&& f) const {
    if (dense_) {
      for (std::int64_t code = 0; code < space_; ++code) {
        std::uint16_t c = counters_[static_cast<std::size_t>(code)];
        if (c == 0) continue;
        f(code, c == kSaturated ? ledger_.at(code) : static_cast<std::uint64_t>(c));
      }
    } else {
      for (const auto& [code, c] : map_) f(code, c);
    }
  }

  // Exact merge used by the chunked parallel counting path.
  void merge(const OccurrenceTable& other) {
    if (other.base_ != base_ || other.k_ != k_ || other.dense_ != dense_)
      throw internal_error("merging incompatible occurrence tables");
    windows_ += other.windows_;
    other.for_each_present([&](std::int64_t code, std::uint64_t c) { add_many(code, c); });
  }

private:
  void add_many(std::int64_t code, std::uint64_t n) {
    if (n == 0) return;
    if (dense_) {
      std::uint16_t& c = counters_[static_cast<std::size_t>(code)];
      std::uint64_t exact = (c == kSaturated ? ledger_[code] : c) + n;
      if (exact < kSaturated) {
        c = static_cast<std::uint16_t>(exact);
      } else {
        c = kSaturated;
        ledger_[code] = exact;
      }
    } else {
      map_[code] += n;
    }
  }

  Base base_;
  std::uint32_t k_;
  std::int64_t space_;
  bool dense_;
  std::uint64_t windows_ = 0;
  std::vector<std::uint16_t> counters_;
  std::unordered_map<std::int64_t, std::uint64_t> ledger_;
  std::unordered_map<std::int64_t, std::uint64_t> map_;
};

namespace detail {

inline void count_range(const DigitBuffer& buffer, std::uint32_t k, std::uint64_t first,
                        std::uint64_t count, OccurrenceTable& table) {
  if (count == 0) return;
  std::uint32_t b = buffer.base().value();
  std::int64_t modulus = checked_pow64(b, k - 1);
  std::int64_t code = 0;
  for (std::uint64_t p = first; p < first + k; ++p) code = code * b + buffer.at(p);
  table.add(code);
  for (std::uint64_t i = 1; i < count; ++i) {
    code = (code % modulus) * b + buffer.at(first + i + k - 1);
    table.add(code);
  }
}

}  // namespace detail

// Counts every window of spec. Windows are scanned with a rolling code; with
// opts.threads > 1 the window range is partitioned into chunks that overlap
// by k-1 digits and the partial tables are merged by exact addition.
inline OccurrenceTable count_words(const DigitBuffer& buffer, WindowSpec spec,
                                   CountingOptions opts = {}) {
  if (spec.k < 1) throw precondition_error("window length must be >= 1");
  if (spec.first_pos < 1) throw precondition_error("window positions are 1-based");
  if (spec.count > 0) {
    std::uint64_t last_digit = spec.first_pos + spec.count + spec.k - 2;
    if (last_digit > buffer.size())
      throw precondition_error("window range needs digits up to position " +
                               std::to_string(last_digit) + " but the buffer has " +
                               std::to_string(buffer.size()));
  }
  OccurrenceTable table(buffer.base(), spec.k, opts.dense_cap);
  unsigned threads = opts.threads;
  if (threads <= 1 || spec.count < 4 * static_cast<std::uint64_t>(threads) * spec.k) {
    detail::count_range(buffer, spec.k, spec.first_pos, spec.count, table);
    return table;
  }
  std::vector<OccurrenceTable> parts;
  parts.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    parts.emplace_back(buffer.base(), spec.k, opts.dense_cap);
  std::vector<std::thread> pool;
  std::uint64_t chunk = spec.count / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::uint64_t from = spec.first_pos + t * chunk;
    std::uint64_t cnt = (t + 1 == threads) ? spec.count - t * chunk : chunk;
    pool.emplace_back([&buffer, &parts, t, k = spec.k, from, cnt] {
      detail::count_range(buffer, k, from, cnt, parts[t]);
    });
  }
  for (auto& th : pool) th.join();
  for (auto& part : parts) table.merge(part);
  return table;
}

// Overlapping occurrences of word with start positions in [1, n-|word|+1].
inline std::uint64_t count_occurrences(const DigitBuffer& buffer,
                                       const std::vector<digit_t>& word, std::uint64_t n) {
  if (word.empty()) throw precondition_error("word must be nonempty");
  if (n > buffer.size())
    throw precondition_error("prefix length exceeds the buffer");
  if (n < word.size()) return 0;
  std::uint32_t b = buffer.base().value();
  std::uint32_t k = static_cast<std::uint32_t>(word.size());
  std::int64_t target = encode_word(word, buffer.base());
  std::int64_t modulus = checked_pow64(b, k - 1);
  std::int64_t code = 0;
  for (std::uint64_t p = 1; p <= k; ++p) code = code * b + buffer.at(p);
  std::uint64_t hits = code == target ? 1 : 0;
  for (std::uint64_t p = 2; p + k - 1 <= n; ++p) {
    code = (code % modulus) * b + buffer.at(p + k - 1);
    if (code == target) ++hits;
  }
  return hits;
}

// N_j = number of words occurring exactly j times, with an overflow bucket
// for j > j_max. The buckets partition the word space: sum N_j + N_> = b^k.
struct Histogram {
  std::vector<std::uint64_t> n_j;  // index j in [0, j_max]
  std::uint64_t overflow = 0;
};

inline Histogram histogram(const OccurrenceTable& table, std::uint32_t j_max) {
  if (j_max >= OccurrenceTable::kSaturated)
    throw precondition_error("j_max must stay below the counter saturation cap");
  Histogram h;
  h.n_j.assign(j_max + 1, 0);
  std::uint64_t present = 0;
  table.for_each_present([&](std::int64_t, std::uint64_t c) {
    ++present;
    if (c <= j_max)
      ++h.n_j[static_cast<std::size_t>(c)];
    else
      ++h.overflow;
  });
  h.n_j[0] = static_cast<std::uint64_t>(table.word_space()) - present;
  return h;
}

// Number of length-k words that occur with a window contained in [m, e)
// but at no start position in [a, m). The late range counts only windows
// that fit inside it (starts m .. e-k); the early range is start-based, its
// windows may run past m.
inline std::uint64_t fresh_word_count(const DigitBuffer& buffer, std::uint32_t k,
                                      std::uint64_t a, std::uint64_t m, std::uint64_t e,
                                      CountingOptions opts = {}) {
  if (k < 1) throw precondition_error("word length must be >= 1");
  if (!(1 <= a && a < m && m < e))
    throw precondition_error("fresh word ranges need 1 <= a < m < e");
  std::uint64_t late_last = e >= m + k ? e - k : 0;  // no contained window otherwise
  std::uint64_t need = m + k - 2 > e - 1 ? m + k - 2 : e - 1;
  if (need > buffer.size())
    throw precondition_error("buffer too short for the requested ranges");
  if (late_last == 0) return 0;

  std::int64_t space = checked_pow64(buffer.base().value(), k);
  std::uint32_t b = buffer.base().value();
  std::int64_t modulus = checked_pow64(b, k - 1);

  auto scan = [&](std::uint64_t from, std::uint64_t to, auto&& mark) {
    std::int64_t code = 0;
    for (std::uint64_t p = from; p < from + k; ++p) code = code * b + buffer.at(p);
    mark(code);
    for (std::uint64_t s = from + 1; s <= to; ++s) {
      code = (code % modulus) * b + buffer.at(s + k - 1);
      mark(code);
    }
  };

  if (static_cast<std::uint64_t>(space) <= opts.dense_cap) {
    std::vector<std::uint8_t> early(static_cast<std::size_t>(space), 0);
    std::vector<std::uint8_t> late(static_cast<std::size_t>(space), 0);
    scan(a, m - 1, [&](std::int64_t c) { early[static_cast<std::size_t>(c)] = 1; });
    scan(m, late_last, [&](std::int64_t c) { late[static_cast<std::size_t>(c)] = 1; });
    std::uint64_t fresh = 0;
    for (std::int64_t c = 0; c < space; ++c)
      if (late[static_cast<std::size_t>(c)] && !early[static_cast<std::size_t>(c)]) ++fresh;
    return fresh;
  }
  std::unordered_set<std::int64_t> early, late;
  scan(a, m - 1, [&](std::int64_t c) { early.insert(c); });
  scan(m, late_last, [&](std::int64_t c) { late.insert(c); });
  std::uint64_t fresh = 0;
  for (std::int64_t c : late)
    if (!early.count(c)) ++fresh;
  return fresh;
}

// Fraction of the b^k possible words that occur somewhere in the first
// prefix_len digits (windows contained in the prefix).
inline Rational distinct_word_fraction(const DigitBuffer& buffer, std::uint32_t k,
                                       std::uint64_t prefix_len, CountingOptions opts = {}) {
  if (prefix_len < k) return Rational(0);
  if (prefix_len > buffer.size())
    throw precondition_error("prefix length exceeds the buffer");
  OccurrenceTable t =
      count_words(buffer, WindowSpec{k, 1, prefix_len - k + 1}, opts);
  return Rational(BigInt(t.distinct()), big_pow(buffer.base().value(), k));
}

}  // namespace pgen
