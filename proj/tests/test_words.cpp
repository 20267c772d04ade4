#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>
#include <vector>

#include "pgen/digits.hpp"
#include "pgen/words.hpp"

using namespace pgen;

namespace {

// Naive recount of every window from scratch; the independent oracle all
// counting paths are checked against.
std::map<std::int64_t, std::uint64_t> naive_counts(const DigitBuffer& buf, std::uint32_t k,
                                                   std::uint64_t first, std::uint64_t count) {
  std::map<std::int64_t, std::uint64_t> m;
  for (std::uint64_t s = first; s < first + count; ++s) {
    std::vector<digit_t> w;
    for (std::uint64_t p = s; p < s + k; ++p) w.push_back(buf.at(p));
    ++m[encode_word(w, buf.base())];
  }
  return m;
}

bool table_matches(const OccurrenceTable& table, const std::map<std::int64_t, std::uint64_t>& m) {
  std::uint64_t present = 0;
  bool ok = true;
  table.for_each_present([&](std::int64_t code, std::uint64_t c) {
    ++present;
    auto it = m.find(code);
    if (it == m.end() || it->second != c) ok = false;
  });
  return ok && present == m.size();
}

DigitBuffer random_buffer(std::uint32_t base, std::uint64_t n, std::uint64_t seed) {
  return materialize(stream_random(Base(base), seed), n);
}

}  // namespace

TEST_CASE("word codes round trip") {
  Base b3(3);
  std::vector<digit_t> w{2, 0, 1};
  std::int64_t code = encode_word(w, b3);
  CHECK(code == 2 * 9 + 0 * 3 + 1);
  CHECK(decode_word(code, 3, b3) == w);
  CHECK_THROWS_AS(encode_word({3}, b3), precondition_error);
}

TEST_CASE("counting matches the naive oracle exhaustively, base 2") {
  // every base-2 buffer with n <= 8, every k <= 3 (the larger sweep runs in
  // the acceptance gate)
  for (std::uint64_t n = 1; n <= 8; ++n) {
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
      std::vector<digit_t> d(n);
      for (std::uint64_t i = 0; i < n; ++i) d[i] = (bits >> i) & 1;
      DigitBuffer buf(Base(2), d);
      for (std::uint32_t k = 1; k <= 3 && k <= n; ++k) {
        std::uint64_t count = n - k + 1;
        OccurrenceTable t = count_words(buf, WindowSpec{k, 1, count});
        REQUIRE(table_matches(t, naive_counts(buf, k, 1, count)));
        REQUIRE(t.windows() == count);
      }
    }
  }
}

TEST_CASE("counting matches the naive oracle on random instances") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    std::uint32_t base = 2 + rng() % 2;
    std::uint32_t k = 1 + rng() % 6;
    std::uint64_t n = k + rng() % 2000;
    DigitBuffer buf = random_buffer(base, n, rng());
    std::uint64_t first = 1 + rng() % (n - k + 1);
    std::uint64_t count = 1 + rng() % (n - k + 2 - first);
    OccurrenceTable t = count_words(buf, WindowSpec{k, first, count});
    REQUIRE(table_matches(t, naive_counts(buf, k, first, count)));
  }
}

TEST_CASE("dense, sparse, and chunked paths agree") {
  DigitBuffer buf = random_buffer(3, 5000, 99);
  WindowSpec spec{4, 1, 4997};
  OccurrenceTable dense = count_words(buf, spec, CountingOptions{1 << 26, 1});
  OccurrenceTable sparse = count_words(buf, spec, CountingOptions{1, 1});
  OccurrenceTable chunked = count_words(buf, spec, CountingOptions{1 << 26, 3});
  CHECK(dense.dense());
  CHECK_FALSE(sparse.dense());
  REQUIRE(dense.windows() == sparse.windows());
  REQUIRE(dense.windows() == chunked.windows());
  for (std::int64_t code = 0; code < dense.word_space(); ++code) {
    REQUIRE(dense.count(code) == sparse.count(code));
    REQUIRE(dense.count(code) == chunked.count(code));
  }
  CHECK(dense.distinct() == sparse.distinct());
}

TEST_CASE("saturating counters stay exact through the ledger") {
  // one word repeated far past the 16-bit cap
  DigitBuffer buf = materialize(stream_constant(Base(2), 0), 70000);
  OccurrenceTable t = count_words(buf, WindowSpec{1, 1, 70000});
  CHECK(t.dense());
  CHECK(t.count(0) == 70000);
  CHECK(t.count(1) == 0);
  CHECK(t.distinct() == 1);

  // merge across the saturation boundary: two chunks of 40000
  OccurrenceTable merged = count_words(buf, WindowSpec{1, 1, 70000}, CountingOptions{1 << 26, 2});
  CHECK(merged.count(0) == 70000);
}

TEST_CASE("window ranges are validated") {
  DigitBuffer buf(Base(2), {0, 1, 0, 1});
  CHECK_THROWS_AS(count_words(buf, WindowSpec{0, 1, 1}), precondition_error);
  CHECK_THROWS_AS(count_words(buf, WindowSpec{2, 0, 1}), precondition_error);
  CHECK_THROWS_AS(count_words(buf, WindowSpec{2, 1, 4}), precondition_error);
  CHECK(count_words(buf, WindowSpec{2, 1, 3}).windows() == 3);
}

TEST_CASE("overlapping occurrence count") {
  // 111 contains 11 at starts 1 and 2
  DigitBuffer buf(Base(2), {1, 1, 1, 0, 1, 1});
  CHECK(count_occurrences(buf, {1, 1}, 3) == 2);
  CHECK(count_occurrences(buf, {1, 1}, 6) == 3);
  CHECK(count_occurrences(buf, {1, 1, 1}, 6) == 1);
  CHECK(count_occurrences(buf, {0}, 6) == 1);
  CHECK(count_occurrences(buf, {1, 0, 1}, 2) == 0);  // n shorter than the word
  CHECK_THROWS_AS(count_occurrences(buf, {}, 6), precondition_error);

  std::mt19937_64 rng(77);
  DigitBuffer big = random_buffer(2, 3000, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::uint32_t k = 1 + rng() % 8;
    std::vector<digit_t> w;
    for (std::uint32_t i = 0; i < k; ++i) w.push_back(rng() % 2);
    std::uint64_t n = k + rng() % (3000 - k);
    std::uint64_t naive = 0;
    for (std::uint64_t s = 1; s + k - 1 <= n; ++s) {
      bool hit = true;
      for (std::uint32_t i = 0; i < k; ++i)
        if (big.at(s + i) != w[i]) hit = false;
      if (hit) ++naive;
    }
    REQUIRE(count_occurrences(big, w, n) == naive);
  }
}

TEST_CASE("histogram partitions the word space") {
  DigitBuffer buf = random_buffer(2, 1000, 21);
  OccurrenceTable t = count_words(buf, WindowSpec{6, 1, 995});
  Histogram h = histogram(t, 10);
  std::uint64_t total = h.overflow;
  for (std::uint64_t nj : h.n_j) total += nj;
  CHECK(total == 64);
  CHECK(h.n_j[0] == 64 - t.distinct());
  // weighted sum of counts equals the number of windows
  std::uint64_t weighted = 0;
  for (std::uint64_t j = 0; j < h.n_j.size(); ++j) weighted += j * h.n_j[j];
  std::uint64_t overflow_weight = 0;
  t.for_each_present([&](std::int64_t, std::uint64_t c) {
    if (c > 10) overflow_weight += c;
  });
  CHECK(weighted + overflow_weight == 995);
}

TEST_CASE("fresh words: late-contained vs early-start semantics") {
  // positions:        123456789
  // digits:           010011010
  DigitBuffer buf(Base(2), {0, 1, 0, 0, 1, 1, 0, 1, 0});
  // early starts [1,3]: 01,10,00 ; late contained in [4,10): starts 4..8:
  // 01,11,10,01,10 -> fresh = {11}
  CHECK(fresh_word_count(buf, 2, 1, 4, 10) == 1);
  // degenerate: late range shorter than k -> no contained window
  CHECK(fresh_word_count(buf, 4, 1, 6, 9) == 0);
  CHECK_THROWS_AS(fresh_word_count(buf, 2, 3, 3, 5), precondition_error);
  CHECK_THROWS_AS(fresh_word_count(buf, 2, 1, 4, 11), precondition_error);

  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 40; ++trial) {
    std::uint32_t base = 2 + rng() % 2;
    std::uint32_t k = 1 + rng() % 4;
    std::uint64_t n = 20 + rng() % 400;
    DigitBuffer big = random_buffer(base, n, rng());
    std::uint64_t a = 1 + rng() % (n / 2);
    std::uint64_t m = a + 1 + rng() % (n / 4 + 1);
    std::uint64_t e = m + 1 + rng() % (n - m);
    if (std::max(e - 1, m + k - 2) > n) continue;
    std::set<std::int64_t> early, late;
    for (std::uint64_t s = a; s < m; ++s) {
      std::vector<digit_t> w;
      for (std::uint64_t p = s; p < s + k; ++p) w.push_back(big.at(p));
      early.insert(encode_word(w, big.base()));
    }
    for (std::uint64_t s = m; s + k <= e; ++s) {
      std::vector<digit_t> w;
      for (std::uint64_t p = s; p < s + k; ++p) w.push_back(big.at(p));
      late.insert(encode_word(w, big.base()));
    }
    std::uint64_t fresh = 0;
    for (std::int64_t c : late)
      if (!early.count(c)) ++fresh;
    REQUIRE(fresh_word_count(big, k, a, m, e) == fresh);
    // dense and sparse storage agree
    REQUIRE(fresh_word_count(big, k, a, m, e, CountingOptions{1, 1}) == fresh);
  }
}

TEST_CASE("distinct word fraction") {
  DigitBuffer buf(Base(2), {0, 0, 0, 1});
  CHECK(distinct_word_fraction(buf, 2, 4) == Rational(1, 2));  // 00,00,01 -> {00,01}
  CHECK(distinct_word_fraction(buf, 2, 3) == Rational(1, 4));  // 00,00 -> {00}
  CHECK(distinct_word_fraction(buf, 3, 2) == Rational(0));     // prefix shorter than k
  CHECK_THROWS_AS(distinct_word_fraction(buf, 2, 9), precondition_error);
}
