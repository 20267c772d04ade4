#pragma once

#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pgen/digits.hpp"
#include "pgen/errors.hpp"
#include "pgen/rational.hpp"

namespace pgen {

// Stream reductions that rewrite a source stream x block by block. The
// bold/light family copies x on the head of each block and pads the tail
// with zeros; the d2 family splits each block into a copy segment, a zero
// segment sized by the even z values, and a replay segment sized by the odd
// z values that repeats digits of x from the start of the block.
enum class Flavor { boldfast, light, d2bold, d2light };

inline const char* flavor_name(Flavor f) {
  switch (f) {
    case Flavor::boldfast: return "boldfast";
    case Flavor::light: return "light";
    case Flavor::d2bold: return "d2bold";
    case Flavor::d2light: return "d2light";
  }
  return "?";
}

inline Flavor parse_flavor(const std::string& s) {
  if (s == "boldfast") return Flavor::boldfast;
  if (s == "light") return Flavor::light;
  if (s == "d2bold") return Flavor::d2bold;
  if (s == "d2light") return Flavor::d2light;
  throw precondition_error("unknown construction flavor '" + s + "'");
}

inline bool is_d2(Flavor f) { return f == Flavor::d2bold || f == Flavor::d2light; }

// Tail rules make z decidable beyond its explicit prefix:
//   constant c        n -> c
//   identity          n -> n + 2
//   affine a c        n -> a*n + c
// d2 flavors need power-of-two values >= 4, so there the growing rules move
// into the exponent (identity -> 2^(n+2), affine -> 2^(a*n+c)) while
// constants and explicit prefix values must already be powers of two >= 4.
struct TailRule {
  enum class Kind { constant, identity, affine };
  Kind kind = Kind::constant;
  std::int64_t a = 0;
  std::int64_t c = 2;

  static TailRule constant(std::int64_t c) { return TailRule{Kind::constant, 0, c}; }
  static TailRule identity() { return TailRule{Kind::identity, 0, 0}; }
  static TailRule affine(std::int64_t a, std::int64_t c) { return TailRule{Kind::affine, a, c}; }

  std::int64_t raw(std::uint64_t n) const {
    switch (kind) {
      case Kind::constant: return c;
      case Kind::identity: return static_cast<std::int64_t>(n) + 2;
      case Kind::affine: return a * static_cast<std::int64_t>(n) + c;
    }
    return 0;
  }
  bool unbounded() const {
    return kind == Kind::identity || (kind == Kind::affine && a >= 1);
  }
  std::string describe() const {
    switch (kind) {
      case Kind::constant: return "const:" + std::to_string(c);
      case Kind::identity: return "id";
      case Kind::affine: return "affine:" + std::to_string(a) + ":" + std::to_string(c);
    }
    return "?";
  }
};

// z as an explicit finite prefix followed by parity-indexed tail rules.
// Indices are 0-based; even positions steer the zero segments (normality),
// odd positions steer the replay segments (occurrence statistics).
struct ZSequence {
  std::vector<std::int64_t> prefix;
  TailRule even_tail = TailRule::constant(2);
  TailRule odd_tail = TailRule::constant(2);

  static ZSequence uniform(TailRule tail, std::vector<std::int64_t> prefix = {}) {
    ZSequence z;
    z.prefix = std::move(prefix);
    z.even_tail = tail;
    z.odd_tail = tail;
    return z;
  }
};

namespace detail {

inline std::int64_t pow2_clamped(std::int64_t exponent) {
  if (exponent < 2) return 4;
  if (exponent > 62) exponent = 62;
  return std::int64_t{1} << exponent;
}

}  // namespace detail

// Value of z at index n. d2 mode maps rule values into powers of two as
// documented on TailRule and rejects explicit values that are not powers
// of two >= 4; plain mode rejects values below 2.
inline std::int64_t z_value(const ZSequence& z, std::uint64_t n, bool d2_mode) {
  std::int64_t v;
  bool from_prefix = n < z.prefix.size();
  if (from_prefix) {
    v = z.prefix[n];
  } else {
    const TailRule& rule = (n % 2 == 0) ? z.even_tail : z.odd_tail;
    if (d2_mode && rule.kind != TailRule::Kind::constant)
      return detail::pow2_clamped(rule.raw(n));
    v = rule.raw(n);
  }
  if (d2_mode) {
    if (v < 4 || !std::has_single_bit(static_cast<std::uint64_t>(v)))
      throw precondition_error("z(" + std::to_string(n) + ") = " + std::to_string(v) +
                               " must be a power of two >= 4 for d2 flavors");
  } else if (v < 2) {
    throw precondition_error("z(" + std::to_string(n) + ") = " + std::to_string(v) +
                             " is below 2");
  }
  return v;
}

// Membership in the two tail classes that drive the reductions: C needs the
// even-indexed values to tend to infinity, D the odd-indexed ones. With
// rule-based tails both are decidable from the rule alone.
struct ClassifyResult {
  bool in_C = false;
  bool in_D = false;
};

inline ClassifyResult classify_z(const ZSequence& z) {
  return ClassifyResult{z.even_tail.unbounded(), z.odd_tail.unbounded()};
}

// One construction step: the block [begin, end) = [b^k_prev, b^k).
//   bold/light: copy x on [begin, b1_end), zeros on [b1_end, end)
//   d2: copy on [begin, b1_end), zeros on [b1_end, b2_end), then replay
//       x starting from position begin on [b2_end, end)
struct Block {
  std::uint32_t step = 0;
  std::uint32_t k_prev = 0;
  std::uint32_t k = 0;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::uint64_t b1_end = 0;
  std::uint64_t b2_end = 0;
  std::int64_t ze = 0;  // z used for the zero segment (bold: the only z)
  std::int64_t zo = 0;  // z used for the replay segment (d2 only)
};

struct Schedule {
  Flavor flavor = Flavor::light;
  std::uint32_t base = 2;
  std::vector<std::uint32_t> exponents;  // k_0 .. k_steps
  bool rule_generated = true;            // false when exponents were supplied
  std::string rule;                      // human-readable growth rule
};

struct ScheduleBuild {
  Schedule schedule;
  std::vector<Block> blocks;
};

struct ScheduleOptions {
  std::optional<std::uint32_t> k0;
  std::optional<std::vector<std::uint32_t>> exponents;
  std::uint64_t max_positions = std::uint64_t{1} << 30;
};

namespace detail {

inline std::uint32_t least_pow2_above(std::uint32_t v) {
  return static_cast<std::uint32_t>(std::bit_ceil(static_cast<std::uint64_t>(v) + 1));
}

inline std::uint64_t floor_sum_div(std::uint64_t end, std::int64_t ze, std::int64_t zo) {
  // floor(end/ze + end/zo) without rounding the two terms separately
  BigInt num = BigInt(end) * (BigInt(ze) + BigInt(zo));
  BigInt den = BigInt(ze) * BigInt(zo);
  return (num / den).convert_to<std::uint64_t>();
}

}  // namespace detail

inline ScheduleBuild build_schedule(Flavor flavor, const ZSequence& z, std::uint32_t steps,
                                    Base base, ScheduleOptions opts = {}) {
  if (steps < 1) throw precondition_error("schedule needs at least one step");
  ScheduleBuild out;
  out.schedule.flavor = flavor;
  out.schedule.base = base.value();
  const bool d2 = is_d2(flavor);

  auto z_for_step = [&](std::uint32_t step) -> std::pair<std::int64_t, std::int64_t> {
    if (d2) {
      std::uint64_t n = 2 * (static_cast<std::uint64_t>(step) - 1);
      return {z_value(z, n, true), z_value(z, n + 1, true)};
    }
    std::int64_t v = z_value(z, step - 1, false);
    return {v, 0};
  };

  std::vector<std::uint32_t>& ks = out.schedule.exponents;
  if (opts.exponents) {
    ks = *opts.exponents;
    out.schedule.rule_generated = false;
    out.schedule.rule = "explicit";
    if (ks.size() != static_cast<std::size_t>(steps) + 1)
      throw precondition_error("explicit exponent list must have steps+1 entries");
    for (std::size_t i = 1; i < ks.size(); ++i) {
      if (ks[i] <= ks[i - 1])
        throw precondition_error("exponents must be strictly increasing");
      if (flavor == Flavor::boldfast && ks[i] <= 2 * ks[i - 1])
        throw precondition_error("boldfast needs k_i > 2*k_(i-1); step " + std::to_string(i) +
                                 " has k=" + std::to_string(ks[i]));
      if (d2 && !std::has_single_bit(static_cast<std::uint64_t>(ks[i])))
        throw precondition_error("d2 exponents must be powers of two");
    }
    if (d2 && ks[0] != 0 && !std::has_single_bit(static_cast<std::uint64_t>(ks[0])))
      throw precondition_error("d2 base exponent must be 0 or a power of two");
  } else {
    switch (flavor) {
      case Flavor::boldfast: {
        std::uint32_t k = opts.k0.value_or(1);
        ks.push_back(k);
        for (std::uint32_t i = 1; i <= steps; ++i) {
          k = 2 * k + i + 2;
          ks.push_back(k);
        }
        out.schedule.rule = "k_i = 2*k_(i-1) + i + 2";
        break;
      }
      case Flavor::light: {
        std::uint32_t k = opts.k0.value_or(0);
        ks.push_back(k);
        for (std::uint32_t i = 1; i <= steps; ++i) {
          auto [zi, unused] = z_for_step(i);
          (void)unused;
          std::uint64_t bound = zi > static_cast<std::int64_t>(k)
                                    ? static_cast<std::uint64_t>(zi)
                                    : static_cast<std::uint64_t>(k);
          k = static_cast<std::uint32_t>(bound + 1);
          ks.push_back(k);
        }
        out.schedule.rule = "k_i = least integer above k_(i-1) and z";
        break;
      }
      case Flavor::d2bold: {
        std::uint32_t k = opts.k0.value_or(2);
        if (k != 0 && !std::has_single_bit(static_cast<std::uint64_t>(k)))
          throw precondition_error("d2 base exponent must be 0 or a power of two");
        ks.push_back(k);
        for (std::uint32_t i = 1; i <= steps; ++i) {
          k = detail::least_pow2_above(k);
          ks.push_back(k);
        }
        out.schedule.rule = "k_i = least power of two above k_(i-1)";
        break;
      }
      case Flavor::d2light: {
        std::uint32_t k = opts.k0.value_or(0);
        ks.push_back(k);
        for (std::uint32_t i = 1; i <= steps; ++i) {
          auto [ze, zo] = z_for_step(i);
          std::uint64_t bound = k;
          if (ze > static_cast<std::int64_t>(bound)) bound = static_cast<std::uint64_t>(ze);
          if (zo > static_cast<std::int64_t>(bound)) bound = static_cast<std::uint64_t>(zo);
          if (bound > (std::uint64_t{1} << 30))
            throw resource_error("d2light exponent bound grows past the position budget");
          k = detail::least_pow2_above(static_cast<std::uint32_t>(bound));
          ks.push_back(k);
        }
        out.schedule.rule = "k_i = least power of two above k_(i-1) and z";
        break;
      }
    }
  }

  // Position budget and the mild growth floor every schedule satisfies.
  std::int64_t final_positions = checked_pow64(base.value(), ks.back());
  if (static_cast<std::uint64_t>(final_positions) > opts.max_positions)
    throw resource_error("schedule tops out at " + std::to_string(final_positions) +
                         " positions, above the budget of " +
                         std::to_string(opts.max_positions));
  for (std::uint32_t i = 1; i <= steps; ++i) {
    std::int64_t lo = checked_pow64(base.value(), ks[i - 1]);
    std::int64_t hi = checked_pow64(base.value(), ks[i]);
    if (hi - lo <= static_cast<std::int64_t>(i) - 1)
      throw precondition_error("block " + std::to_string(i) + " is too small");
  }

  for (std::uint32_t i = 1; i <= steps; ++i) {
    Block blk;
    blk.step = i;
    blk.k_prev = ks[i - 1];
    blk.k = ks[i];
    blk.begin = static_cast<std::uint64_t>(checked_pow64(base.value(), blk.k_prev));
    blk.end = static_cast<std::uint64_t>(checked_pow64(base.value(), blk.k));
    auto [ze, zo] = z_for_step(i);
    blk.ze = ze;
    blk.zo = zo;
    if (d2) {
      if (Rational(1, ze) + Rational(1, zo) > Rational(1, 2))
        throw precondition_error("step " + std::to_string(i) +
                                 ": 1/z_even + 1/z_odd must stay at or below 1/2");
      blk.b1_end = blk.end - detail::floor_sum_div(blk.end, ze, zo);
      blk.b2_end = blk.end - blk.end / static_cast<std::uint64_t>(zo);
      if (blk.b1_end <= blk.begin)
        throw precondition_error("step " + std::to_string(i) +
                                 ": copy segment is empty; exponents grow too slowly "
                                 "for the chosen z");
    } else {
      blk.b1_end = blk.end - blk.end / static_cast<std::uint64_t>(ze);
      blk.b2_end = blk.end;
      if (blk.b1_end < blk.begin)
        throw precondition_error("step " + std::to_string(i) +
                                 ": zero segment swallows the whole block");
    }
    out.blocks.push_back(blk);
  }
  return out;
}

namespace detail {

inline std::string schedule_label(const ScheduleBuild& build, const ZSequence& z) {
  std::string s = flavor_name(build.schedule.flavor);
  s += "[k=";
  for (std::size_t i = 0; i < build.schedule.exponents.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(build.schedule.exponents[i]);
  }
  s += ";z=even:" + z.even_tail.describe() + ",odd:" + z.odd_tail.describe() + "]";
  return s;
}

}  // namespace detail

// Reduction stream for the bold/light family: x is copied on the head of
// every block and on the seed prefix [1, b^k_0); the block tails are zeros.
// Past the final block the stream continues as x.
inline DigitStream f_bold(const ZSequence& z, const ScheduleBuild& build,
                          const DigitStream& x) {
  if (is_d2(build.schedule.flavor))
    throw precondition_error("bold reduction needs a boldfast or light schedule");
  if (x.base().value() != build.schedule.base)
    throw precondition_error("schedule and source stream disagree on the base");
  auto blocks = std::make_shared<const std::vector<Block>>(build.blocks);

  struct R : DigitReader {
    DigitStream x;
    std::shared_ptr<const std::vector<Block>> blocks;
    std::unique_ptr<DigitReader> xr;
    std::uint64_t pos = 1;
    std::size_t cursor = 0;
    explicit R(DigitStream xs) : x(std::move(xs)) { xr = x.reader(); }
    digit_t next() override {
      digit_t xd = xr->next();
      digit_t d = xd;
      if (cursor < blocks->size()) {
        const Block& blk = (*blocks)[cursor];
        if (pos >= blk.begin) d = pos < blk.b1_end ? xd : 0;
        if (pos + 1 >= blk.end) ++cursor;
      }
      ++pos;
      return d;
    }
  };
  DigitStream xs = x;
  return DigitStream(x.base(), "bold:" + detail::schedule_label(build, z) + "(" +
                                   x.describe() + ")",
                     std::nullopt,
                     [xs, blocks] {
                       auto r = std::make_unique<R>(xs);
                       r->blocks = blocks;
                       return r;
                     });
}

// Reduction stream for the d2 family: per block, copy x, then zeros, then a
// replay of x restarted from the block's begin position.
inline DigitStream f_d2(const ZSequence& z, const ScheduleBuild& build, const DigitStream& x) {
  if (!is_d2(build.schedule.flavor))
    throw precondition_error("d2 reduction needs a d2bold or d2light schedule");
  if (x.base().value() != build.schedule.base)
    throw precondition_error("schedule and source stream disagree on the base");
  auto blocks = std::make_shared<const std::vector<Block>>(build.blocks);

  struct R : DigitReader {
    DigitStream x;
    std::shared_ptr<const std::vector<Block>> blocks;
    std::unique_ptr<DigitReader> xr;
    std::unique_ptr<DigitReader> replay;
    std::uint64_t pos = 1;
    std::size_t cursor = 0;
    explicit R(DigitStream xs) : x(std::move(xs)) { xr = x.reader(); }
    digit_t next() override {
      digit_t xd = xr->next();
      digit_t d = xd;
      if (cursor < blocks->size()) {
        const Block& blk = (*blocks)[cursor];
        if (pos >= blk.begin) {
          if (pos < blk.b1_end) {
            d = xd;
          } else if (pos < blk.b2_end) {
            d = 0;
          } else {
            if (!replay) {
              replay = x.reader();
              for (std::uint64_t i = 1; i < blk.begin; ++i) replay->next();
            }
            d = replay->next();
          }
        }
        if (pos + 1 >= blk.end) {
          ++cursor;
          replay.reset();
        }
      }
      ++pos;
      return d;
    }
  };
  DigitStream xs = x;
  return DigitStream(x.base(), "d2:" + detail::schedule_label(build, z) + "(" + x.describe() +
                                   ")",
                     std::nullopt,
                     [xs, blocks] {
                       auto r = std::make_unique<R>(xs);
                       r->blocks = blocks;
                       return r;
                     });
}

}  // namespace pgen
