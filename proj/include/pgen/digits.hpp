#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pgen/errors.hpp"
#include "pgen/rational.hpp"

namespace pgen {

using digit_t = std::uint32_t;

// Digit alphabet size, b >= 2. Text formats cap the base at 36 symbols;
// the packed binary format carries any base up to 65535.
class Base {
public:
  explicit Base(std::uint32_t b) : b_(b) {
    if (b < 2) throw precondition_error("base must be at least 2");
  }
  std::uint32_t value() const { return b_; }
  friend bool operator==(Base a, Base b) { return a.b_ == b.b_; }
  friend bool operator!=(Base a, Base b) { return a.b_ != b.b_; }

private:
  std::uint32_t b_;
};

// Contiguous digit storage; positions are 1-based throughout the library.
class DigitBuffer {
public:
  DigitBuffer(Base base, std::vector<digit_t> digits)
      : base_(base), d_(std::move(digits)) {
    for (digit_t x : d_)
      if (x >= base_.value())
        throw precondition_error("digit value " + std::to_string(x) +
                                 " out of range for base " + std::to_string(base_.value()));
  }
  Base base() const { return base_; }
  std::uint64_t size() const { return d_.size(); }
  digit_t at(std::uint64_t pos) const {
    if (pos < 1 || pos > d_.size())
      throw precondition_error("digit position " + std::to_string(pos) + " out of range");
    return d_[pos - 1];
  }
  const std::vector<digit_t>& data() const { return d_; }

private:
  Base base_;
  std::vector<digit_t> d_;
};

// Pull cursor over a stream, starting at position 1.
class DigitReader {
public:
  virtual ~DigitReader() = default;
  virtual digit_t next() = 0;
};

// Immutable stream descriptor. reader() yields a fresh cursor from position 1,
// so any stream can be re-scanned deterministically.
class DigitStream {
public:
  DigitStream(Base base, std::string descriptor, std::optional<std::uint64_t> length,
              std::function<std::unique_ptr<DigitReader>()> make)
      : base_(base),
        descriptor_(std::move(descriptor)),
        length_(length),
        make_(std::move(make)) {}

  Base base() const { return base_; }
  const std::string& describe() const { return descriptor_; }
  std::optional<std::uint64_t> length() const { return length_; }
  std::unique_ptr<DigitReader> reader() const { return make_(); }

private:
  Base base_;
  std::string descriptor_;
  std::optional<std::uint64_t> length_;  // nullopt: unbounded
  std::function<std::unique_ptr<DigitReader>()> make_;
};

inline DigitBuffer materialize(const DigitStream& s, std::uint64_t n) {
  if (s.length() && *s.length() < n)
    throw precondition_error("stream provides only " + std::to_string(*s.length()) +
                             " digits, " + std::to_string(n) + " requested");
  std::vector<digit_t> out;
  out.reserve(n);
  auto r = s.reader();
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(r->next());
  return DigitBuffer(s.base(), std::move(out));
}

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Multiply-high reduction of a 64-bit word to [0, b): one PRNG word per
// digit, no rejection, identical on every platform with 128-bit multiplies.
inline digit_t reduce_to_digit(std::uint64_t r, std::uint32_t b) {
  return static_cast<digit_t>((static_cast<unsigned __int128>(r) * b) >> 64);
}

inline std::vector<digit_t> to_base_digits(std::uint64_t value, std::uint32_t b) {
  std::vector<digit_t> rep;
  while (value) {
    rep.push_back(static_cast<digit_t>(value % b));
    value /= b;
  }
  if (rep.empty()) rep.push_back(0);
  std::reverse(rep.begin(), rep.end());
  return rep;
}

}  // namespace detail

// splitmix64-driven stream; one generator word per digit.
inline DigitStream stream_random(Base base, std::uint64_t seed) {
  struct R : DigitReader {
    std::uint64_t state;
    std::uint32_t b;
    digit_t next() override { return detail::reduce_to_digit(detail::splitmix64_next(state), b); }
  };
  std::uint32_t b = base.value();
  return DigitStream(base, "random:" + std::to_string(seed) + "@b" + std::to_string(b),
                     std::nullopt, [seed, b] {
                       auto r = std::make_unique<R>();
                       r->state = seed;
                       r->b = b;
                       return r;
                     });
}

inline DigitStream stream_constant(Base base, digit_t digit) {
  if (digit >= base.value())
    throw precondition_error("constant digit " + std::to_string(digit) +
                             " out of range for base " + std::to_string(base.value()));
  struct R : DigitReader {
    digit_t d;
    digit_t next() override { return d; }
  };
  return DigitStream(base, "constant:" + std::to_string(digit) + "@b" +
                               std::to_string(base.value()),
                     std::nullopt, [digit] {
                       auto r = std::make_unique<R>();
                       r->d = digit;
                       return r;
                     });
}

// Concatenated base-b representations of 1, 2, 3, ...
inline DigitStream stream_champernowne(Base base) {
  struct R : DigitReader {
    std::uint64_t current = 0;
    std::uint32_t b;
    std::vector<digit_t> rep;
    std::size_t idx = 0;
    digit_t next() override {
      if (idx == rep.size()) {
        ++current;
        rep = detail::to_base_digits(current, b);
        idx = 0;
      }
      return rep[idx++];
    }
  };
  std::uint32_t b = base.value();
  return DigitStream(base, "champernowne@b" + std::to_string(b), std::nullopt, [b] {
    auto r = std::make_unique<R>();
    r->b = b;
    return r;
  });
}

namespace detail {

// Lyndon-word concatenation; returns the lexicographically least de Bruijn
// sequence of order k, length exactly b^k.
inline std::vector<digit_t> fkm_debruijn(std::uint32_t b, std::uint32_t k, std::uint64_t cap) {
  std::int64_t space = checked_pow64(b, k);
  if (static_cast<std::uint64_t>(space) > cap)
    throw resource_error("order-" + std::to_string(k) + " de Bruijn table of " +
                         std::to_string(space) + " digits exceeds the cap");
  std::vector<digit_t> a(k + 1, 0), seq;
  seq.reserve(static_cast<std::size_t>(space));
  std::function<void(std::uint32_t, std::uint32_t)> db = [&](std::uint32_t t, std::uint32_t p) {
    if (t > k) {
      if (k % p == 0)
        for (std::uint32_t i = 1; i <= p; ++i) seq.push_back(a[i]);
    } else {
      a[t] = a[t - p];
      db(t + 1, p);
      for (digit_t j = a[t - p] + 1; j < b; ++j) {
        a[t] = j;
        db(t + 1, t);
      }
    }
  };
  db(1, 1);
  if (seq.size() != static_cast<std::size_t>(space))
    throw internal_error("de Bruijn generation produced the wrong length");
  return seq;
}

struct CyclicReader : DigitReader {
  std::shared_ptr<const std::vector<digit_t>> data;
  std::size_t idx = 0;
  digit_t next() override {
    digit_t d = (*data)[idx];
    if (++idx == data->size()) idx = 0;
    return d;
  }
};

}  // namespace detail

// Cyclic repetition of the order-k de Bruijn cycle: the first b^k + k - 1
// digits contain every length-k word exactly once.
inline DigitStream stream_debruijn(Base base, std::uint32_t k,
                                   std::uint64_t cap = (std::uint64_t{1} << 26)) {
  if (k < 1) throw precondition_error("de Bruijn order must be >= 1");
  auto data = std::make_shared<const std::vector<digit_t>>(
      detail::fkm_debruijn(base.value(), k, cap));
  return DigitStream(base,
                     "debruijn:k=" + std::to_string(k) + "@b" + std::to_string(base.value()),
                     std::nullopt, [data] {
                       auto r = std::make_unique<detail::CyclicReader>();
                       r->data = data;
                       return r;
                     });
}

namespace detail {

// Backtracking search for the lexicographically least sequence whose prefix
// of length b^k + k - 1 visits every length-k word exactly once, for every
// k up to max_order simultaneously. Succeeds for every base >= 3.
inline std::vector<digit_t> nested_debruijn(std::uint32_t b, std::uint32_t max_order,
                                            std::uint64_t cap) {
  std::vector<std::int64_t> pw(max_order + 1);
  for (std::uint32_t k = 0; k <= max_order; ++k) pw[k] = checked_pow64(b, k);
  if (static_cast<std::uint64_t>(pw[max_order]) > cap)
    throw resource_error("nested de Bruijn prefix exceeds the cap");

  const std::uint64_t len = static_cast<std::uint64_t>(pw[max_order]) + max_order - 1;
  std::vector<digit_t> seq(len + 1, 0);   // 1-based
  std::vector<digit_t> cand(len + 2, 0);  // next digit to try at position
  std::vector<std::vector<std::uint8_t>> seen(max_order + 1);
  for (std::uint32_t k = 1; k <= max_order; ++k) seen[k].assign(pw[k], 0);

  auto code_at = [&](std::uint64_t start, std::uint32_t k) {
    std::int64_t c = 0;
    for (std::uint64_t p = start; p < start + k; ++p) c = c * b + seq[p];
    return c;
  };
  // Orders whose uniqueness constraint covers the window ending at pos.
  auto constrained = [&](std::uint64_t pos, std::uint32_t k) {
    return pos >= k && pos - k + 1 <= static_cast<std::uint64_t>(pw[k]);
  };

  std::uint64_t pos = 1;
  cand[1] = 0;
  while (pos <= len) {
    digit_t d = cand[pos];
    if (d >= b) {
      if (pos == 1) throw internal_error("nested de Bruijn search exhausted; base too small");
      --pos;
      for (std::uint32_t k = 1; k <= max_order; ++k)
        if (constrained(pos, k)) seen[k][code_at(pos - k + 1, k)] = 0;
      ++cand[pos];
      continue;
    }
    seq[pos] = d;
    bool ok = true;
    for (std::uint32_t k = 1; k <= max_order && ok; ++k)
      if (constrained(pos, k) && seen[k][code_at(pos - k + 1, k)]) ok = false;
    if (!ok) {
      ++cand[pos];
      continue;
    }
    for (std::uint32_t k = 1; k <= max_order; ++k)
      if (constrained(pos, k)) seen[k][code_at(pos - k + 1, k)] = 1;
    ++pos;
    cand[pos] = 0;
  }
  seq.erase(seq.begin());  // drop the 1-based pad
  return seq;
}

}  // namespace detail

// Stream whose prefix of length b^k + k - 1 is an order-k de Bruijn sequence
// for every k <= max_order. Requires base >= 3; continues cyclically with
// period b^max_order past the constrained prefix.
inline DigitStream stream_extend_debruijn(Base base, std::uint32_t max_order,
                                          std::uint64_t cap = (std::uint64_t{1} << 20)) {
  if (base.value() < 3)
    throw precondition_error("nested de Bruijn streams need base >= 3");
  if (max_order < 1) throw precondition_error("max order must be >= 1");
  auto prefix = detail::nested_debruijn(base.value(), max_order, cap);
  // The first b^max_order digits already repeat consistently with the tail
  // of the constrained prefix, so a cyclic continuation is well defined.
  std::uint64_t period = prefix.size() - (max_order - 1);
  auto data = std::make_shared<const std::vector<digit_t>>(prefix.begin(),
                                                           prefix.begin() + period);
  return DigitStream(base,
                     "extdebruijn:max=" + std::to_string(max_order) + "@b" +
                         std::to_string(base.value()),
                     std::nullopt, [data] {
                       auto r = std::make_unique<detail::CyclicReader>();
                       r->data = data;
                       return r;
                     });
}

inline DigitStream stream_from_buffer(DigitBuffer buffer, std::string label = "buffer") {
  auto data = std::make_shared<const DigitBuffer>(std::move(buffer));
  struct R : DigitReader {
    std::shared_ptr<const DigitBuffer> buf;
    std::uint64_t pos = 1;
    digit_t next() override {
      if (pos > buf->size()) throw precondition_error("read past end of digit buffer");
      return buf->at(pos++);
    }
  };
  return DigitStream(data->base(), label + "@b" + std::to_string(data->base().value()),
                     data->size(), [data] {
                       auto r = std::make_unique<R>();
                       r->buf = data;
                       return r;
                     });
}

// ---------------------------------------------------------------------------
// Digit files.
//
// ascii: one symbol per digit from 0-9a-z (bases up to 36), newlines ignored.
// packed: 16-byte header
//     offset 0  magic "PGDG"
//     offset 4  version (1)
//     offset 5  base, u16 little-endian
//     offset 7  reserved (0)
//     offset 8  digit count, u64 little-endian
//   followed by the digits bit-packed big-endian at the minimal width
//   w = bit_width(base-1); the final partial byte is zero-padded.
// ---------------------------------------------------------------------------

enum class DigitFileFormat { ascii, packed };

namespace detail {

inline char ascii_symbol(digit_t d) {
  return d < 10 ? static_cast<char>('0' + d) : static_cast<char>('a' + d - 10);
}

inline int ascii_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return c - 'a' + 10;
  if (c >= 'A' && c <= 'Z') return c - 'A' + 10;
  return -1;
}

inline std::uint32_t packed_width(std::uint32_t base) {
  std::uint32_t w = 0, v = base - 1;
  while (v) {
    ++w;
    v >>= 1;
  }
  return w == 0 ? 1 : w;
}

}  // namespace detail

inline void write_digit_file(const std::string& path, const DigitBuffer& buffer,
                             DigitFileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  if (format == DigitFileFormat::ascii) {
    if (buffer.base().value() > 36)
      throw precondition_error("ascii digit files support bases up to 36");
    std::string text;
    text.reserve(buffer.size());
    for (digit_t d : buffer.data()) text.push_back(detail::ascii_symbol(d));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  } else {
    std::uint32_t b = buffer.base().value();
    if (b > 0xffff) throw precondition_error("packed digit files support bases up to 65535");
    std::uint32_t w = detail::packed_width(b);
    std::uint64_t n = buffer.size();
    unsigned char header[16] = {'P', 'G', 'D', 'G', 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    header[5] = static_cast<unsigned char>(b & 0xff);
    header[6] = static_cast<unsigned char>((b >> 8) & 0xff);
    for (int i = 0; i < 8; ++i) header[8 + i] = static_cast<unsigned char>((n >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(header), 16);
    std::vector<unsigned char> bytes;
    bytes.reserve((n * w + 7) / 8);
    std::uint32_t acc = 0, nbits = 0;
    for (digit_t d : buffer.data()) {
      acc = (acc << w) | d;
      nbits += w;
      while (nbits >= 8) {
        bytes.push_back(static_cast<unsigned char>((acc >> (nbits - 8)) & 0xff));
        nbits -= 8;
        acc &= (1u << nbits) - 1;
      }
    }
    if (nbits > 0) bytes.push_back(static_cast<unsigned char>((acc << (8 - nbits)) & 0xff));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw io_error("write to '" + path + "' failed");
}

inline DigitBuffer read_digit_file(const std::string& path, DigitFileFormat format,
                                   std::optional<Base> base = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  if (format == DigitFileFormat::ascii) {
    if (!base) throw precondition_error("ascii digit files need an explicit base");
    if (base->value() > 36)
      throw precondition_error("ascii digit files support bases up to 36");
    std::vector<digit_t> digits;
    char c;
    while (in.get(c)) {
      if (c == '\n' || c == '\r') continue;
      int v = detail::ascii_value(c);
      if (v < 0 || static_cast<std::uint32_t>(v) >= base->value())
        throw precondition_error(std::string("invalid symbol '") + c + "' for base " +
                                 std::to_string(base->value()));
      digits.push_back(static_cast<digit_t>(v));
    }
    return DigitBuffer(*base, std::move(digits));
  }
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (in.gcount() != 16 || header[0] != 'P' || header[1] != 'G' || header[2] != 'D' ||
      header[3] != 'G')
    throw io_error("'" + path + "' is not a packed digit file (bad or truncated header)");
  if (header[4] != 1) throw io_error("unsupported packed digit file version");
  std::uint32_t b = header[5] | (static_cast<std::uint32_t>(header[6]) << 8);
  if (b < 2) throw io_error("packed digit file declares base < 2");
  if (base && base->value() != b)
    throw precondition_error("packed file has base " + std::to_string(b) + ", expected " +
                             std::to_string(base->value()));
  std::uint64_t n = 0;
  for (int i = 7; i >= 0; --i) n = (n << 8) | header[8 + i];
  std::uint32_t w = detail::packed_width(b);
  std::uint64_t need = (n * w + 7) / 8;
  std::vector<unsigned char> bytes(need);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(need));
  if (static_cast<std::uint64_t>(in.gcount()) != need)
    throw io_error("packed digit file truncated: payload shorter than header count");
  std::vector<digit_t> digits;
  digits.reserve(n);
  std::uint64_t bitpos = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint32_t v = 0;
    for (std::uint32_t j = 0; j < w; ++j, ++bitpos)
      v = (v << 1) | ((bytes[bitpos >> 3] >> (7 - (bitpos & 7))) & 1);
    if (v >= b)
      throw io_error("packed digit file contains digit " + std::to_string(v) +
                     " out of range for base " + std::to_string(b));
    digits.push_back(v);
  }
  return DigitBuffer(Base(b), std::move(digits));
}

inline DigitStream stream_file(const std::string& path, DigitFileFormat format,
                               std::optional<Base> base = std::nullopt) {
  return stream_from_buffer(read_digit_file(path, format, base), "file:" + path);
}

}  // namespace pgen
