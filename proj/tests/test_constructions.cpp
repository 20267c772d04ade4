#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "pgen/constructions.hpp"
#include "pgen/digits.hpp"

using namespace pgen;

namespace {

std::vector<digit_t> take(const DigitStream& s, std::uint64_t n) {
  std::vector<digit_t> out;
  auto r = s.reader();
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(r->next());
  return out;
}

}  // namespace

TEST_CASE("z values, plain mode") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  CHECK(z_value(two, 0, false) == 2);
  CHECK(z_value(two, 99, false) == 2);

  ZSequence id = ZSequence::uniform(TailRule::identity());
  CHECK(z_value(id, 0, false) == 2);
  CHECK(z_value(id, 5, false) == 7);

  ZSequence aff = ZSequence::uniform(TailRule::affine(2, 3));
  CHECK(z_value(aff, 0, false) == 3);
  CHECK(z_value(aff, 4, false) == 11);

  ZSequence pre = ZSequence::uniform(TailRule::constant(2), {5, 7});
  CHECK(z_value(pre, 0, false) == 5);
  CHECK(z_value(pre, 1, false) == 7);
  CHECK(z_value(pre, 2, false) == 2);

  // values below 2 are rejected
  ZSequence low = ZSequence::uniform(TailRule::affine(3, 1));
  CHECK_THROWS_AS(z_value(low, 0, false), precondition_error);
  CHECK(z_value(low, 1, false) == 4);
}

TEST_CASE("z values, d2 mode map to powers of two") {
  // identity and affine rules name exponents in d2 mode
  ZSequence id = ZSequence::uniform(TailRule::identity());
  CHECK(z_value(id, 0, true) == 4);
  CHECK(z_value(id, 3, true) == 32);

  ZSequence aff = ZSequence::uniform(TailRule::affine(10, 0));
  CHECK(z_value(aff, 1, true) == (std::int64_t{1} << 10));
  CHECK(z_value(aff, 7, true) == (std::int64_t{1} << 62));  // clamped exponent

  // constants and prefix entries must be literal powers of two >= 4
  CHECK(z_value(ZSequence::uniform(TailRule::constant(4)), 9, true) == 4);
  CHECK_THROWS_AS(z_value(ZSequence::uniform(TailRule::constant(6)), 0, true),
                  precondition_error);
  CHECK_THROWS_AS(z_value(ZSequence::uniform(TailRule::constant(2)), 0, true),
                  precondition_error);
  ZSequence pre = ZSequence::uniform(TailRule::constant(4), {8});
  CHECK(z_value(pre, 0, true) == 8);
  ZSequence bad = ZSequence::uniform(TailRule::constant(4), {6});
  CHECK_THROWS_AS(z_value(bad, 0, true), precondition_error);
}

TEST_CASE("tail classification") {
  ZSequence both = ZSequence::uniform(TailRule::identity());
  CHECK(classify_z(both).in_C);
  CHECK(classify_z(both).in_D);

  ZSequence even_only;
  even_only.even_tail = TailRule::identity();
  even_only.odd_tail = TailRule::constant(4);
  CHECK(classify_z(even_only).in_C);
  CHECK_FALSE(classify_z(even_only).in_D);

  ZSequence neither = ZSequence::uniform(TailRule::constant(2));
  CHECK_FALSE(classify_z(neither).in_C);
  CHECK_FALSE(classify_z(neither).in_D);
}

TEST_CASE("generated schedules") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  ScheduleBuild bold = build_schedule(Flavor::boldfast, two, 2, Base(2));
  CHECK(bold.schedule.exponents == std::vector<std::uint32_t>{1, 5, 14});
  CHECK(bold.schedule.rule_generated);

  ZSequence zlight = ZSequence::uniform(TailRule::constant(2), {3, 5, 4});
  ScheduleBuild light = build_schedule(Flavor::light, zlight, 3, Base(2));
  CHECK(light.schedule.exponents == std::vector<std::uint32_t>{0, 4, 6, 7});

  ZSequence d2z;
  d2z.even_tail = TailRule::identity();
  d2z.odd_tail = TailRule::constant(4);
  ScheduleBuild d2 = build_schedule(Flavor::d2bold, d2z, 3, Base(2), {{}, {}, std::uint64_t{1} << 40});
  CHECK(d2.schedule.exponents == std::vector<std::uint32_t>{2, 4, 8, 16});

  ScheduleBuild d2l = build_schedule(Flavor::d2light, d2z, 2, Base(2), {{}, {}, std::uint64_t{1} << 62});
  REQUIRE(d2l.schedule.exponents.size() == 3);
  for (std::size_t i = 1; i < d2l.schedule.exponents.size(); ++i) {
    std::uint32_t k = d2l.schedule.exponents[i];
    CHECK(std::has_single_bit(static_cast<std::uint64_t>(k)));
    CHECK(k > d2l.schedule.exponents[i - 1]);
  }
}

TEST_CASE("explicit exponents are validated") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  ScheduleOptions opt;
  opt.exponents = std::vector<std::uint32_t>{1, 2, 3};
  // boldfast needs k_i > 2 k_{i-1}
  CHECK_THROWS_AS(build_schedule(Flavor::boldfast, two, 2, Base(2), opt), precondition_error);
  opt.exponents = std::vector<std::uint32_t>{1, 3, 8};
  CHECK_NOTHROW(build_schedule(Flavor::boldfast, two, 2, Base(2), opt));
  // wrong length
  CHECK_THROWS_AS(build_schedule(Flavor::boldfast, two, 3, Base(2), opt), precondition_error);
  // not strictly increasing
  opt.exponents = std::vector<std::uint32_t>{3, 3};
  CHECK_THROWS_AS(build_schedule(Flavor::light, two, 1, Base(2), opt), precondition_error);

  ZSequence d2z = ZSequence::uniform(TailRule::constant(4));
  opt.exponents = std::vector<std::uint32_t>{2, 6};  // 6 is not a power of two
  CHECK_THROWS_AS(build_schedule(Flavor::d2bold, d2z, 1, Base(2), opt), precondition_error);
  opt.exponents = std::vector<std::uint32_t>{3, 4};  // k_0 must be 0 or a power of two
  CHECK_THROWS_AS(build_schedule(Flavor::d2bold, d2z, 1, Base(2), opt), precondition_error);
  opt.exponents = std::vector<std::uint32_t>{0, 4, 8};
  CHECK_NOTHROW(build_schedule(Flavor::d2bold, d2z, 2, Base(2), opt));
}

TEST_CASE("position budget") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  // k_3 = 33 tops 2^30 positions
  CHECK_THROWS_AS(build_schedule(Flavor::boldfast, two, 3, Base(2)), resource_error);
  ScheduleOptions roomy;
  roomy.max_positions = std::uint64_t{1} << 34;
  CHECK_NOTHROW(build_schedule(Flavor::boldfast, two, 3, Base(2), roomy));
}

TEST_CASE("block boundaries, bold") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  ScheduleBuild b = build_schedule(Flavor::boldfast, two, 2, Base(2));
  REQUIRE(b.blocks.size() == 2);
  const Block& blk = b.blocks[0];
  CHECK(blk.begin == 2);
  CHECK(blk.end == 32);
  CHECK(blk.b1_end == 16);  // zero tail is the final 1/z = 1/2 of the block end
  CHECK(blk.b2_end == 32);
  CHECK(b.blocks[1].begin == 32);
  CHECK(b.blocks[1].end == std::uint64_t{1} << 14);
}

TEST_CASE("block boundaries, d2") {
  ZSequence z;
  z.even_tail = TailRule::identity();
  z.odd_tail = TailRule::constant(4);
  ScheduleBuild b =
      build_schedule(Flavor::d2bold, z, 3, Base(2), {{}, {}, std::uint64_t{1} << 40});
  REQUIRE(b.blocks.size() == 3);
  auto expect = [&](std::size_t i, std::uint64_t begin, std::uint64_t end, std::uint64_t b1,
                    std::uint64_t b2, std::int64_t ze, std::int64_t zo) {
    CHECK(b.blocks[i].begin == begin);
    CHECK(b.blocks[i].end == end);
    CHECK(b.blocks[i].b1_end == b1);
    CHECK(b.blocks[i].b2_end == b2);
    CHECK(b.blocks[i].ze == ze);
    CHECK(b.blocks[i].zo == zo);
  };
  expect(0, 4, 16, 8, 12, 4, 4);
  expect(1, 16, 256, 176, 192, 16, 4);
  expect(2, 256, 65536, 48128, 49152, 64, 4);
}

TEST_CASE("bold reduction matches the per-position rule") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  ScheduleBuild b = build_schedule(Flavor::boldfast, two, 2, Base(2));
  std::uint64_t n = (std::uint64_t{1} << 14) + 50;  // past the last block
  DigitBuffer x = materialize(stream_random(Base(2), 42), n);
  std::vector<digit_t> f = take(f_bold(two, b, stream_from_buffer(x)), n);

  for (std::uint64_t p = 1; p <= n; ++p) {
    digit_t expected = x.at(p);
    for (const Block& blk : b.blocks)
      if (p >= blk.b1_end && p < blk.end) expected = 0;
    REQUIRE(f[p - 1] == expected);
  }
}

TEST_CASE("d2 reduction copies, zeroes, then replays") {
  ZSequence z;
  z.even_tail = TailRule::identity();
  z.odd_tail = TailRule::constant(4);
  ScheduleBuild b = build_schedule(Flavor::d2bold, z, 2, Base(2));
  std::uint64_t n = 256 + 30;
  DigitBuffer x = materialize(stream_random(Base(2), 7), n);
  std::vector<digit_t> f = take(f_d2(z, b, stream_from_buffer(x)), n);

  for (std::uint64_t p = 1; p <= n; ++p) {
    digit_t expected = x.at(p);
    for (const Block& blk : b.blocks) {
      if (p >= blk.b1_end && p < blk.b2_end) expected = 0;
      if (p >= blk.b2_end && p < blk.end) expected = x.at(blk.begin + (p - blk.b2_end));
    }
    REQUIRE(f[p - 1] == expected);
  }

  // a second pass over a fresh reader reproduces the same digits
  CHECK(take(f_d2(z, b, stream_from_buffer(x)), n) == f);
}

TEST_CASE("reduction flavor must match the schedule") {
  ZSequence two = ZSequence::uniform(TailRule::constant(2));
  ScheduleBuild bold = build_schedule(Flavor::boldfast, two, 1, Base(2));
  ZSequence d2z = ZSequence::uniform(TailRule::constant(4));
  ScheduleBuild d2 = build_schedule(Flavor::d2bold, d2z, 1, Base(2));
  DigitStream x = stream_random(Base(2), 1);
  CHECK_THROWS_AS(f_d2(d2z, bold, x), precondition_error);
  CHECK_THROWS_AS(f_bold(two, d2, x), precondition_error);
  DigitStream x3 = stream_random(Base(3), 1);
  CHECK_THROWS_AS(f_bold(two, bold, x3), precondition_error);
}

TEST_CASE("flavor names round trip") {
  for (Flavor f : {Flavor::boldfast, Flavor::light, Flavor::d2bold, Flavor::d2light})
    CHECK(parse_flavor(flavor_name(f)) == f);
  CHECK_THROWS_AS(parse_flavor("bolt"), precondition_error);
}
