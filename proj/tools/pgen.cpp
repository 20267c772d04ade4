// pgen: digit-stream statistics, reductions, and exact interval-set measures.
//
// Every report embeds a manifest {command, version, params}; `pgen replay`
// re-executes a saved JSON report and reproduces it byte for byte. Exit
// codes: 0 ok, 2 precondition violation, 3 resource cap, 4 I/O failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgen/pgen.hpp"

using nlohmann::json;
using namespace pgen;

namespace {

// ---------------------------------------------------------------------------
// Small parsing and serialization helpers.
// ---------------------------------------------------------------------------

std::string rat_str(const Rational& r) {
  std::string s = boost::multiprecision::numerator(r).str();
  if (boost::multiprecision::denominator(r) != 1)
    s += "/" + boost::multiprecision::denominator(r).str();
  return s;
}

json rat_json(const Rational& r) {
  return json{{"num", boost::multiprecision::numerator(r).str()},
              {"den", boost::multiprecision::denominator(r).str()},
              {"dec", decimal_string(r, 12)}};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw precondition_error("cannot parse " + what + " from '" + s + "'");
  }
}

double parse_numeric(const std::string& s, const std::string& what) {
  try {
    return parse_rational(s).convert_to<double>();
  } catch (const error&) {
    throw precondition_error("cannot parse " + what + " from '" + s + "'");
  }
}

DigitFileFormat parse_digit_format(const std::string& s) {
  if (s == "ascii") return DigitFileFormat::ascii;
  if (s == "packed") return DigitFileFormat::packed;
  throw precondition_error("digit format must be 'ascii' or 'packed'");
}

Convention parse_convention(const std::string& s) {
  if (s == "A") return Convention::A;
  if (s == "B") return Convention::B;
  throw precondition_error("convention must be 'A' or 'B'");
}

CountingOptions counting_opts(const json& p) {
  CountingOptions opts;
  opts.dense_cap = p.at("dense_cap").get<std::uint64_t>();
  opts.threads = p.at("threads").get<unsigned>();
  return opts;
}

EnumerationOptions enumeration_opts(const json& p) {
  EnumerationOptions opts;
  opts.cap = p.at("cap").get<std::uint64_t>();
  opts.threads = p.at("threads").get<unsigned>();
  return opts;
}

// Source grammar: random:SEED | constant:D | champernowne | debruijn:K |
// extdebruijn:K | file:PATH. A bare "random" is resolved to the session seed
// before the manifest is stored, so replays are exact.
DigitStream make_source(const json& p) {
  Base base(p.at("base").get<std::uint32_t>());
  std::string s = p.at("source").get<std::string>();
  auto tail_after = [&](const char* prefix) {
    return s.substr(std::string(prefix).size());
  };
  auto starts = [&](const char* prefix) { return s.rfind(prefix, 0) == 0; };
  if (starts("random:")) return stream_random(base, parse_u64(tail_after("random:"), "seed"));
  if (starts("constant:")) {
    std::uint64_t d = parse_u64(tail_after("constant:"), "digit");
    if (d >= base.value()) throw precondition_error("constant digit out of range for the base");
    return stream_constant(base, static_cast<digit_t>(d));
  }
  if (s == "champernowne") return stream_champernowne(base);
  if (starts("debruijn:"))
    return stream_debruijn(base,
                           static_cast<std::uint32_t>(parse_u64(tail_after("debruijn:"), "order")));
  if (starts("extdebruijn:"))
    return stream_extend_debruijn(
        base, static_cast<std::uint32_t>(parse_u64(tail_after("extdebruijn:"), "order")));
  if (starts("file:"))
    return stream_file(tail_after("file:"),
                       parse_digit_format(p.at("digit_format").get<std::string>()), base);
  throw precondition_error("unknown source '" + s +
                           "' (expected random[:SEED] | constant:D | champernowne | "
                           "debruijn:K | extdebruijn:K | file:PATH)");
}

// z grammar: segments separated by ';'. A segment is 'prefix=3,5,4' (or a
// bare leading '3,5,4'), 'even=RULE', 'odd=RULE', or 'tail=RULE' for both
// parities. RULE is 'const:N' | 'id' | 'affine:A:C'. Empty spec: z == 2.
TailRule parse_tail_rule(const std::string& s) {
  if (s == "id") return TailRule::identity();
  auto parts = split(s, ':');
  if (parts.size() == 2 && parts[0] == "const")
    return TailRule::constant(static_cast<std::int64_t>(parse_u64(parts[1], "rule constant")));
  if (parts.size() == 3 && parts[0] == "affine")
    return TailRule::affine(static_cast<std::int64_t>(parse_u64(parts[1], "rule slope")),
                            static_cast<std::int64_t>(parse_u64(parts[2], "rule offset")));
  throw precondition_error("cannot parse tail rule '" + s +
                           "' (expected const:N | id | affine:A:C)");
}

std::vector<std::int64_t> parse_prefix_values(const std::string& s) {
  std::vector<std::int64_t> vals;
  for (const std::string& part : split(s, ','))
    vals.push_back(static_cast<std::int64_t>(parse_u64(part, "z prefix value")));
  return vals;
}

ZSequence parse_zspec(const std::string& spec) {
  ZSequence z;
  if (spec.empty()) return z;
  bool first = true;
  for (const std::string& seg : split(spec, ';')) {
    if (seg.empty()) continue;
    auto eq = seg.find('=');
    if (eq == std::string::npos) {
      if (!first) throw precondition_error("bare z prefix must be the first segment");
      z.prefix = parse_prefix_values(seg);
    } else {
      std::string key = seg.substr(0, eq), val = seg.substr(eq + 1);
      if (key == "prefix")
        z.prefix = parse_prefix_values(val);
      else if (key == "even")
        z.even_tail = parse_tail_rule(val);
      else if (key == "odd")
        z.odd_tail = parse_tail_rule(val);
      else if (key == "tail")
        z.even_tail = z.odd_tail = parse_tail_rule(val);
      else
        throw precondition_error("unknown z segment '" + key + "'");
    }
    first = false;
  }
  return z;
}

std::vector<digit_t> parse_word(const std::string& s, Base base) {
  if (s.empty()) throw precondition_error("word must be nonempty");
  std::vector<digit_t> w;
  for (char c : s) {
    int v = c >= '0' && c <= '9'   ? c - '0'
            : c >= 'a' && c <= 'z' ? c - 'a' + 10
            : c >= 'A' && c <= 'Z' ? c - 'A' + 10
                                   : -1;
    if (v < 0 || static_cast<std::uint32_t>(v) >= base.value())
      throw precondition_error(std::string("word symbol '") + c + "' out of range for base " +
                               std::to_string(base.value()));
    w.push_back(static_cast<digit_t>(v));
  }
  return w;
}

json interval_list_json(const IntervalSet& set, std::uint64_t max_list) {
  json items = json::array();
  std::uint64_t shown = 0;
  for (const BadicInterval& iv : set.intervals()) {
    if (shown == max_list) break;
    items.push_back(json{{"level", iv.level}, {"index", iv.index}});
    ++shown;
  }
  return items;
}

json set_summary_json(const IntervalSet& set, std::uint64_t max_list) {
  return json{{"measure", rat_json(set.measure())},
              {"interval_count", set.intervals().size()},
              {"intervals", interval_list_json(set, max_list)},
              {"truncated", set.intervals().size() > max_list}};
}

// ---------------------------------------------------------------------------
// Command runners. Each consumes the manifest params only, so a replayed
// manifest goes through the identical code path.
// ---------------------------------------------------------------------------

json run_gen(const json& p) {
  DigitStream src = make_source(p);
  std::uint64_t length = p.at("length").get<std::uint64_t>();
  if (length < 1) throw precondition_error("length must be positive");
  DigitBuffer buf = materialize(src, length);
  std::string out = p.at("out").get<std::string>();
  write_digit_file(out, buf, parse_digit_format(p.at("digit_format").get<std::string>()));
  return json{{"path", out},
              {"base", buf.base().value()},
              {"length", buf.size()},
              {"source", src.describe()}};
}

json run_zstats(const json& p) {
  DigitStream src = make_source(p);
  std::uint32_t k = p.at("k").get<std::uint32_t>();
  Rational lambda = parse_rational(p.at("lambda").get<std::string>());
  std::uint32_t j_max = p.at("jmax").get<std::uint32_t>();
  Convention conv = parse_convention(p.at("convention").get<std::string>());
  CountingOptions opts = counting_opts(p);
  std::uint64_t windows = window_count_for(lambda, src.base().value(), k, conv);
  if (windows == 0) throw precondition_error("the window range is empty at this lambda and k");
  DigitBuffer buf = materialize(src, windows + k - 1);
  ZProfile prof = z_profile(buf, k, lambda, j_max, conv, opts);
  PoissonRef ref = poisson_ref(lambda.convert_to<double>(), j_max);
  Deviation dev = z_deviation(prof, ref);
  OccurrenceTable table = count_words(buf, WindowSpec{k, 1, windows}, opts);
  json rows = json::array();
  for (std::uint32_t j = 0; j <= j_max; ++j) {
    double zd = prof.z[j].convert_to<double>();
    rows.push_back(json{{"j", j},
                        {"z", rat_json(prof.z[j])},
                        {"poisson", ref.pmf[j]},
                        {"deviation", std::fabs(zd - ref.pmf[j])}});
  }
  return json{{"k", k},
              {"lambda", rat_str(lambda)},
              {"convention", convention_name(conv)},
              {"window_count", windows},
              {"digits_used", windows + k - 1},
              {"rows", rows},
              {"z_overflow", rat_json(prof.z_overflow)},
              {"sup_deviation", dev.sup},
              {"l1_deviation", dev.l1},
              {"distinct_words", table.distinct()},
              {"distinct_fraction",
               rat_json(Rational(BigInt(table.distinct()), big_pow(src.base().value(), k)))},
              {"source", src.describe()}};
}

json run_scan(const json& p) {
  DigitStream src = make_source(p);
  std::uint32_t k_lo = p.at("k_lo").get<std::uint32_t>();
  std::uint32_t k_hi = p.at("k_hi").get<std::uint32_t>();
  Convention conv = parse_convention(p.at("convention").get<std::string>());
  CountingOptions opts = counting_opts(p);
  std::vector<Rational> lambdas;
  for (const auto& item : p.at("lambdas")) lambdas.push_back(parse_rational(item.get<std::string>()));
  std::vector<std::uint32_t> js = p.at("js").get<std::vector<std::uint32_t>>();
  if (lambdas.empty() || js.empty()) throw precondition_error("need at least one lambda and one j");
  json rows = json::array();
  if (k_lo >= 1 && k_lo <= k_hi) {
    std::uint64_t need = 0;
    for (const Rational& lam : lambdas)
      need = std::max(need, window_count_for(lam, src.base().value(), k_hi, conv) + k_hi - 1);
    DigitBuffer buf = materialize(src, need);
    std::uint32_t j_top = *std::max_element(js.begin(), js.end());
    for (std::uint32_t k = k_lo; k <= k_hi; ++k) {
      for (const Rational& lam : lambdas) {
        ZProfile prof = z_profile(buf, k, lam, j_top, conv, opts);
        for (std::uint32_t j : js) {
          double pmf = poisson_pmf(lam.convert_to<double>(), j);
          double zd = prof.z[j].convert_to<double>();
          rows.push_back(json{{"k", k},
                              {"lambda", rat_str(lam)},
                              {"j", j},
                              {"z_dec", decimal_string(prof.z[j], 12)},
                              {"poisson", pmf},
                              {"deviation", std::fabs(zd - pmf)}});
        }
      }
    }
  }
  return json{{"k_lo", k_lo},
              {"k_hi", k_hi},
              {"convention", convention_name(conv)},
              {"rows", rows},
              {"source", src.describe()}};
}

json block_json(const Block& blk) {
  return json{{"step", blk.step},     {"k_prev", blk.k_prev}, {"k", blk.k},
              {"begin", blk.begin},   {"end", blk.end},       {"copy_end", blk.b1_end},
              {"zero_end", blk.b2_end}, {"z_even", blk.ze},   {"z_odd", blk.zo}};
}

json run_construct(const json& p) {
  Base base(p.at("base").get<std::uint32_t>());
  Flavor flavor = parse_flavor(p.at("flavor").get<std::string>());
  ZSequence z = parse_zspec(p.at("z").get<std::string>());
  std::uint32_t steps = p.at("steps").get<std::uint32_t>();
  ScheduleOptions sched;
  if (p.at("k0").get<std::int64_t>() >= 0)
    sched.k0 = static_cast<std::uint32_t>(p.at("k0").get<std::int64_t>());
  if (!p.at("exponents").empty())
    sched.exponents = p.at("exponents").get<std::vector<std::uint32_t>>();
  ScheduleBuild build = build_schedule(flavor, z, steps, base, sched);
  DigitStream x = make_source(p);
  DigitStream f = is_d2(flavor) ? f_d2(z, build, x) : f_bold(z, build, x);
  ClassifyResult cls = classify_z(z);

  std::uint64_t length = p.at("length").get<std::uint64_t>();
  if (length == 0) length = build.blocks.back().end - 1;  // through the last block
  std::string out = p.at("out").get<std::string>();
  std::uint64_t written = 0;
  if (!out.empty()) {
    DigitBuffer buf = materialize(f, length);
    write_digit_file(out, buf, parse_digit_format(p.at("digit_format").get<std::string>()));
    written = buf.size();
  }
  json blocks = json::array();
  for (const Block& blk : build.blocks) blocks.push_back(block_json(blk));
  return json{{"flavor", flavor_name(flavor)},
              {"rule", build.schedule.rule},
              {"rule_generated", build.schedule.rule_generated},
              {"exponents", build.schedule.exponents},
              {"blocks", blocks},
              {"classification", json{{"in_C", cls.in_C}, {"in_D", cls.in_D}}},
              {"descriptor", f.describe()},
              {"path", out},
              {"digits_written", written}};
}

json run_measure_bad(const json& p) {
  Base base(p.at("base").get<std::uint32_t>());
  BadSpec spec;
  spec.lambda = parse_rational(p.at("lambda").get<std::string>());
  spec.k = p.at("k").get<std::uint32_t>();
  spec.j = p.at("j").get<std::uint64_t>();
  spec.epsilon = parse_numeric(p.at("epsilon").get<std::string>(), "epsilon");
  EnumerationOptions opts = enumeration_opts(p);
  IntervalSet set = bad_set(base, spec, opts);
  json rep = set_summary_json(set, p.at("max_list").get<std::uint64_t>());
  rep["level"] = bad_enumeration_level(base, spec.lambda, spec.k, opts.cap);
  rep["lambda"] = rat_str(spec.lambda);
  rep["k"] = spec.k;
  rep["j"] = spec.j;
  rep["epsilon"] = spec.epsilon;
  return rep;
}

json run_measure_badk(const json& p) {
  Base base(p.at("base").get<std::uint32_t>());
  std::uint32_t k = p.at("k").get<std::uint32_t>();
  std::optional<double> eps;
  if (!p.at("epsilon").get<std::string>().empty())
    eps = parse_numeric(p.at("epsilon").get<std::string>(), "epsilon");
  EnumerationOptions opts = enumeration_opts(p);
  IntervalSet set = bad_k_set(base, k, eps, opts);
  json grid = json::array();
  for (const Rational& lam : lambda_grid(k)) grid.push_back(rat_str(lam));
  json rep = set_summary_json(set, p.at("max_list").get<std::uint64_t>());
  rep["k"] = k;
  rep["epsilon"] = eps ? *eps : 1.0 / static_cast<double>(k);
  rep["lambda_grid"] = grid;
  return rep;
}

json run_measure_eset(const json& p) {
  Base base(p.at("base").get<std::uint32_t>());
  std::uint32_t k_lo = p.at("k_lo").get<std::uint32_t>();
  std::uint32_t k_hi = p.at("k_hi").get<std::uint32_t>();
  EnumerationOptions opts = enumeration_opts(p);
  IntervalSet set = e_set(base, k_lo, k_hi, opts);
  json rep = set_summary_json(set, p.at("max_list").get<std::uint64_t>());
  rep["k_lo"] = k_lo;
  rep["k_hi"] = k_hi;
  return rep;
}

json run_measure_fact1(const json& p) {
  Base base(p.at("base").get<std::uint32_t>());
  std::uint32_t k_lo = p.at("k_lo").get<std::uint32_t>();
  std::uint32_t k_hi = p.at("k_hi").get<std::uint32_t>();
  if (k_lo < 1 || k_lo > k_hi) throw precondition_error("bad k range");
  EnumerationOptions opts = enumeration_opts(p);
  json rows = json::array();
  for (std::uint32_t k = k_lo; k <= k_hi; ++k) {
    Fact1Row row = check_fact1_bound(base, k, opts);
    rows.push_back(json{{"k", row.k},
                        {"mu", rat_json(row.mu)},
                        {"bound", row.bound},
                        {"vacuous", row.vacuous},
                        {"holds", row.holds}});
  }
  return json{{"k_lo", k_lo}, {"k_hi", k_hi}, {"rows", rows}};
}

json trace_step_json(const AlgorithmStep& st) {
  return json{{"n", st.n},
              {"chosen_digit", st.chosen},
              {"interval", json{{"level", st.interval.level}, {"index", st.interval.index}}},
              {"measure_num", boost::multiprecision::numerator(st.measure).str()},
              {"measure_den", boost::multiprecision::denominator(st.measure).str()},
              {"threshold_num", boost::multiprecision::numerator(st.threshold).str()},
              {"threshold_den", boost::multiprecision::denominator(st.threshold).str()}};
}

json run_measure_algorithm(const json& p) {
  AlgorithmConfig cfg;
  cfg.base = p.at("base").get<std::uint32_t>();
  cfg.steps = p.at("steps").get<std::uint32_t>();
  cfg.enumeration = enumeration_opts(p);
  if (p.at("reference").get<bool>()) {
    cfg = reference_config(cfg.base, cfg.steps);
    cfg.enumeration = enumeration_opts(p);
  } else {
    for (const auto& item : p.at("ranges")) {
      if (item.is_null()) {
        cfg.step_ranges.push_back(std::nullopt);
      } else {
        auto pair = item.get<std::vector<std::uint32_t>>();
        if (pair.size() != 2) throw precondition_error("a k range needs two endpoints");
        cfg.step_ranges.push_back(std::make_pair(pair[0], pair[1]));
      }
    }
  }
  std::string thr = p.at("threshold").get<std::string>();
  if (thr != "grid") {
    cfg.threshold.kind = ThresholdRule::Kind::fixed;
    cfg.threshold.fixed = parse_rational(thr);
  }
  AlgorithmResult res = run_algorithm(cfg);
  json trace = json::array();
  for (const AlgorithmStep& st : res.trace) trace.push_back(trace_step_json(st));
  std::string trace_out = p.at("trace_out").get<std::string>();
  if (!trace_out.empty()) {
    std::ofstream out(trace_out);
    if (!out) throw io_error("cannot open '" + trace_out + "' for writing");
    for (const json& line : trace) out << line.dump() << "\n";
    if (!out) throw io_error("write to '" + trace_out + "' failed");
  }
  std::string digits;
  for (digit_t d : res.digits) digits.push_back(detail::ascii_symbol(d));
  return json{{"steps", cfg.steps},
              {"digits", digits},
              {"trace", trace},
              {"trace_path", trace_out}};
}

json run_tv(const json& p) {
  DigitStream src = make_source(p);
  std::uint32_t k = p.at("k").get<std::uint32_t>();
  Rational a = parse_rational(p.at("lambda").get<std::string>());
  Rational b = parse_rational(p.at("lambda2").get<std::string>());
  CountingOptions opts = counting_opts(p);
  if (!(0 < a && a < b)) throw precondition_error("need 0 < lambda < lambda2");
  std::uint64_t need = window_count_for(b, src.base().value(), k, Convention::B) + k - 1;
  DigitBuffer buf = materialize(src, need);
  CountDistribution da = count_distribution(buf, k, Rational(0), a, opts);
  CountDistribution db = count_distribution(buf, k, Rational(0), b, opts);
  Rational tv = tv_distance(da, db);
  double tvp = tv_poisson(a.convert_to<double>(), b.convert_to<double>());
  return json{{"k", k},
              {"lambda", rat_str(a)},
              {"lambda2", rat_str(b)},
              {"tv_empirical", rat_json(tv)},
              {"tv_poisson", tvp},
              {"source", src.describe()}};
}

json run_normality(const json& p) {
  DigitStream src = make_source(p);
  std::uint64_t n = p.at("n").get<std::uint64_t>();
  std::uint32_t max_len = p.at("max_len").get<std::uint32_t>();
  CountingOptions opts = counting_opts(p);
  DigitBuffer buf = materialize(src, n);
  NormalityReport rep = normality_deviation(buf, n, max_len, opts);
  json rows = json::array();
  for (std::uint32_t len = 1; len <= max_len; ++len)
    rows.push_back(json{{"length", len}, {"worst_deviation", rat_json(rep.per_length[len - 1])}});
  return json{{"n", n},
              {"max_len", max_len},
              {"rows", rows},
              {"sup_deviation", rat_json(rep.sup)},
              {"source", src.describe()}};
}

json run_discrepancy(const json& p) {
  DigitStream src = make_source(p);
  std::vector<digit_t> word = parse_word(p.at("word").get<std::string>(), src.base());
  std::uint64_t n = p.at("n").get<std::uint64_t>();
  DigitBuffer buf = materialize(src, n);
  std::uint64_t hits = count_occurrences(buf, word, n);
  Rational disc = discrepancy(buf, word, n);
  return json{{"word", p.at("word").get<std::string>()},
              {"n", n},
              {"occurrences", hits},
              {"expected", rat_json(Rational(BigInt(n), big_pow(src.base().value(), word.size())))},
              {"discrepancy", rat_json(disc)},
              {"source", src.describe()}};
}

json run_weakly(const json& p) {
  DigitStream src = make_source(p);
  Rational lambda = parse_rational(p.at("lambda").get<std::string>());
  std::uint64_t j = p.at("j").get<std::uint64_t>();
  double epsilon = parse_numeric(p.at("epsilon").get<std::string>(), "epsilon");
  std::uint32_t k_lo = p.at("k_lo").get<std::uint32_t>();
  std::uint32_t k_hi = p.at("k_hi").get<std::uint32_t>();
  Convention conv = parse_convention(p.at("convention").get<std::string>());
  CountingOptions opts = counting_opts(p);
  std::uint64_t need = window_count_for(lambda, src.base().value(), k_hi, conv) + k_hi - 1;
  DigitBuffer buf = materialize(src, need);
  std::vector<std::uint32_t> witnesses =
      weakly_poisson_scan(buf, lambda, j, epsilon, k_lo, k_hi, conv, opts);
  double pmf = poisson_pmf(lambda.convert_to<double>(), j);
  json rows = json::array();
  for (std::uint32_t k = k_lo; k <= k_hi; ++k) {
    ZProfile prof = z_profile(buf, k, lambda, static_cast<std::uint32_t>(j), conv, opts);
    double zd = prof.z[j].convert_to<double>();
    bool within = std::fabs(zd - pmf) < epsilon;
    rows.push_back(json{{"k", k},
                        {"z_dec", decimal_string(prof.z[j], 12)},
                        {"poisson", pmf},
                        {"deviation", std::fabs(zd - pmf)},
                        {"within", within}});
  }
  return json{{"lambda", rat_str(lambda)},
              {"j", j},
              {"epsilon", epsilon},
              {"k_lo", k_lo},
              {"k_hi", k_hi},
              {"rows", rows},
              {"witnesses", witnesses},
              {"all_within", witnesses.size() == (k_hi >= k_lo ? k_hi - k_lo + 1 : 0)},
              {"source", src.describe()}};
}

json run_command(const std::string& cmd, const json& p) {
  if (cmd == "gen") return run_gen(p);
  if (cmd == "zstats") return run_zstats(p);
  if (cmd == "scan") return run_scan(p);
  if (cmd == "construct") return run_construct(p);
  if (cmd == "measure.bad") return run_measure_bad(p);
  if (cmd == "measure.badk") return run_measure_badk(p);
  if (cmd == "measure.eset") return run_measure_eset(p);
  if (cmd == "measure.fact1") return run_measure_fact1(p);
  if (cmd == "measure.algorithm") return run_measure_algorithm(p);
  if (cmd == "tv") return run_tv(p);
  if (cmd == "normality") return run_normality(p);
  if (cmd == "discrepancy") return run_discrepancy(p);
  if (cmd == "weakly") return run_weakly(p);
  throw precondition_error("unknown command '" + cmd + "'");
}

// ---------------------------------------------------------------------------
// Report emission. JSON is canonical (sorted keys, stable formatting); CSV is
// a lossy table for spreadsheets.
// ---------------------------------------------------------------------------

std::string csv_field(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string csv_table(const std::vector<std::string>& header, const json& rows,
                      const std::vector<std::string>& keys) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const json& row : rows) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const json* v = &row;
      for (const std::string& part : split(keys[i], '.')) v = &v->at(part);
      out << (i ? "," : "") << csv_field(*v);
    }
    out << "\n";
  }
  return out.str();
}

std::string to_csv(const std::string& cmd, const json& rep) {
  if (cmd == "gen")
    return csv_table({"path", "base", "length", "source"}, json::array({rep}),
                     {"path", "base", "length", "source"});
  if (cmd == "zstats")
    return csv_table({"j", "z_num", "z_den", "z_dec", "poisson", "deviation"}, rep.at("rows"),
                     {"j", "z.num", "z.den", "z.dec", "poisson", "deviation"});
  if (cmd == "scan")
    return csv_table({"k", "lambda", "j", "z_dec", "poisson", "deviation"}, rep.at("rows"),
                     {"k", "lambda", "j", "z_dec", "poisson", "deviation"});
  if (cmd == "construct")
    return csv_table({"step", "k_prev", "k", "begin", "end", "copy_end", "zero_end", "z_even",
                      "z_odd"},
                     rep.at("blocks"),
                     {"step", "k_prev", "k", "begin", "end", "copy_end", "zero_end", "z_even",
                      "z_odd"});
  if (cmd == "measure.bad" || cmd == "measure.badk" || cmd == "measure.eset")
    return csv_table({"measure_num", "measure_den", "measure_dec", "interval_count"},
                     json::array({rep}),
                     {"measure.num", "measure.den", "measure.dec", "interval_count"});
  if (cmd == "measure.fact1")
    return csv_table({"k", "mu_dec", "bound", "vacuous", "holds"}, rep.at("rows"),
                     {"k", "mu.dec", "bound", "vacuous", "holds"});
  if (cmd == "measure.algorithm")
    return csv_table({"n", "chosen_digit", "level", "index", "measure_num", "measure_den",
                      "threshold_num", "threshold_den"},
                     rep.at("trace"),
                     {"n", "chosen_digit", "interval.level", "interval.index", "measure_num",
                      "measure_den", "threshold_num", "threshold_den"});
  if (cmd == "tv")
    return csv_table({"k", "lambda", "lambda2", "tv_num", "tv_den", "tv_dec", "tv_poisson"},
                     json::array({rep}),
                     {"k", "lambda", "lambda2", "tv_empirical.num", "tv_empirical.den",
                      "tv_empirical.dec", "tv_poisson"});
  if (cmd == "normality")
    return csv_table({"length", "worst_num", "worst_den", "worst_dec"}, rep.at("rows"),
                     {"length", "worst_deviation.num", "worst_deviation.den",
                      "worst_deviation.dec"});
  if (cmd == "discrepancy")
    return csv_table({"word", "n", "occurrences", "discrepancy_dec"}, json::array({rep}),
                     {"word", "n", "occurrences", "discrepancy.dec"});
  if (cmd == "weakly")
    return csv_table({"k", "z_dec", "poisson", "deviation", "within"}, rep.at("rows"),
                     {"k", "z_dec", "poisson", "deviation", "within"});
  throw internal_error("no CSV mirror for '" + cmd + "'");
}

void emit(const std::string& cmd, const json& params, const json& rep) {
  if (params.at("format").get<std::string>() == "csv") {
    std::fputs(to_csv(cmd, rep).c_str(), stdout);
    return;
  }
  json out;
  out["manifest"] = json{{"command", cmd}, {"version", version_string}, {"params", params}};
  out["report"] = rep;
  std::fputs(out.dump(2).c_str(), stdout);
  std::fputc('\n', stdout);
}

void run_and_emit(const std::string& cmd, const json& params) {
  emit(cmd, params, run_command(cmd, params));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"digit-stream statistics, block reductions, and exact interval measures"};
  app.require_subcommand(1);

  std::uint32_t base = 2;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  std::string format = "json";
  std::string convention = "A";
  std::string digit_format = "ascii";
  std::uint64_t dense_cap = CountingOptions{}.dense_cap;

  app.add_option("--base", base, "digit base (>= 2)")->check(CLI::Range(2u, 1000000u));
  app.add_option("--seed", seed, "seed for random sources");
  app.add_option("--threads", threads, "worker thread cap")->check(CLI::Range(1u, 256u));
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--convention", convention, "window-count convention")
      ->check(CLI::IsMember({"A", "B"}));
  app.add_option("--digit-format", digit_format, "digit file format")
      ->check(CLI::IsMember({"ascii", "packed"}));

  auto resolve_source = [&](std::string s) {
    if (s == "random") return "random:" + std::to_string(seed);
    return s;
  };
  auto base_params = [&]() {
    return json{{"base", base},          {"convention", convention}, {"dense_cap", dense_cap},
                {"digit_format", digit_format}, {"format", format},  {"threads", threads}};
  };

  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& desc) {
    CLI::App* s = parent->add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };

  // gen ----------------------------------------------------------------
  std::string g_source, g_out;
  std::uint64_t g_length = 0;
  CLI::App* gen = sub(&app, "gen", "generate a digit file from a source");
  gen->add_option("--source", g_source, "source spec")->required();
  gen->add_option("--length", g_length, "digits to write")->required();
  gen->add_option("--out", g_out, "output path")->required();
  gen->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(g_source);
    p["length"] = g_length;
    p["out"] = g_out;
    run_and_emit("gen", p);
  });

  // zstats -------------------------------------------------------------
  std::string z_source, z_lambda = "1";
  std::uint32_t z_k = 0, z_jmax = 8;
  CLI::App* zstats = sub(&app, "zstats", "occupancy statistics against the Poisson law");
  zstats->add_option("--source", z_source, "source spec")->required();
  zstats->add_option("--k", z_k, "word length")->required()->check(CLI::Range(1u, 62u));
  zstats->add_option("--lambda", z_lambda, "rate (rational)");
  zstats->add_option("--jmax", z_jmax, "largest occupancy index reported");
  zstats->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(z_source);
    p["k"] = z_k;
    p["lambda"] = rat_str(parse_rational(z_lambda));
    p["jmax"] = z_jmax;
    run_and_emit("zstats", p);
  });

  // scan ---------------------------------------------------------------
  std::string s_source, s_lambdas = "1", s_js = "0,1,2";
  std::uint32_t s_klo = 0, s_khi = 0;
  CLI::App* scan = sub(&app, "scan", "per-k deviation table over a range of word lengths");
  scan->add_option("--source", s_source, "source spec")->required();
  scan->add_option("--k-lo", s_klo, "first word length")->required();
  scan->add_option("--k-hi", s_khi, "last word length")->required();
  scan->add_option("--lambda", s_lambdas, "comma-separated rates");
  scan->add_option("--j", s_js, "comma-separated occupancy indices");
  scan->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(s_source);
    p["k_lo"] = s_klo;
    p["k_hi"] = s_khi;
    json lams = json::array();
    for (const std::string& part : split(s_lambdas, ','))
      lams.push_back(rat_str(parse_rational(part)));
    p["lambdas"] = lams;
    std::vector<std::uint32_t> js;
    for (const std::string& part : split(s_js, ','))
      js.push_back(static_cast<std::uint32_t>(parse_u64(part, "j")));
    p["js"] = js;
    run_and_emit("scan", p);
  });

  // construct ------------------------------------------------------------
  std::string c_source, c_flavor, c_z, c_out, c_exponents;
  std::uint32_t c_steps = 0;
  std::int64_t c_k0 = -1;
  std::uint64_t c_length = 0;
  CLI::App* construct = sub(&app, "construct", "block reduction of a source stream");
  construct->add_option("--source", c_source, "source spec for x")->required();
  construct->add_option("--flavor", c_flavor, "boldfast | light | d2bold | d2light")->required();
  construct->add_option("--z", c_z, "z spec (e.g. 'even=const:4,odd=id' or '3,5,4;tail=const:2')");
  construct->add_option("--steps", c_steps, "construction steps")->required();
  construct->add_option("--k0", c_k0, "base exponent override (-1: flavor default)");
  construct->add_option("--exponents", c_exponents, "explicit exponent list k_0..k_steps");
  construct->add_option("--length", c_length, "digits to write (0: through the last block)");
  construct->add_option("--out", c_out, "output digit file (omit for layout report only)");
  construct->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(c_source);
    p["flavor"] = c_flavor;
    // normalize ',' between key=value segments to ';' so both spellings work
    std::string zs = c_z;
    for (std::size_t i = 0; i + 1 < zs.size(); ++i)
      if (zs[i] == ',' && !(zs[i + 1] >= '0' && zs[i + 1] <= '9')) zs[i] = ';';
    p["z"] = zs;
    p["steps"] = c_steps;
    p["k0"] = c_k0;
    std::vector<std::uint32_t> exps;
    if (!c_exponents.empty())
      for (const std::string& part : split(c_exponents, ','))
        exps.push_back(static_cast<std::uint32_t>(parse_u64(part, "exponent")));
    p["exponents"] = exps;
    p["length"] = c_length;
    p["out"] = c_out;
    run_and_emit("construct", p);
  });

  // measure --------------------------------------------------------------
  CLI::App* measure = sub(&app, "measure", "exact interval-set computations");
  measure->require_subcommand(1);
  std::uint64_t m_cap = EnumerationOptions{}.cap;
  std::uint64_t m_max_list = 64;
  measure->add_option("--cap", m_cap, "prefix enumeration cap");
  measure->add_option("--max-list", m_max_list, "intervals listed in the report");

  std::string mb_lambda = "1", mb_eps;
  std::uint32_t mb_k = 0;
  std::uint64_t mb_j = 0;
  CLI::App* mbad = sub(measure, "bad", "one deviation set");
  mbad->add_option("--lambda", mb_lambda, "rate (rational)");
  mbad->add_option("--k", mb_k, "word length")->required();
  mbad->add_option("--j", mb_j, "occupancy index")->required();
  mbad->add_option("--epsilon", mb_eps, "deviation threshold (rational)")->required();
  mbad->callback([&] {
    json p = base_params();
    p["cap"] = m_cap;
    p["max_list"] = m_max_list;
    p["lambda"] = rat_str(parse_rational(mb_lambda));
    p["k"] = mb_k;
    p["j"] = mb_j;
    p["epsilon"] = mb_eps;
    run_and_emit("measure.bad", p);
  });

  std::uint32_t mk_k = 0;
  std::string mk_eps;
  CLI::App* mbadk = sub(measure, "badk", "union of deviation sets over the rate grid");
  mbadk->add_option("--k", mk_k, "word length")->required();
  mbadk->add_option("--epsilon", mk_eps, "threshold override (default 1/k)");
  mbadk->callback([&] {
    json p = base_params();
    p["cap"] = m_cap;
    p["max_list"] = m_max_list;
    p["k"] = mk_k;
    p["epsilon"] = mk_eps;
    run_and_emit("measure.badk", p);
  });

  std::uint32_t me_klo = 0, me_khi = 0;
  CLI::App* meset = sub(measure, "eset", "complement of the bad union over a k range");
  meset->add_option("--k-lo", me_klo, "first word length")->required();
  meset->add_option("--k-hi", me_khi, "last word length")->required();
  meset->callback([&] {
    json p = base_params();
    p["cap"] = m_cap;
    p["max_list"] = m_max_list;
    p["k_lo"] = me_klo;
    p["k_hi"] = me_khi;
    run_and_emit("measure.eset", p);
  });

  std::uint32_t mf_klo = 1, mf_khi = 1;
  CLI::App* mfact = sub(measure, "fact1", "exact bad-union measure vs the closed-form bound");
  mfact->add_option("--k-lo", mf_klo, "first word length")->required();
  mfact->add_option("--k-hi", mf_khi, "last word length")->required();
  mfact->callback([&] {
    json p = base_params();
    p["cap"] = m_cap;
    p["k_lo"] = mf_klo;
    p["k_hi"] = mf_khi;
    run_and_emit("measure.fact1", p);
  });

  std::uint32_t ma_steps = 8;
  std::string ma_ranges, ma_threshold = "grid", ma_trace;
  bool ma_reference = false;
  CLI::App* malg = sub(measure, "algorithm", "digit selection through the constraint sets");
  malg->add_option("--steps", ma_steps, "steps to run");
  malg->add_option("--ranges", ma_ranges,
                   "per-step k ranges, ';'-separated 'LO-HI' (empty entry: unconstrained; "
                   "one entry: applied to all steps)");
  malg->add_option("--threshold", ma_threshold, "'grid' for 1/b^(2n), or a fixed rational");
  malg->add_flag("--reference", ma_reference,
                 "use the reference k schedule (rejected beyond desk scale)");
  malg->add_option("--trace-out", ma_trace, "write the step trace as JSON lines");
  malg->callback([&] {
    json p = base_params();
    p["cap"] = m_cap;
    p["steps"] = ma_steps;
    p["reference"] = ma_reference;
    json ranges = json::array();
    if (!ma_ranges.empty()) {
      for (const std::string& part : split(ma_ranges, ';')) {
        if (part.empty()) {
          ranges.push_back(nullptr);
        } else {
          auto ends = split(part, '-');
          if (ends.size() == 1) ends.push_back(ends[0]);
          if (ends.size() != 2) throw precondition_error("bad k range '" + part + "'");
          ranges.push_back(std::vector<std::uint32_t>{
              static_cast<std::uint32_t>(parse_u64(ends[0], "k range")),
              static_cast<std::uint32_t>(parse_u64(ends[1], "k range"))});
        }
      }
    }
    p["ranges"] = ranges;
    p["threshold"] = ma_threshold;
    p["trace_out"] = ma_trace;
    run_and_emit("measure.algorithm", p);
  });

  // tv ---------------------------------------------------------------------
  std::string t_source, t_lambda = "1/2", t_lambda2 = "3/4";
  std::uint32_t t_k = 0;
  CLI::App* tv = sub(&app, "tv", "total variation between two window-range count laws");
  tv->add_option("--source", t_source, "source spec")->required();
  tv->add_option("--k", t_k, "word length")->required();
  tv->add_option("--lambda", t_lambda, "first rate (rational)");
  tv->add_option("--lambda2", t_lambda2, "second rate (rational)");
  tv->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(t_source);
    p["k"] = t_k;
    p["lambda"] = rat_str(parse_rational(t_lambda));
    p["lambda2"] = rat_str(parse_rational(t_lambda2));
    run_and_emit("tv", p);
  });

  // normality ----------------------------------------------------------------
  std::string n_source;
  std::uint64_t n_n = 0;
  std::uint32_t n_maxlen = 4;
  CLI::App* normality = sub(&app, "normality", "worst word-frequency deviation per length");
  normality->add_option("--source", n_source, "source spec")->required();
  normality->add_option("--n", n_n, "prefix length")->required();
  normality->add_option("--max-len", n_maxlen, "longest word length");
  normality->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(n_source);
    p["n"] = n_n;
    p["max_len"] = n_maxlen;
    run_and_emit("normality", p);
  });

  // discrepancy ----------------------------------------------------------------
  std::string d_source, d_word;
  std::uint64_t d_n = 0;
  CLI::App* disc = sub(&app, "discrepancy", "occurrence-count discrepancy of one word");
  disc->add_option("--source", d_source, "source spec")->required();
  disc->add_option("--word", d_word, "word as digit symbols")->required();
  disc->add_option("--n", d_n, "prefix length")->required();
  disc->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(d_source);
    p["word"] = d_word;
    p["n"] = d_n;
    run_and_emit("discrepancy", p);
  });

  // weakly ----------------------------------------------------------------
  std::string w_source, w_lambda = "1", w_eps = "0.01";
  std::uint64_t w_j = 1;
  std::uint32_t w_klo = 0, w_khi = 0;
  CLI::App* weakly = sub(&app, "weakly", "which word lengths look Poisson at one (lambda, j)");
  weakly->add_option("--source", w_source, "source spec")->required();
  weakly->add_option("--lambda", w_lambda, "rate (rational)");
  weakly->add_option("--j", w_j, "occupancy index");
  weakly->add_option("--epsilon", w_eps, "tolerance");
  weakly->add_option("--k-lo", w_klo, "first word length")->required();
  weakly->add_option("--k-hi", w_khi, "last word length")->required();
  weakly->callback([&] {
    json p = base_params();
    p["source"] = resolve_source(w_source);
    p["lambda"] = rat_str(parse_rational(w_lambda));
    p["j"] = w_j;
    p["epsilon"] = w_eps;
    p["k_lo"] = w_klo;
    p["k_hi"] = w_khi;
    run_and_emit("weakly", p);
  });

  // replay ----------------------------------------------------------------
  std::string r_path;
  CLI::App* replay = sub(&app, "replay", "re-run a saved JSON report from its manifest");
  replay->add_option("report", r_path, "path to a JSON report")->required();
  replay->callback([&] {
    std::ifstream in(r_path);
    if (!in) throw io_error("cannot open '" + r_path + "' for reading");
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw precondition_error("'" + r_path + "' is not a JSON report: " + e.what());
    }
    if (!doc.contains("manifest"))
      throw precondition_error("'" + r_path + "' has no manifest");
    const json& manifest = doc.at("manifest");
    run_and_emit(manifest.at("command").get<std::string>(), manifest.at("params"));
  });

  if (const char* env = std::getenv("PG_DENSE_CAP")) {
    dense_cap = parse_u64(env, "PG_DENSE_CAP");
    if (dense_cap < 2) {
      std::fprintf(stderr, "error: PG_DENSE_CAP must be at least 2\n");
      return 2;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const precondition_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const resource_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: malformed manifest: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
