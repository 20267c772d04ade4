#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env + " " + std::string(PGEN_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char chunk[4096];
  std::size_t got;
  while ((got = fread(chunk, 1, sizeof chunk, pipe)) > 0) res.out.append(chunk, got);
  int raw = pclose(pipe);
  res.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return res;
}

std::string tmp_path(const std::string& name) {
  return std::string(::getenv("TMPDIR") ? ::getenv("TMPDIR") : "/tmp") + "/pgen_cli_" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen and zstats round trip through a digit file") {
  std::string path = tmp_path("db.txt");
  CliResult gen = run_cli("gen --source debruijn:8 --length 263 --out " + path);
  REQUIRE(gen.status == 0);
  json grep = json::parse(gen.out);
  CHECK(grep.at("manifest").at("command") == "gen");
  CHECK(grep.at("report").at("path") == path);
  CHECK(grep.at("report").at("length") == 263);

  CliResult z = run_cli("--convention B zstats --source file:" + path + " --k 8 --lambda 1 --jmax 3");
  REQUIRE(z.status == 0);
  json zrep = json::parse(z.out);
  const json& rows = zrep.at("report").at("rows");
  // a full-period word survey: every word occurs exactly once
  CHECK(rows.at(1).at("z").at("num") == "1");
  CHECK(rows.at(1).at("z").at("den") == "1");
  CHECK(rows.at(0).at("z").at("num") == "0");
  CHECK(zrep.at("report").at("window_count") == 256);
}

TEST_CASE("replay reproduces a report byte for byte") {
  CliResult first = run_cli("zstats --source random:7 --k 6 --lambda 3/2 --jmax 4");
  REQUIRE(first.status == 0);
  std::string path = tmp_path("replay.json");
  {
    std::ofstream out(path, std::ios::binary);
    out << first.out;
  }
  CliResult second = run_cli("replay " + path);
  REQUIRE(second.status == 0);
  CHECK(second.out == first.out);

  // measure reports replay too
  CliResult m = run_cli("measure badk --k 2");
  REQUIRE(m.status == 0);
  std::string mpath = tmp_path("replay_m.json");
  {
    std::ofstream out(mpath, std::ios::binary);
    out << m.out;
  }
  CliResult mre = run_cli("replay " + mpath);
  REQUIRE(mre.status == 0);
  CHECK(mre.out == m.out);
}

TEST_CASE("csv output is a plain table") {
  CliResult csv = run_cli("--format csv zstats --source random:3 --k 4 --lambda 1 --jmax 2");
  REQUIRE(csv.status == 0);
  CHECK(csv.out.rfind("j,z_num,z_den,z_dec,poisson,deviation", 0) == 0);
  int lines = 0;
  for (char c : csv.out)
    if (c == '\n') ++lines;
  CHECK(lines == 4);  // header + j in {0,1,2}
}

TEST_CASE("exit codes distinguish failure classes") {
  CHECK(run_cli("zstats --source random --k 0 --lambda 1").status == 2);   // flag range
  CHECK(run_cli("zstats --source mystery:1 --k 2 --lambda 1").status == 2);  // bad source spec
  CHECK(run_cli("zstats --source file:" + tmp_path("missing.txt") + " --k 2 --lambda 1").status ==
        4);
  // enumeration past the prefix cap
  CHECK(run_cli("measure bad --lambda 1 --k 26 --j 0 --epsilon 1/2").status == 3);
  // the prescribed constraint schedule is infeasible by a wide margin
  CHECK(run_cli("measure algorithm --reference --steps 4").status == 3);
  CHECK(run_cli("nonsense").status == 2);
}

TEST_CASE("dense cap override changes storage, not results") {
  std::string args = "zstats --source random:11 --k 5 --lambda 2 --jmax 4";
  CliResult wide = run_cli(args);
  CliResult narrow = run_cli(args, "PG_DENSE_CAP=2");
  REQUIRE(wide.status == 0);
  REQUIRE(narrow.status == 0);
  // manifests differ (the cap is a recorded parameter); reports agree
  CHECK(json::parse(wide.out).at("report") == json::parse(narrow.out).at("report"));
}

TEST_CASE("digit selection trace file holds one JSON object per step") {
  std::string tpath = tmp_path("trace.jsonl");
  CliResult res = run_cli("measure algorithm --steps 4 --threshold grid --trace-out " + tpath);
  REQUIRE(res.status == 0);
  json rep = json::parse(res.out);
  CHECK(rep.at("report").at("digits") == "0000");

  std::istringstream lines(slurp(tpath));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    json step = json::parse(line);
    ++count;
    for (const char* key : {"n", "chosen_digit", "interval", "measure_num", "measure_den",
                            "threshold_num", "threshold_den"})
      REQUIRE(step.contains(key));
    CHECK(step.size() == 7);
    CHECK(step.at("interval").contains("level"));
    CHECK(step.at("interval").contains("index"));
  }
  CHECK(count == 4);
}

TEST_CASE("construct reports the block layout") {
  CliResult res = run_cli(
      "construct --source random:1 --flavor boldfast --z tail=const:2 --steps 2 --length 40");
  REQUIRE(res.status == 0);
  json rep = json::parse(res.out).at("report");
  const json& blocks = rep.at("blocks");
  REQUIRE(blocks.size() == 2);
  CHECK(blocks.at(0).at("begin") == 2);
  CHECK(blocks.at(0).at("end") == 32);
  CHECK(blocks.at(0).at("copy_end") == 16);
  CHECK(blocks.at(1).at("end") == 16384);
}

TEST_CASE("packed digit files round trip through the cli") {
  std::string path = tmp_path("digits.pgd");
  CliResult gen = run_cli("--base 3 --digit-format packed gen --source random:5 --length 1000 --out " + path);
  REQUIRE(gen.status == 0);
  CliResult z1 = run_cli("--base 3 --digit-format packed zstats --source file:" + path +
                         " --k 3 --lambda 1 --jmax 3");
  REQUIRE(z1.status == 0);
  CliResult z2 = run_cli("zstats --source random:5 --base 3 --k 3 --lambda 1 --jmax 3");
  REQUIRE(z2.status == 0);
  CHECK(json::parse(z1.out).at("report").at("rows") == json::parse(z2.out).at("report").at("rows"));
}

TEST_CASE("distribution distance report") {
  CliResult res = run_cli("tv --source random:9 --k 6 --lambda 1/2 --lambda2 3/4");
  REQUIRE(res.status == 0);
  json rep = json::parse(res.out).at("report");
  double tvp = rep.at("tv_poisson").get<double>();
  CHECK(tvp > 0.0);
  CHECK(tvp <= 0.25);
  CHECK(rep.at("tv_empirical").contains("num"));
}
