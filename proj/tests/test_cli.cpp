#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "harvestgame/cliapp.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("hg_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args) {
  return harvestgame::cli::run(args);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen then run round trip") {
  TempDir dir("genrun");
  const std::string ch = dir / "channels.json";
  CHECK(run_cli({"gen", "--preset", "paper-K3", "--seed", "5", "--out", ch}) ==
        0);
  REQUIRE(fs::exists(ch));

  const std::string out = dir / "trace.csv";
  CHECK(run_cli({"run", "--preset", "paper-K3", "--channels", ch, "--engine",
                 "noncoop", "--seed", "5", "--gamma", "0", "--out", out}) == 0);
  REQUIRE(fs::exists(out));
  REQUIRE(fs::exists(dir / "trace_summary.json"));

  const auto j = nlohmann::json::parse(slurp(dir / "trace_summary.json"));
  CHECK(j.at("engine").get<std::string>() == "noncoop");
  CHECK(j.at("seed").get<std::uint64_t>() == 5);
  CHECK(j.at("gamma").get<double>() == 0.0);
  CHECK(j.at("ok").get<bool>());
  CHECK(j.at("classification").get<std::string>() == "converged-NE");
}

TEST_CASE("coop and multi engines run from the preset") {
  TempDir dir("engines");
  CHECK(run_cli({"run", "--preset", "paper-K3", "--engine", "coop", "--seed",
                 "103", "--gamma", "30", "--out", dir / "c.csv"}) == 0);
  const auto cj = nlohmann::json::parse(slurp(dir / "c_summary.json"));
  CHECK(cj.at("converged").get<bool>());
  CHECK(cj.at("energy_total").get<double>() >= 30.0 * (1 - 1e-6));

  CHECK(run_cli({"run", "--preset", "paper-K3", "--engine", "multi", "--seed",
                 "103", "--gamma", "30", "--out", dir / "m.csv"}) == 0);
  const auto mj = nlohmann::json::parse(slurp(dir / "m_summary.json"));
  CHECK(mj.at("ok").get<bool>());
}

TEST_CASE("sweep output does not depend on the thread budget") {
  TempDir a("sweep1"), b("sweep4");
  ::setenv("HARVESTGAME_THREADS", "1", 1);
  CHECK(run_cli({"sweep", "--preset", "paper-K3", "--engine", "noncoop",
                 "--seed", "7", "--gamma", "0,5", "--out",
                 a.path.string()}) == 0);
  ::setenv("HARVESTGAME_THREADS", "4", 1);
  CHECK(run_cli({"sweep", "--preset", "paper-K3", "--engine", "noncoop",
                 "--seed", "7", "--gamma", "0,5", "--out",
                 b.path.string()}) == 0);
  ::unsetenv("HARVESTGAME_THREADS");

  for (const char* name :
       {"aggregate.csv", "index.json", "gamma_0.csv", "gamma_0_summary.json",
        "gamma_5.csv", "gamma_5_summary.json"}) {
    REQUIRE(fs::exists(a / name));
    REQUIRE(fs::exists(b / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }

  CHECK(run_cli({"report", "--out", a.path.string()}) == 0);
}

TEST_CASE("argument errors exit with the usage code") {
  TempDir dir("badargs");
  CHECK(run_cli({"gen", "--preset", "paper-K3"}) == 2);  // --out required
  CHECK(run_cli({"sweep", "--preset", "paper-K3", "--out",
                 dir.path.string()}) == 2);  // --gamma required
  CHECK(run_cli({"run", "--preset", "paper-K3", "--engine", "bogus",
                 "--gamma", "5", "--out", dir / "x.csv"}) == 2);
  CHECK(run_cli({"run", "--preset", "nope", "--gamma", "5", "--out",
                 dir / "y.csv"}) == 2);
}

TEST_CASE("config errors name the offending field") {
  TempDir dir("badcfg");
  const std::string cfg = dir / "bad.json";
  {
    std::ofstream out(cfg);
    out << R"({"num_users": 2, "power_limits": [8.0, 8.0, 8.0]})";
  }
  CHECK(run_cli({"run", "--config", cfg, "--gamma", "5", "--out",
                 dir / "z.csv"}) == 2);
}

}  // TEST_SUITE
