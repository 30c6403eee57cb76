#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "kleinbox/config.hpp"
#include "kleinbox/export.hpp"

using namespace kleinbox;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run kleinbox_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"kleinbox"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("kleinbox_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

void expect_identical_dirs(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    REQUIRE(fs::exists(b / rel));
    CHECK(slurp(e.path()) == slurp(b / rel));
    ++files;
  }
  CHECK(files > 0);
}

// Config with the disorder switched off.
fs::path clean_config(const std::string& name) {
  const auto p = scratch(name + ".cfg");
  std::ofstream(p) << "# no disorder\ndisorder_sigma_mhz = 0\n";
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("levels") {
  const auto dir = scratch("levels");
  const auto r = kleinbox_cli({"levels", "--preset", "e1", "--symmetric-check",
                               "--out-dir", dir.string()});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("symmetric check: max |E_n + E_(N+1-n) - V0|") != std::string::npos);
  CHECK(line_count(slurp(dir / "levels.csv")) == 11);
  CHECK(slurp(dir / "levels.csv").rfind("n,e_continuum_mhz,f_continuum_mhz,f_lattice_mhz,delta_mhz", 0) == 0);
}

TEST_CASE("json format") {
  const auto dir = scratch("levels_json");
  REQUIRE(kleinbox_cli({"levels", "--format", "json", "--out-dir", dir.string()}).code == 0);
  const auto j = io::Json::parse(slurp(dir / "levels.json"));
  CHECK(j.size() == 10);
  CHECK(j[0].contains("delta_mhz"));
  CHECK(j[0]["n"].is_number());
}

TEST_CASE("config errors exit with 2") {
  CHECK(kleinbox_cli({"levels", "--v0", "20", "--out-dir", scratch("v0").string()}).code ==
        cli::kConfigError);
  CHECK(kleinbox_cli({"levels", "--preset", "e7"}).code == cli::kConfigError);
  CHECK(kleinbox_cli({"levels", "--format", "yaml"}).code == cli::kConfigError);
  CHECK(kleinbox_cli({"levels", "--unknown-flag"}).code == cli::kConfigError);
  const auto cfg = scratch("bad.cfg");
  std::ofstream(cfg) << "mass = 3\n";
  const auto r = kleinbox_cli({"levels", "--config", cfg.string()});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("mass") != std::string::npos);
}

TEST_CASE("config file then flags") {
  const auto cfg = scratch("order.cfg");
  std::ofstream(cfg) << "preset = e4\nv0_mhz = 70\nseed = 9\n";
  const auto dir = scratch("order");
  REQUIRE(kleinbox_cli({"levels", "--config", cfg.string(), "--v0", "75", "--out-dir",
                        dir.string()}).code == 0);
  const auto run = apply_config(RunConfig{}, KeyValueConfig::read(dir / "run.cfg"));
  CHECK(run.geometry.n_right == 9);
  CHECK(run.step_height == 75.0);
  CHECK(run.seed == 9);
}

TEST_CASE("ldos ridge counts without disorder") {
  const auto dir = scratch("ldos");
  const auto r = kleinbox_cli({"ldos", "--config", clean_config("ldos").string(),
                               "--out-dir", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("left: 5 ridges") != std::string::npos);
  CHECK(r.out.find("right: 5 ridges") != std::string::npos);
  CHECK(r.out.find("whole: 10 ridges") != std::string::npos);
  for (const char* f : {"ldos_left.csv", "ldos_right.svg", "ldos_whole.csv", "ridges.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(slurp(dir / "ldos_whole.svg").find("<svg") != std::string::npos);

  const auto again = scratch("ldos_again");
  REQUIRE(kleinbox_cli({"ldos", "--config", clean_config("ldos").string(),
                        "--out-dir", again.string()}).code == 0);
  expect_identical_dirs(dir, again);
}

TEST_CASE("pipeline writes the 3rd-mode comparison and reruns identically") {
  const auto dir = scratch("pipeline_e4");
  const auto r = kleinbox_cli({"pipeline", "--preset", "e4", "--out-dir", dir.string()});
  CHECK(r.code == cli::kOk);
  CHECK(fs::exists(dir / "intensity_mode3.csv"));
  CHECK(fs::exists(dir / "intensity_mode3.svg"));
  CHECK(line_count(slurp(dir / "intensity_mode3.csv")) == 49);

  const auto manifest = io::Json::parse(slurp(dir / "manifest.json"));
  for (const auto& f : manifest.at("outputs")) CHECK(fs::exists(dir / f.get<std::string>()));
  CHECK(manifest.at("outputs").size() ==
        static_cast<std::size_t>(std::distance(fs::recursive_directory_iterator(dir),
                                               fs::recursive_directory_iterator{})) - 1);

  const auto again = scratch("pipeline_e4_rerun");
  REQUIRE(kleinbox_cli({"rerun", "--manifest", (dir / "manifest.json").string(),
                        "--out-dir", again.string()}).code == 0);
  expect_identical_dirs(dir, again);
}

TEST_CASE("seed ensemble summary") {
  const auto dir = scratch("pipeline_seeds");
  const auto r = kleinbox_cli({"pipeline", "--seeds", "3", "--summary", "--out-dir",
                               dir.string()});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("parameter recovery") != std::string::npos);
  CHECK(line_count(slurp(dir / "recovery.csv")) == 1 + 3 * 4);
  CHECK(line_count(slurp(dir / "summary.csv")) == 1 + 4);
}

TEST_CASE("failed in-run check exits with 4 and names the check") {
  // Intensities cannot be recovered through this much noise.
  const auto r = kleinbox_cli({"pipeline", "--noise", "0.2", "--out-dir",
                               scratch("noisy").string()});
  CHECK(r.code == cli::kAcceptanceFailure);
  CHECK(r.out.find("acceptance check failed:") != std::string::npos);
}

}  // TEST_SUITE
