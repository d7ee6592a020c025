#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "lunardop/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) : path(fs::temp_directory_path() / ("lunardop_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

int run(const std::string& args) {
  const std::string cmd = std::string(LUNARDOP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

constexpr const char* kNoiseless = R"({
  "ephemeris": "perfect",
  "randomize_anomaly": false,
  "receiver": {"fixed": {"lat_deg": 84.0, "lon_deg": 40.0, "alt_km": 0.0}},
  "errors": {"ephemeris": false, "satellite_clock": false, "receiver_clock": false, "carrier_tracking": false}
})";

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#' && line.rfind("t_R", 0) != 0) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("validation problems exit with 1") {
  Workdir w("validation");
  CHECK(run("") == 1);
  CHECK(run("simulate --ephemeris 3 --out " + (w / "a").string()) == 1);
  CHECK(run("simulate --config " + (w / "missing.json").string()) == 1);
  CHECK(run("simulate --trials 0") == 1);
  write(w / "unknown.json", R"({"trails": 5})");
  CHECK(run("simulate --config " + (w / "unknown.json").string()) == 1);
  write(w / "range.json", R"({"receiver": {"lat_min_deg": 120}})");
  CHECK(run("montecarlo --config " + (w / "range.json").string()) == 1);
}

TEST_CASE("runtime problems exit with 2") {
  Workdir w("runtime");
  CHECK(run("solve --in " + (w / "nothing").string() + " --out " + (w / "o").string()) == 2);
  write(w / "file", "x");
  CHECK(run("simulate --ephemeris perfect --out " + (w / "file" / "sub").string()) == 2);
}

TEST_CASE("noiseless simulate then solve recovers the receiver") {
  Workdir w("roundtrip");
  write(w / "cfg.json", kNoiseless);
  const std::string out = (w / "run").string();
  REQUIRE(run("simulate --config " + (w / "cfg.json").string() + " --out " + out) == 0);
  for (const char* f : {"ephemeris.json", "observations.csv", "truth.json", "manifest.json"}) {
    CHECK(fs::exists(fs::path(out) / f));
  }
  CHECK(data_rows(fs::path(out) / "observations.csv") > 500);
  REQUIRE(run("solve --config " + (w / "cfg.json").string() + " --out " + out) == 0);
  const auto sol = nlohmann::json::parse(lunardop::read_file(fs::path(out) / "solution.json"));
  CHECK(sol["schema"] == "lunardop-solution/1");
  CHECK(sol["method"] == "single_pass_cost_choice");
  CHECK(sol["error_m"].get<double>() < 1.0);
  CHECK(sol["step_history"].size() == 3);
  const auto manifest = nlohmann::json::parse(lunardop::read_file(fs::path(out) / "manifest.json"));
  CHECK(manifest["schema"] == "lunardop-manifest/1");
  CHECK(manifest["command"] == "solve");
}

TEST_CASE("two-pass input takes the disambiguation path") {
  Workdir w("twopass");
  write(w / "cfg.json", kNoiseless);
  const std::string out = (w / "run").string();
  REQUIRE(run("simulate --config " + (w / "cfg.json").string() + " --passes 2 --out " + out) == 0);
  REQUIRE(run("solve --in " + out + " --out " + out) == 0);
  const auto sol = nlohmann::json::parse(lunardop::read_file(fs::path(out) / "solution.json"));
  CHECK(sol["method"] == "multipass");
  REQUIRE(sol.contains("disambiguation"));
  CHECK(sol["disambiguation"]["passes"].size() == 2);
  CHECK(sol["disambiguation"]["passes"][0].contains("mirror_km"));
  CHECK(sol["error_m"].get<double>() < 1.0);
}

TEST_CASE("malformed observation row is reported by number") {
  Workdir w("malformed");
  write(w / "cfg.json", kNoiseless);
  const std::string out = (w / "run").string();
  REQUIRE(run("simulate --config " + (w / "cfg.json").string() + " --out " + out) == 0);
  std::string text = lunardop::read_file(fs::path(out) / "observations.csv");
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;  // start of line 5
  text.insert(pos, "oops,");
  write(fs::path(out) / "observations.csv", text);
  const std::string cmd = std::string(LUNARDOP_CLI) + " solve --in " + out + " --out " + (w / "o").string() +
                          " 2>" + (w / "err.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  CHECK(lunardop::read_file(w / "err.txt").find("row 5") != std::string::npos);
}

TEST_CASE("a higher mask yields fewer observations") {
  Workdir w("mask");
  write(w / "cfg.json", kNoiseless);
  std::string high = kNoiseless;
  high.insert(1, "\"mask_deg\": 30,");
  write(w / "high.json", high);
  REQUIRE(run("simulate --config " + (w / "cfg.json").string() + " --out " + (w / "a").string()) == 0);
  REQUIRE(run("simulate --config " + (w / "high.json").string() + " --out " + (w / "b").string()) == 0);
  CHECK(data_rows(w / "b" / "observations.csv") < data_rows(w / "a" / "observations.csv"));
}

TEST_CASE("gdop writes the full grid") {
  Workdir w("gdop");
  REQUIRE(run("gdop --grid-only --passes 2 --out " + (w / "g").string()) == 0);
  const std::string text = lunardop::read_file(w / "g" / "gdop.csv");
  CHECK(text.rfind("# schema: lunardop-gdop/1\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 20 * 72);
}
