// Drives the evodiff binary as a user would; checks exit codes and outputs.
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// stdout is captured; stderr goes to a side file so stdout stays machine-readable.
Run cli(const std::string& args) {
  const std::string cmd = std::string(EVODIFF_CLI) + " " + args + " 2>>" +
                          (fs::temp_directory_path() / "evodiff_cli_tests.stderr").string();
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("evodiff_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kToyPrior =
    R"({"weights":[0.5,0.5],"means":[[-2,0],[2,0]],"variances":[[0.25,0.25],[0.25,0.25]]})";

}  // namespace

TEST_CASE("help lists every flag") {
  const std::pair<const char*, std::vector<const char*>> commands[] = {
      {"train", {"--data", "--synth", "--schedule", "--out", "--seed", "--epochs", "--lr", "--batch", "--momentum", "--hidden"}},
      {"sample", {"--denoiser", "--schedule", "--n", "--guidance", "--fitness", "--fitness-params", "--seed", "--out", "--threads", "--states", "--diagnostics"}},
      {"experiment", {"--config", "--out", "--threads"}},
      {"eval", {"--fitness", "--fitness-params", "--designs"}},
      {"plot", {"--summary", "--out", "--width", "--height"}},
  };
  for (const auto& [cmd, flags] : commands) {
    const Run r = cli(std::string(cmd) + " --help");
    CHECK(r.code == 0);
    for (const char* f : flags) CHECK_MESSAGE(r.out.find(f) != std::string::npos, cmd << " " << f);
  }
  CHECK(cli("--help").code == 0);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("eval --fitness flow").code == 2);
  CHECK(cli("eval --fitness flow --designs x --bogus").code == 2);
}

TEST_CASE("eval reproduces the resistor-ladder oracle") {
  const auto dir = scratch("eval");
  json design = {{"kind", "grid"}, {"shape", {16, 16}}, {"values", std::vector<double>(256, 1.0)}};
  put(dir / "design_0000.json", design.dump());
  const Run r = cli("eval --fitness flow --designs " + (dir / "design_0000.json").string());
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "design,fitness,objective");
  const double dp = std::stod(row.substr(row.rfind(',') + 1));
  CHECK(std::abs(dp - 15.0 / 16.0) < 1e-8);

  // a directory is evaluated in file-name order
  design["values"][0] = 0.0;
  put(dir / "design_0001.json", design.dump());
  const Run both = cli("eval --fitness flow --designs " + dir.string());
  REQUIRE(both.code == 0);
  CHECK(std::count(both.out.begin(), both.out.end(), '\n') == 3);
  CHECK(both.out.find("design_0000.json") < both.out.find("design_0001.json"));
}

TEST_CASE("eval edge cases") {
  const auto empty = scratch("eval_empty");
  const Run r = cli("eval --fitness flow --designs " + empty.string());
  CHECK(r.code == 0);
  CHECK(r.out == "design,fitness,objective\n");
  CHECK(cli("eval --fitness warp --designs " + empty.string()).code == 2);
  CHECK(cli("eval --fitness flow --designs " + (empty / "absent.json").string()).code == 5);
  put(empty / "design_0000.json", R"({"kind":"grid","shape":[4,4],"values":[1,1]})");
  CHECK(cli("eval --fitness flow --designs " + empty.string()).code == 2);
}

TEST_CASE("sample writes designs and a manifest, deterministically") {
  const auto dir = scratch("sample");
  put(dir / "prior.json", kToyPrior);
  const std::string base = "sample --denoiser " + (dir / "prior.json").string() +
                           " --schedule '{\"T\":20}' --n 3 --fitness gmm_toy --seed 11 --out ";
  const Run a = cli(base + (dir / "a").string() + " --guidance none");
  REQUIRE(a.code == 0);
  const json manifest = json::parse(a.out);
  CHECK(manifest.at("command") == "sample");
  CHECK(manifest.at("seed") == 11);
  CHECK(manifest.at("versions").at("evodiff") == "0.1.0");
  for (const char* f : {"design_0000.json", "design_0001.json", "design_0002.json", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
  }
  const Run b = cli(base + (dir / "b").string() + " --guidance none");
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a" / "design_0001.json") == slurp(dir / "b" / "design_0001.json"));
  const json sa = json::parse(slurp(dir / "a" / "manifest.json")).at("samples");
  const json sb = json::parse(slurp(dir / "b" / "manifest.json")).at("samples");
  REQUIRE(sa.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sa[i].at("objective") == sb[i].at("objective"));
    CHECK(sa[i].at("seed") == sb[i].at("seed"));
  }
  const std::string first_manifest = slurp(dir / "a" / "manifest.json");
  REQUIRE(cli(base + (dir / "a").string() + " --guidance none").code == 0);
  CHECK(slurp(dir / "a" / "manifest.json") == first_manifest);
  CHECK(slurp(dir / "a" / "design_0000.json") != slurp(dir / "a" / "design_0001.json"));

  const std::string guided = base + (dir / "g").string() +
                             " --guidance '{\"alpha\":3,\"n_samples\":8,\"window\":[10,1]}' --diagnostics";
  const Run g = cli(guided);
  REQUIRE(g.code == 0);
  CHECK(slurp(dir / "g" / "design_0000.json") != slurp(dir / "a" / "design_0000.json"));
  CHECK(fs::exists(dir / "g" / "diagnostics_0000.jsonl"));
  const std::string threaded = base + (dir / "g4").string() +
                               " --guidance '{\"alpha\":3,\"n_samples\":8,\"window\":[10,1]}' --threads 4";
  REQUIRE(cli(threaded).code == 0);
  CHECK(slurp(dir / "g" / "design_0002.json") == slurp(dir / "g4" / "design_0002.json"));

  CHECK(cli(base + (dir / "c").string() + " --guidance '{\"alpha\":-1}'").code == 2);
  CHECK(cli("sample --denoiser " + (dir / "missing.json").string() + " --out " + (dir / "d").string()).code == 5);
  // guided sampling against a fitness of the wrong length
  CHECK(cli(base + (dir / "e").string() + " --fitness linear --fitness-params '{\"g\":[1,2,3]}'").code == 2);
}

TEST_CASE("train") {
  const auto dir = scratch("train");
  const Run init = cli("train --synth 8,8,16 --seed 3 --epochs 0 --out " + (dir / "init.json").string());
  REQUIRE(init.code == 0);
  CHECK(json::parse(slurp(dir / "init.json")).contains("layer_sizes"));

  const std::string args = "train --synth 8,8,64 --seed 3 --out ";
  const Run a = cli(args + (dir / "a.json").string());
  const Run b = cli(args + (dir / "b.json").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  const json report = json::parse(a.out);
  const auto losses = report.at("epoch_losses").get<std::vector<double>>();
  REQUIRE(losses.size() == 100);
  MESSAGE("first epoch " << losses.front() << ", final " << report.at("final_loss"));
  // measured 0.34 with these defaults
  CHECK(report.at("final_loss").get<double>() <= 0.5 * losses.front());

  put(dir / "data.json", "[[0,1],[1,0],[0.5,0.5]]");
  CHECK(cli("train --data " + (dir / "data.json").string() + " --epochs 2 --out " + (dir / "d.json").string()).code == 0);
  CHECK(cli("train --data " + (dir / "data.json").string() + " --epochs 50 --lr 1e6 --momentum 0 --out " +
            (dir / "x.json").string())
            .code == 3);
  put(dir / "ragged.json", "[[0,1],[1]]");
  CHECK(cli("train --data " + (dir / "ragged.json").string() + " --out " + (dir / "r.json").string()).code == 2);

  // a trained model samples through the same CLI
  const Run s = cli("sample --denoiser " + (dir / "d.json").string() + " --n 2 --seed 1 --out " + (dir / "samples").string());
  CHECK(s.code == 0);
  CHECK(cli("sample --denoiser " + (dir / "d.json").string() + " --schedule '{\"T\":30}' --out " + (dir / "s2").string()).code == 2);
}

TEST_CASE("experiment smoke run") {
  const auto dir = scratch("experiment");
  const json cfg = {{"task", "gmm_toy"},
                    {"n_runs", 1},
                    {"schedule", {{"T", 20}}},
                    {"arms", {{{"name", "UD-0"}}, {{"name", "CD-1"}, {"guidance", {{"n_samples", 6}, {"window", {10, 1}}}}}}},
                    {"comparisons", json::array({json::array({"CD-1", "UD-0"})})}};
  put(dir / "exp.json", cfg.dump());
  const Run r = cli("experiment --config " + (dir / "exp.json").string() + " --out " + (dir / "out").string());
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("command") == "experiment");
  for (const char* f : {"results.csv", "results.json", "summary.json", "summary_CD-1_vs_UD-0.svg", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
  }
  const Run again = cli("experiment --config " + (dir / "exp.json").string() + " --threads 3 --out " + (dir / "again").string());
  REQUIRE(again.code == 0);
  CHECK(slurp(dir / "out" / "results.csv") == slurp(dir / "again" / "results.csv"));
  CHECK(json::parse(r.out).at("config_hash") == json::parse(again.out).at("config_hash"));

  json bad = cfg;
  bad["nruns"] = 2;
  put(dir / "bad.json", bad.dump());
  CHECK(cli("experiment --config " + (dir / "bad.json").string() + " --out " + (dir / "bad").string()).code == 2);
}

TEST_CASE("plot matches the golden rendering") {
  const auto dir = scratch("plot");
  const std::string fixtures = EVODIFF_FIXTURES;
  const Run r = cli("plot --summary " + fixtures + "/summary.json --out " + (dir / "p.svg").string());
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "p.svg") == slurp(fixtures + "/summary_golden.svg"));
  put(dir / "broken.json", R"({"arms":["a","b"]})");
  CHECK(cli("plot --summary " + (dir / "broken.json").string() + " --out " + (dir / "q.svg").string()).code == 2);
}
