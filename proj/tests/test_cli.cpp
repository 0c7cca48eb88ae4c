#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "vedge/a3c.hpp"
#include "vedge/nn.hpp"

namespace fs = std::filesystem;
using namespace vedge;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vedge_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const std::string kScenarios = VEDGE_SCENARIO_DIR;

int cli(const std::string& args, const std::string& stdout_to = "/dev/null") {
  const std::string cmd =
      std::string(VEDGE_CLI_PATH) + " " + args + " > " + stdout_to + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void put(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("gen is deterministic per seed") {
  TempDir tmp;
  const auto cfg = kScenarios + "/reference.toml";
  REQUIRE(cli("gen --config " + cfg + " --out " + (tmp / "a.toml")) == 0);
  REQUIRE(cli("gen --config " + cfg + " --out " + (tmp / "b.toml")) == 0);
  REQUIRE(cli("gen --config " + cfg + " --seed 9 --out " + (tmp / "c.toml")) == 0);
  CHECK(slurp(tmp / "a.toml") == slurp(tmp / "b.toml"));
  CHECK(slurp(tmp / "a.toml") != slurp(tmp / "c.toml"));
  const auto loaded = load_scenario(tmp / "a.toml");
  CHECK(loaded.nodes == make_scenario(load_config(cfg)).nodes);
  REQUIRE(loaded.sample.has_value());
  CHECK(loaded.sample->tasks.size() == 10);
}

TEST_CASE("existing outputs need --force") {
  TempDir tmp;
  const auto cfg = kScenarios + "/reference.toml";
  put(tmp / "a.toml", "keep");
  CHECK(cli("gen --config " + cfg + " --out " + (tmp / "a.toml")) == 2);
  CHECK(slurp(tmp / "a.toml") == "keep");
  CHECK(cli("gen --config " + cfg + " --out " + (tmp / "a.toml") + " --force") == 0);
  CHECK(slurp(tmp / "a.toml") != "keep");
}

TEST_CASE("bad configs and flags exit 2 without output") {
  TempDir tmp;
  put(tmp / "bad.toml", "[nodes]\nlocal_freq = -5\n");
  CHECK(cli("gen --config " + (tmp / "bad.toml") + " --out " + (tmp / "o.toml")) == 2);
  put(tmp / "junk.toml", "[nodes\nlocal_freq = fast\n");
  CHECK(cli("gen --config " + (tmp / "junk.toml") + " --out " + (tmp / "o.toml")) == 2);
  CHECK_FALSE(fs::exists(tmp / "o.toml"));
  CHECK_FALSE(fs::exists(tmp / "o.toml.tmp"));
  CHECK(cli("gen --out " + (tmp / "o.toml")) == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("") == 2);
  CHECK(cli("--help") == 0);
  const auto sc = kScenarios + "/dominant.toml";
  CHECK(cli("train --scenario " + sc + " --out " + (tmp / "m.ckpt") + " --gamma 2") == 2);
  CHECK(cli("train --scenario " + sc + " --out " + (tmp / "m.ckpt") + " --optimizer adam") == 2);
  CHECK(cli("compare --scenario " + sc + " --baselines oracle") == 2);
  CHECK_FALSE(fs::exists(tmp / "m.ckpt"));
}

TEST_CASE("single-thread training is byte-reproducible") {
  TempDir tmp;
  const auto sc = kScenarios + "/dominant.toml";
  const std::string common = "train --scenario " + sc + " --episodes 50 --seed 4 --single-thread";
  REQUIRE(cli(common + " --out " + (tmp / "a.ckpt") + " --csv " + (tmp / "a.csv")) == 0);
  REQUIRE(cli(common + " --out " + (tmp / "b.ckpt") + " --csv " + (tmp / "b.csv")) == 0);
  CHECK(slurp(tmp / "a.ckpt") == slurp(tmp / "b.ckpt"));
  CHECK(slurp(tmp / "a.csv") == slurp(tmp / "b.csv"));

  std::istringstream csv(slurp(tmp / "a.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "#vedge-train v1");
  std::getline(csv, line);
  CHECK(line == "episode,worker,return,service_delay_s,mean_entropy,value_loss,store_version");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 50);
}

TEST_CASE("zero training episodes write the initial model") {
  TempDir tmp;
  const auto sc = kScenarios + "/dominant.toml";
  REQUIRE(cli("train --scenario " + sc + " --episodes 0 --seed 4 --out " + (tmp / "z.ckpt")) == 0);
  const auto scenario = std::make_shared<const Scenario>(load_scenario(sc));
  auto h = a3c::from_preset(scenario->config.agent);
  h.seed = 4;
  CHECK(nn::load_checkpoint(fs::path(tmp / "z.ckpt")) ==
        a3c::init_networks(env::Environment(scenario), h));

  REQUIRE(cli("train --scenario " + sc + " --episodes 0 --init " + (tmp / "z.ckpt") +
                " --out " + (tmp / "y.ckpt")) == 0);
  CHECK(slurp(tmp / "y.ckpt") == slurp(tmp / "z.ckpt"));
}

TEST_CASE("eval and compare report metrics") {
  TempDir tmp;
  const auto sc = kScenarios + "/dominant.toml";
  REQUIRE(cli("train --scenario " + sc + " --episodes 20 --out " + (tmp / "m.ckpt")) == 0);
  REQUIRE(cli("eval --checkpoint " + (tmp / "m.ckpt") + " --scenario " + sc +
                " --episodes 10 --trace " + (tmp / "t.csv"),
                tmp / "eval.json") == 0);
  const auto j = nlohmann::json::parse(slurp(tmp / "eval.json"));
  CHECK(j["schema"] == "vedge-metrics/1");
  REQUIRE(j["results"].size() == 1);
  CHECK(j["results"][0]["policy"] == "kd");
  CHECK(j["results"][0]["episodes"] == 10);
  CHECK(j["results"][0]["mean_service_delay_s"].get<double>() > 0.0);
  CHECK(slurp(tmp / "t.csv").rfind("#vedge-trace v1\n", 0) == 0);

  REQUIRE(cli("compare --checkpoint " + (tmp / "m.ckpt") + " --scenario " + sc +
                " --episodes 10 --json " + (tmp / "cmp.json")) == 0);
  const auto c = nlohmann::json::parse(slurp(tmp / "cmp.json"));
  REQUIRE(c["results"].size() == 4);
  CHECK(c["results"][0]["policy"] == "kd");
  CHECK(c["results"][0]["mean_service_delay_s"] == j["results"][0]["mean_service_delay_s"]);
  CHECK(c["results"][2]["policy"] == "local");

  REQUIRE(cli("compare --scenario " + sc + " --baselines greedy --episodes 5 --json -",
                tmp / "g.json") == 0);
  CHECK(nlohmann::json::parse(slurp(tmp / "g.json"))["results"].size() == 1);
}

TEST_CASE("a checkpoint from another scenario is refused") {
  TempDir tmp;
  REQUIRE(cli("train --scenario " + kScenarios + "/dominant.toml --episodes 1 --out " +
                (tmp / "m.ckpt")) == 0);
  CHECK(cli("eval --checkpoint " + (tmp / "m.ckpt") + " --scenario " + kScenarios +
              "/reference.toml --episodes 1") == 3);
  CHECK(cli("compare --checkpoint " + (tmp / "m.ckpt") + " --scenario " + kScenarios +
              "/reference.toml --episodes 1") == 3);
  CHECK(cli("eval --checkpoint " + (tmp / "missing.ckpt") + " --scenario " + kScenarios +
              "/dominant.toml") == 3);
}
