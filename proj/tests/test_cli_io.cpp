#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ydl/cli_io.hpp"

using namespace ydl;
namespace fs = std::filesystem;

namespace {

RunConfig parse(std::vector<const char*> args) {
  args.insert(args.begin(), "ydlab");
  return parse_config(static_cast<int>(args.size()), args.data());
}

int run(std::vector<const char*> args, std::string* text = nullptr) {
  args.insert(args.begin(), "ydlab");
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(args.size()), args.data(), out, err);
  if (text) *text = out.str() + err.str();
  return code;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("ydl-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_SUITE("cli_io") {

TEST_CASE("flag parsing") {
  RunConfig c = parse({"simulate", "--stat", "ru", "--N", "100", "--t-end", "0.2", "--seed", "7"});
  CHECK(c.command == Command::simulate);
  CHECK(c.statistics == Statistics::RU);
  CHECK(*c.N == 100);
  CHECK(*c.t_end == 0.2);
  CHECK(c.seed == 7);
  CHECK_NOTHROW(c.validate());

  CHECK_THROWS_AS(parse({"simulate", "--stat", "u"}), ConfigError);
  CHECK(run({"simulate", "--stat", "u"}) == 2);
  CHECK_THROWS_AS(parse({"simulate", "--bogus", "1"}), ConfigError);
  CHECK_THROWS_AS(parse({"launch"}), ConfigError);
  CHECK_THROWS_AS(parse({"fluct-static", "--probes"}), ConfigError);
  CHECK_THROWS_AS(parse({"fluct-static", "--N", "10", "--probes", "1", "0.5"}), ConfigError);
  CHECK_THROWS_AS(parse({"fluct-static", "--stat", "u", "--N", "10", "--probes", "0", "0.5"}), ConfigError);
  CHECK_NOTHROW(parse({"fluct-static", "--stat", "ru", "--N", "10", "--probes", "0", "0.5"}));
}

TEST_CASE("config file, environment and flags") {
  fs::path dir = scratch("config");
  fs::path file = dir / "run.json";
  std::ofstream(file) << R"({"command": "sample-static", "stat": "u", "N": 10, "M": 3, "output_dir": ")"
                      << (dir / "out").string() << R"("})";
  RunConfig c = parse({"sample-static", "--config", file.c_str(), "--M", "5"});
  CHECK(*c.M == 5);
  CHECK(*c.N == 10);
  CHECK(c.statistics == Statistics::U);
  std::ostringstream out;
  CHECK(execute(c, out) == 0);
  CHECK(read_json(dir / "out" / "manifest.json")["config"]["M"] == 5);

  std::ofstream(dir / "bad.json") << R"({"N": 10, "colour": "red"})";
  CHECK_THROWS_AS(parse({"sample-static", "--config", (dir / "bad.json").c_str()}), ConfigError);

  ::setenv("YDL_OUTPUT_DIR", (dir / "env").c_str(), 1);
  ::setenv("YDL_THREADS", "3", 1);
  RunConfig e = parse({"sample-static", "--config", file.c_str()});
  CHECK(e.output_dir == (dir / "env").string());
  CHECK(e.threads == 3);
  RunConfig f = parse({"sample-static", "--config", file.c_str(), "--output-dir", "x", "--threads", "1"});
  CHECK(f.output_dir == "x");
  CHECK(f.threads == 1);
  ::unsetenv("YDL_OUTPUT_DIR");
  ::unsetenv("YDL_THREADS");
}

TEST_CASE("checksums and number formatting") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) CHECK(std::stod(format_double(x)) == x);
  YoungDiagram p{{5, 3, 3, 1}};
  CHECK(diagram_from_json(diagram_to_json(p)) == p);
  CHECK_THROWS_AS(diagram_from_json(nlohmann::json::parse("[1, 3]")), ConfigError);
}

TEST_CASE("report emission") {
  int code = -1;
  std::string one = emit_report({{"claim", "1", "1", "exact", true}}, code);
  CHECK(one.find("PASS 1/1") != std::string::npos);
  CHECK(code == 0);
  std::string mixed = emit_report({{"a", "1", "1", "exact", true}, {"b", "1", "2", "exact", false}}, code);
  CHECK(mixed.find("PASS 1/2") != std::string::npos);
  CHECK(code == 1);
  CHECK_THROWS_AS(emit_report({}, code), ConfigError);
}

TEST_CASE("verify-rotation and verify-stationary pass") {
  fs::path dir = scratch("verify");
  std::string text;
  CHECK(run({"verify-rotation", "--stat", "u", "--N", "5", "--M", "1000", "--output-dir", (dir / "rot").c_str()}, &text) == 0);
  CHECK(text.find("PASS") != std::string::npos);
  CHECK(run({"verify-stationary", "--output-dir", (dir / "st").c_str()}, &text) == 0);
}

TEST_CASE("fluct-static with zero tolerance exits 1") {
  fs::path dir = scratch("fail");
  CHECK(run({"fluct-static", "--stat", "ru", "--N", "20", "--M", "200", "--tolerance", "0", "--output-dir",
             dir.c_str()}) == 1);
}

TEST_CASE("manifest lists every emitted file with its checksum, and reruns are identical") {
  fs::path a = scratch("det-a"), b = scratch("det-b");
  std::vector<const char*> base{"simulate", "--stat", "ru", "--N", "15", "--M", "3", "--t-end", "0.05", "--seed", "9"};
  auto with_dir = [&](const fs::path& d) {
    auto v = base;
    v.push_back("--output-dir");
    v.push_back(d.c_str());
    return v;
  };
  CHECK(run(with_dir(a)) == 0);
  CHECK(run(with_dir(b)) == 0);
  auto ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
  REQUIRE(ma["files"].size() >= 2);
  CHECK(ma["files"].size() == mb["files"].size());
  for (std::size_t k = 0; k < ma["files"].size(); ++k) {
    std::string name = ma["files"][k]["path"];
    CHECK(sha256_file((a / fs::path(name).filename()).string()) == ma["files"][k]["sha256"].get<std::string>());
    CHECK(ma["files"][k]["sha256"] == mb["files"][k]["sha256"]);
  }
  CHECK(ma["jump_count"] == mb["jump_count"]);
  CHECK(ma["worker_seeds"] == mb["worker_seeds"]);
  CHECK(ma["seed_derivation"].get<std::string>().find("splitmix64") != std::string::npos);
}

TEST_CASE("report aggregates earlier runs") {
  fs::path dir = scratch("agg");
  CHECK(run({"verify-poincare", "--stat", "ru", "--output-dir", dir.c_str()}) == 0);
  std::string text;
  CHECK(run({"report", "--output-dir", dir.c_str()}, &text) == 0);
  CHECK(text.find("PASS") != std::string::npos);
}

}
