#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "statns/archive.hpp"
#include "statns/commands.hpp"
#include "statns/config.hpp"
#include "statns/error.hpp"

using namespace statns;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "statns_unit" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "statns");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("snapshot round trip is bit exact") {
  const Grid g = build_grid(2, {1.0, 0.5}, {5, 4});
  FieldState s(g.cell_count());
  for (std::size_t c = 0; c < s.size(); ++c) {
    s.rho[c] = 1.0 / (c + 3.0);
    s.mom[c] = {std::sqrt(c + 0.1), -1e-300 * c};
  }
  const std::string bytes = encode_snapshot(g, 0.1 + 0.2, s);
  const Snapshot back = decode_snapshot(bytes);
  CHECK(back.state == s);
  CHECK(back.t == 0.1 + 0.2);
  CHECK(back.grid.nx() == 5);
  CHECK(back.grid.ny() == 4);
  CHECK(back.grid.extents[1] == 0.5);
  CHECK_THROWS(decode_snapshot(bytes.substr(0, bytes.size() - 8)));
}

TEST_CASE("presets validate and round trip through canonical json") {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset_config(name);
    CHECK_NOTHROW(c.validate());
    const std::string j = canonical_json(c);
    CHECK(canonical_json(parse_config(j)) == j);
  }
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("config errors name the field or position") {
  try {
    parse_config(R"({"preset": "equilibrium", "solver": {"mew": 1}})");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("solver.mew: unknown key") != std::string::npos);
  }
  try {
    parse_config("{\n  \"grid\": {\n    \"cells\": [32,, 1]\n  }\n}");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"solver": {"mu": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"cells": [3, 1]}})"), ConfigError);
  // Comments are allowed.
  const auto c = parse_config("{ // decaying run\n \"preset\": \"decaying\", \"seed\": 9 }");
  CHECK(c.seed == 9);
  CHECK(c.solver.lambda == 0.05);
}

TEST_CASE("tolerance profiles") {
  CHECK(tolerances("strict").energy < tolerances("default").energy);
  CHECK_THROWS_AS(tolerances("loose"), ConfigError);
}

TEST_CASE("archive manifest detects tampering") {
  const fs::path dir = scratch("archive");
  {
    ArchiveWriter w(dir);
    w.add("a.txt", "hello");
    w.add("sub/b.bin", std::string("\0\1\2", 3));
    w.finish("test", "{}", 0);
  }
  CHECK(check_archive(dir).ok);
  const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(m["files"].size() == 3);  // config.json, a.txt, sub/b.bin
  write(dir / "a.txt", "hellO");
  const auto chk = check_archive(dir);
  CHECK_FALSE(chk.ok);
  REQUIRE(chk.problems.size() == 1);
  CHECK(chk.problems[0].find("a.txt") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  std::string err;
  CHECK(cli({}, &err) == kExitUsage);
  CHECK(cli({"bogus"}) == kExitUsage);
  CHECK(cli({"simulate", "--preset", "nope", "--out", scratch("x").string()}) == kExitUsage);
  const fs::path cfg = scratch("cfg") / "bad.json";
  write(cfg, "{ \"solver\": { \"cfl\": 2 } }");
  CHECK(cli({"simulate", "--config", cfg.string(), "--out", scratch("y").string()}, &err) == kExitUsage);
  CHECK(err.find("cfl") != std::string::npos);
  CHECK(cli({"distance", "--out", scratch("z").string(), "/nonexistent/a", "/nonexistent/b"}) == kExitUsage);
}

TEST_CASE("equilibrium simulate writes a reproducible archive") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  REQUIRE(cli({"simulate", "--preset", "equilibrium", "--out", a.string(), "--workers", "1"}) == kExitOk);
  REQUIRE(cli({"simulate", "--preset", "equilibrium", "--out", b.string(), "--workers", "3"}) == kExitOk);
  CHECK(check_archive(a).ok);
  CHECK(archive_hashes(a) == archive_hashes(b));
  const auto m = nlohmann::json::parse(read_file(a / "manifest.json"));
  CHECK(m["exit_code"] == 0);
  CHECK(m["command"] == "simulate");
  const Snapshot first = read_snapshot(a / "snapshots" / "state_0000.bin");
  const ExperimentConfig c = preset_config("equilibrium");
  const Snapshot last = read_snapshot(a / "snapshots" / ("state_000" + std::to_string(c.output_times.size() - 1) + ".bin"));
  CHECK(first.state == last.state);
  // Residual columns of an equilibrium run are exactly zero.
  std::istringstream res(read_file(a / "residuals.csv"));
  std::string line;
  std::getline(res, line);
  int rows = 0;
  while (std::getline(res, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int k = 0; k < 3; ++k) std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) CHECK(std::stod(cell) == 0.0);
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("ensemble, distance and select end to end") {
  const fs::path cfg = scratch("e2e") / "c.json";
  write(cfg, R"({"preset": "equilibrium", "grid": {"cells": [16, 1]},
                 "initial": {"kind": "wave"}, "ensemble": {"atoms": 3},
                 "selection": {"dissipation_levels": [1, 3]}})");
  const fs::path ea = scratch("ens_a"), eb = scratch("ens_b"), d = scratch("dist"), s = scratch("sel");
  REQUIRE(cli({"ensemble", "--config", cfg.string(), "--out", ea.string(), "--seed", "1"}) == kExitOk);
  REQUIRE(cli({"ensemble", "--config", cfg.string(), "--out", eb.string(), "--seed", "2"}) == kExitOk);
  REQUIRE(cli({"distance", "--config", cfg.string(), "--out", d.string(), ea.string(), eb.string()}) == kExitOk);
  const auto dj = nlohmann::json::parse(read_file(d / "distance.json"));
  CHECK(dj["value"].get<double>() > 0.0);
  CHECK(dj["reverse_value"].get<double>() > 0.0);
  CHECK(dj["rows"] == 3);
  const fs::path ds = scratch("dist_self");
  REQUIRE(cli({"distance", "--config", cfg.string(), "--out", ds.string(), ea.string(), ea.string()}) == kExitOk);
  CHECK(std::abs(nlohmann::json::parse(read_file(ds / "distance.json"))["value"].get<double>()) <= 1e-14);

  REQUIRE(cli({"select", "--config", cfg.string(), "--out", s.string()}) == kExitOk);
  const auto sj = nlohmann::json::parse(read_file(s / "selection.json"));
  CHECK(sj.dump().find("dissipation=3") != std::string::npos);
}
