#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fmm/error.hpp"
#include "fmm/experiment.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fmm_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p, std::ios::binary);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

fmm::ErrorKind kind_of(const json& cfg) {
  try {
    fmm::resolve_config(cfg);
  } catch (const fmm::Error& e) {
    return e.kind();
  }
  FAIL("config accepted");
  return fmm::ErrorKind::InvalidSpec;
}

}  // namespace

TEST_CASE("defaults resolve and round-trip the model") {
  const json cfg = fmm::resolve_config(json::object());
  CHECK(cfg == fmm::default_config());
  const auto spec = fmm::model_from_json(cfg["model"]);
  CHECK(fmm::model_to_json(spec) == cfg["model"]);
}

TEST_CASE("unknown and mistyped keys are schema violations") {
  CHECK(kind_of({{"bogus", 1}}) == fmm::ErrorKind::SchemaViolation);
  CHECK(kind_of({{"moments", {{"energy", 1.0}, {"typo", 2}}}}) == fmm::ErrorKind::SchemaViolation);
  CHECK(kind_of({{"model", {{"coupling", {{"type", "uniform"}, {"min", 0}, {"max", 1}, {"x", 0}}}}}}) ==
        fmm::ErrorKind::SchemaViolation);
  CHECK(kind_of({{"workers", "two"}}) == fmm::ErrorKind::SchemaViolation);
  CHECK(kind_of({{"workers", 0}}) == fmm::ErrorKind::SchemaViolation);
  CHECK(kind_of({{"schema_version", 7}}) == fmm::ErrorKind::SchemaViolation);
  CHECK(kind_of({{"model", {{"background", {0.0, 0.0}}}}}) == fmm::ErrorKind::InvalidSpec);

  const json bad_window = {{"moments", {{"fit_window", "all"}, {"n_realizations", 20}}}};
  CHECK_THROWS_AS(fmm::run_experiment("moments", bad_window, scratch("window")), fmm::Error);
  CHECK_THROWS_AS(fmm::run_experiment("nonsense", json::object(), scratch("nonsense")), fmm::Error);
}

TEST_CASE("piecewise couplings parse") {
  const json m = {{"flavor", "discrete"},
                  {"subcells_per_unit", 1},
                  {"background", {0.0}},
                  {"single_site", {1.0}},
                  {"coupling", {{"type", "piecewise"}, {"breakpoints", {0.0, 1.0, 3.0}}, {"densities", {0.5, 0.25}}}}};
  const auto spec = fmm::model_from_json(m);
  CHECK(spec.coupling.min() == 0.0);
  CHECK(spec.coupling.max() == 3.0);
  CHECK(fmm::model_to_json(spec) == m);
}

TEST_CASE("selftest on the default config passes") {
  const auto dir = scratch("selftest");
  const auto res = fmm::run_experiment("selftest", json::object(), dir);
  CHECK(res.manifest["summary"]["failed_suites"] == 0);
  const auto rows = lines(dir / "selftest.csv");
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == "suite,checks,failures,status");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].ends_with(",0,pass"));
}

TEST_CASE("lyapunov writes one row per energy") {
  const auto dir = scratch("lyapunov");
  const json cfg = {{"lyapunov", {{"energies", {-0.5, 1.0, 2.5}}, {"steps", 2000}}}, {"output_name", "gamma"}};
  const auto res = fmm::run_experiment("lyapunov", cfg, dir);
  const auto rows = lines(dir / "gamma.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "E,gamma,stderr,steps");
  CHECK(rows[1].starts_with("-0.5,"));
  CHECK(rows[3].ends_with(",2000"));
  CHECK(fs::exists(dir / "gamma.manifest.json"));
  const json manifest = json::parse(slurp(dir / "gamma.manifest.json"));
  CHECK(manifest["subcommand"] == "lyapunov");
  CHECK(manifest["schema_version"] == fmm::kSchemaVersion);
  CHECK(manifest["config"]["lyapunov"]["steps"] == 2000);
  CHECK(manifest["outputs"] == json::array({"gamma.csv"}));

  const json grid = {{"lyapunov", {{"energies", {{"from", 0.0}, {"to", 1.0}, {"points", 5}}}, {"steps", 1000}}}};
  fmm::run_experiment("lyapunov", grid, dir);
  CHECK(lines(dir / "lyapunov.csv").size() == 6);
}

TEST_CASE("moments CSV is byte-identical across worker counts") {
  json cfg = {{"model", {{"flavor", "discrete"}, {"coupling", {{"type", "uniform"}, {"min", 0.0}, {"max", 2.0}}}}},
              {"moments", {{"volume", {0, 60}}, {"energy", 0.5}, {"anchor", 20}, {"n_realizations", 400}}},
              {"master_seed", 99}};
  const auto a = scratch("workers1"), b = scratch("workers3");
  cfg["workers"] = 1;
  fmm::run_experiment("moments", cfg, a);
  cfg["workers"] = 3;
  fmm::run_experiment("moments", cfg, b);
  CHECK(slurp(a / "moments.csv") == slurp(b / "moments.csv"));
  CHECK(slurp(a / "moments.fit.csv") == slurp(b / "moments.fit.csv"));
  CHECK(lines(a / "moments.csv")[0] == "distance,y,mean,stderr");

  cfg["master_seed"] = 100;
  fmm::run_experiment("moments", cfg, b);
  CHECK(slurp(a / "moments.csv") != slurp(b / "moments.csv"));
}

TEST_CASE("apriori and floquet reject the wrong flavor") {
  try {
    fmm::run_experiment("apriori", json::object(), scratch("apriori"));
    FAIL("no error");
  } catch (const fmm::Error& e) {
    CHECK(e.kind() == fmm::ErrorKind::FlavorMismatch);
  }
  const json lattice = {{"model", {{"flavor", "discrete"}}}};
  try {
    fmm::run_experiment("floquet", lattice, scratch("floquet"));
    FAIL("no error");
  } catch (const fmm::Error& e) {
    CHECK(e.kind() == fmm::ErrorKind::FlavorMismatch);
  }
}

TEST_CASE("green-probe cross-checks the discrete paths") {
  const auto dir = scratch("probe");
  const json cfg = {{"model", {{"flavor", "discrete"}}}, {"green_probe", {{"energy", 0.3}}}};
  const auto res = fmm::run_experiment("green-probe", cfg, dir);
  CHECK(res.manifest["summary"]["max_rel_diff"].get<double>() < 1e-8);
  CHECK(lines(dir / "green-probe.csv").size() == 4);
}

TEST_CASE("format_double is round-trip exact") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23}) CHECK(std::stod(fmm::format_double(v)) == v);
}
