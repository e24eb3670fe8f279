#include "otcurve/runner.hpp"
#include "otcurve/spec_json.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace otcurve;
using nlohmann::json;
namespace fs = std::filesystem;
namespace tu = otcurve::testutil;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("otcurve_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json marginal_json(const DiscreteMarginal& mu, bool free_flag = false) {
  json pts = json::array();
  for (Index i = 0; i < mu.size(); ++i) {
    json row = json::array();
    for (Index k = 0; k < mu.dim(); ++k) row.push_back(mu.points(i, k));
    pts.push_back(row);
  }
  json out = {{"points", pts}, {"weights", std::vector<double>(
                                              mu.weights.data(), mu.weights.data() + mu.size())}};
  if (free_flag) out["free"] = true;
  return out;
}

json small_spec(uint64_t seed, double eta) {
  auto rng = tu::make_rng(seed);
  DiscreteMarginal mu = tu::random_marginal(rng, 3);
  DiscreteMarginal nu = tu::random_marginal(rng, 4);
  Vector c = tu::random_cost(rng, 12);
  return json{{"marginals", json::array({marginal_json(mu), marginal_json(nu)})},
              {"cost", {{"kind", "table"}, {"slope", std::vector<double>(c.data(), c.data() + 12)}}},
              {"constraints", {{"kind", "none"}}},
              {"eta", eta}};
}

fs::path write_spec(const fs::path& dir, const json& j) {
  fs::path p = dir / "spec.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST_CASE("compare subcommand writes a coherent report") {
  fs::path dir = fresh_dir("compare");
  json spec = small_spec(5001, 0.3);
  spec["reference"] = {{"value", 0.0}, {"entropy", 2.0}};
  RunConfig cfg;
  cfg.subcommand = "compare";
  cfg.input_path = write_spec(dir, spec).string();
  cfg.out_dir = (dir / "out").string();
  cfg.steps = 20;
  cfg.snapshots = 2;
  REQUIRE(run(cfg) == 0);

  json report = json::parse(slurp(dir / "out" / "report.json"));
  REQUIRE(report.contains("ode"));
  REQUIRE(report.contains("sinkhorn"));
  double vo = report["ode"]["value"], vs = report["sinkhorn"]["value"];
  CHECK(std::abs(vo - vs) <= 5e-3 * std::max(1.0, std::abs(vs)));
  CHECK(report["bracket"]["lower"] == 0.0);
  CHECK(report["bracket"]["upper"] == doctest::Approx(0.6));
  CHECK(fs::exists(dir / "out" / "curve.csv"));
  CHECK(fs::exists(dir / "out" / "coupling_0.csv"));
}

TEST_CASE("fixed config gives bitwise-identical CSV output") {
  fs::path dir = fresh_dir("determinism");
  json spec = small_spec(5002, 0.4);
  fs::path sp = write_spec(dir, spec);
  for (const char* sub : {"a", "b"}) {
    RunConfig cfg;
    cfg.subcommand = "curve";
    cfg.input_path = sp.string();
    cfg.out_dir = (dir / sub).string();
    cfg.steps = 12;
    cfg.snapshots = 3;
    REQUIRE(run(cfg) == 0);
  }
  CHECK(slurp(dir / "a" / "curve.csv") == slurp(dir / "b" / "curve.csv"));
  CHECK(slurp(dir / "a" / "coupling_2.csv") == slurp(dir / "b" / "coupling_2.csv"));
}

TEST_CASE("schema violations exit with code 2") {
  fs::path dir = fresh_dir("schema");
  RunConfig cfg;
  cfg.subcommand = "solve-ode";
  cfg.out_dir = (dir / "out").string();

  // missing input
  CHECK(run(cfg) == 2);

  // unparseable file
  fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  cfg.input_path = bad.string();
  CHECK(run(cfg) == 2);

  // missing required field
  json spec = small_spec(5003, 0.4);
  spec.erase("cost");
  cfg.input_path = write_spec(dir, spec).string();
  CHECK(run(cfg) == 2);

  // malformed weights
  json spec2 = small_spec(5004, 0.4);
  spec2["marginals"][0]["weights"] = {0.5, 0.6, 0.6};
  fs::path sp2 = dir / "spec2.json";
  std::ofstream(sp2) << spec2.dump();
  cfg.input_path = sp2.string();
  CHECK(run(cfg) == 2);
}

TEST_CASE("solver failures exit with code 3") {
  fs::path dir = fresh_dir("solverfail");
  // infeasible martingale: means differ
  json spec = {{"marginals",
                json::array({json{{"points", {{0.2}}}, {"weights", {1.0}}},
                             json{{"points", {{-1.0}, {1.0}}}, {"weights", {0.5, 0.5}}}})},
               {"cost", {{"kind", "expr"}, {"name", "spence_mirrlees"}}},
               {"constraints", {{"kind", "martingale"}}},
               {"eta", 0.1}};
  RunConfig cfg;
  cfg.subcommand = "solve-sinkhorn";
  cfg.input_path = write_spec(dir, spec).string();
  cfg.out_dir = (dir / "out").string();
  CHECK(run(cfg) == 3);
}

TEST_CASE("curve primal values recompute from the coupling files") {
  fs::path dir = fresh_dir("recompute");
  json spec = small_spec(5005, 0.35);
  RunConfig cfg;
  cfg.subcommand = "curve";
  cfg.input_path = write_spec(dir, spec).string();
  cfg.out_dir = (dir / "out").string();
  cfg.steps = 4;
  cfg.snapshots = 3;  // sample indices 0, 2, 4
  REQUIRE(run(cfg) == 0);

  LoadedSpec loaded = load_problem_spec(cfg.input_path);
  auto curve = read_csv(dir / "out" / "curve.csv");
  REQUIRE(curve.size() == 6);  // header + 5 samples
  const int sample_of_snapshot[3] = {0, 2, 4};
  for (int snap = 0; snap < 3; ++snap) {
    auto rows = read_csv(dir / "out" / ("coupling_" + std::to_string(snap) + ".csv"));
    REQUIRE(rows.size() == size_t(loaded.problem.m()) + 1);
    Vector gamma(loaded.problem.m());
    for (Index ell = 0; ell < loaded.problem.m(); ++ell)
      gamma[ell] = std::stod(rows[ell + 1].back());
    const auto& crow = curve[sample_of_snapshot[snap] + 1];
    double eps = std::stod(crow[0]);
    double primal_written = std::stod(crow[2]);
    double recomputed = loaded.problem.primal_value(gamma, eps);
    CHECK(std::abs(primal_written - recomputed) <= 1e-10 * std::max(1.0, std::abs(recomputed)));
  }
}

TEST_CASE("derivs subcommand reports matching closed-form and FD values") {
  fs::path dir = fresh_dir("derivs");
  RunConfig cfg;
  cfg.subcommand = "derivs";
  cfg.out_dir = (dir / "out").string();
  cfg.seed = 42;
  REQUIRE(run(cfg) == 0);
  json dj = json::parse(slurp(dir / "out" / "derivs.json"));
  REQUIRE(dj["reports"].size() == 2);
  CHECK(dj["reports"][0]["method"] == "closed_form_zero");
  CHECK(dj["reports"][1]["method"] == "finite_difference");
  CHECK(dj["c_second_rel_err"].get<double>() <= 1e-2);
}

TEST_CASE("the installed binary runs end to end") {
  fs::path dir = fresh_dir("binary");
  json spec = small_spec(5006, 0.5);
  fs::path sp = write_spec(dir, spec);
  std::string cmd = std::string(OTCURVE_CLI_PATH) + " compare --input " + sp.string() + " --out " +
                    (dir / "out").string() + " --steps 8 --snapshots 2 > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));

  std::string badcmd = std::string(OTCURVE_CLI_PATH) + " compare --input /nonexistent.json" +
                       " --out " + (dir / "out2").string() + " > /dev/null 2>&1";
  int rc = std::system(badcmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}
