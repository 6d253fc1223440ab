#include "doctest.h"

#include "orbitshade/cli.hpp"
#include "orbitshade/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace orbitshade;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orbitshade_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json load(const fs::path& p) { return Json::parse(slurp(p)); }

}  // namespace

TEST_CASE("singularities subcommand") {
  auto dir = scratch("sing");
  auto r = run({"singularities", "--field", "lorenz", "--out", dir.string()});
  REQUIRE(r.code == 0);
  auto j = load(dir / "singularities.json");
  CHECK(j["version"] == kToolVersion);
  CHECK(j["seed"] == 0);
  CHECK(j["config_hash"].get<std::string>().size() == 16);
  const auto& s = j["singularities"];
  REQUIRE(s.size() == 3);
  int origin_hits = 0;
  for (const auto& e : s) {
    if (json_vec(e["location"]).norm() < 1e-9) {
      ++origin_hits;
      CHECK(e["certificate"]["unstable_index"] == 1);
      CHECK(e["certificate"]["index_one"] == true);
    }
  }
  CHECK(origin_hits == 1);

  auto d = scratch("sing_duffing");
  REQUIRE(run({"singularities", "--field", "duffing-saddle", "--out", d.string()}).code == 0);
  auto dj = load(d / "singularities.json")["singularities"];
  REQUIRE(dj.size() == 2);
  for (const auto& e : dj) {
    const Vec x = json_vec(e["location"]);
    if (x.norm() < 1e-9) CHECK(e["certificate"]["category"] == "saddle");
    else {
      CHECK(std::abs(x[0] - 1.0) < 1e-9);
      CHECK(e["certificate"]["hyperbolic"] == false);
    }
  }
}

TEST_CASE("usage errors exit 2 and name the problem") {
  auto r = run({"singularities", "--field", "/no/such/dir/field.txt"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("/no/such/dir/field.txt") != std::string::npos);
  CHECK(run({"singularities"}).code == kExitUsage);
  CHECK(run({"singularities", "--field", "duffing-saddle", "--bogus"}).code == kExitUsage);
  CHECK(run({"--field", "duffing-saddle"}).code == kExitUsage);
  auto dir = scratch("usage");
  CHECK(run({"sweep", "--field", "duffing-saddle", "--builder", "loop", "--sigma", "0,0", "--x0", "0.0009,0",
             "--values", "", "--out", dir.string()})
            .code == kExitUsage);
  CHECK(run({"--config", (dir / "missing.ini").string(), "singularities"}).code == kExitUsage);
  CHECK(run({"shadow", "--field", "duffing-saddle", "--builder", "slice", "--x0", "0.3", "--durations", "1",
             "--epsilon", "0.1", "--out", dir.string()})
            .code == kExitUsage);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("numerical failure exits 3") {
  auto dir = scratch("blowup");
  std::ofstream(dir / "blow.field") << "x' = x^2\ny' = -y\n";
  auto r = run({"shadow", "--field", (dir / "blow.field").string(), "--builder", "slice", "--x0", "1,1",
                "--durations", "2", "--epsilon", "0.1", "--out", dir.string()});
  CHECK(r.code == kExitNumerical);
}

TEST_CASE("loops subcommand") {
  auto dir = scratch("loops");
  REQUIRE(run({"loops", "--field", "duffing-saddle", "--sigma", "0,0", "--radius", "0.1", "--out", dir.string()}).code ==
          0);
  auto rep = load(dir / "loops.json")["saddles"][0]["report"];
  CHECK(rep["loops_found"] == 1);
  CHECK(rep["max_crossings"] == 2);
  CHECK(rep["branch_count"] == 2);
  CHECK(fs::exists(dir / "loop_s0_b1.csv"));

  auto lz = scratch("loops_lorenz");
  REQUIRE(run({"loops", "--field", "lorenz", "--sigma", "0,0,0", "--out", lz.string()}).code == 0);
  CHECK(load(lz / "loops.json")["saddles"][0]["report"]["loops_found"] == 0);

  auto sp = scratch("loops_sphere");
  REQUIRE(run({"loops", "--field", "sphere-morse-smale", "--out", sp.string()}).code == 0);
  CHECK(load(sp / "loops.json")["saddles"].empty());
}

TEST_CASE("shadow subcommand outcomes") {
  auto self = scratch("shadow_self");
  REQUIRE(run({"shadow", "--field", "saddle-with-return", "--builder", "slice", "--x0", "0.2,0.5", "--durations",
               "1,0.7,1.2", "--epsilon", "1e-8", "--out", self.string()})
              .code == 0);
  auto sj = load(self / "shadow.json")["result"];
  CHECK(sj["status"] == "found");
  CHECK(sj["warp_knots"].size() >= 2);

  // a four-fold loop chain cannot be followed within a quarter of the box
  auto loop = scratch("shadow_loop");
  auto r = run({"shadow", "--field", "duffing-saddle", "--builder", "loop", "--sigma", "0,0", "--x0", "0.0009,0",
                "--N", "4", "--box-radius", "0.1", "--epsilon", "0.025", "--budget", "10", "--out", loop.string()});
  REQUIRE(r.code == 0);
  CHECK(load(loop / "shadow.json")["result"]["status"] == "not-found-within-budget");

  auto sphere = scratch("shadow_sphere");
  REQUIRE(run({"shadow", "--field", "sphere-morse-smale", "--builder", "kicked", "--x0", "0.6,0,0.8", "--segments",
               "30", "--epsilon", "0.1", "--seed", "4", "--out", sphere.string()})
              .code == 0);
  CHECK(load(sphere / "shadow.json")["result"]["status"] == "found");
}

TEST_CASE("config file sections, determinism and the config hash") {
  auto dir = scratch("config");
  std::ofstream(dir / "run.ini") << "field = sphere-morse-smale\nseed = 3\nbudget = 40\n\n[shadow]\nbuilder = kicked\n"
                                    "x0 = 0.6,0,0.8\nsegments = 20\nepsilon = 0.1\n";
  const auto a = dir / "a", b = dir / "b";
  REQUIRE(run({"--config", (dir / "run.ini").string(), "shadow", "--out", a.string()}).code == 0);
  REQUIRE(run({"--config", (dir / "run.ini").string(), "shadow", "--out", b.string()}).code == 0);
  CHECK(slurp(a / "shadow.json") == slurp(b / "shadow.json"));
  auto ja = load(a / "shadow.json");
  CHECK(ja["seed"] == 3);
  CHECK(ja["result"]["budget_spent"].get<int>() <= 40);

  const auto c = dir / "c";
  REQUIRE(run({"--config", (dir / "run.ini").string(), "--seed", "4", "shadow", "--out", c.string()}).code == 0);
  CHECK(load(c / "shadow.json")["config_hash"] != ja["config_hash"]);
}

TEST_CASE("pseudo build, dump and validate round trip") {
  auto dir = scratch("pseudo");
  REQUIRE(run({"pseudo", "--field", "duffing-saddle", "--builder", "loop", "--sigma", "0,0", "--x0", "0.0009,0",
               "--N", "2", "--out", dir.string()})
              .code == 0);
  std::ifstream in(dir / "chain.jsonl");
  const PseudoOrbit po = read_pseudo_orbit_jsonl(in);
  CHECK(po.size() == 5);
  CHECK(po.tail_before == 1);
  REQUIRE(po.tail_point_before);
  REQUIRE(run({"pseudo", "--field", "duffing-saddle", "--validate", (dir / "chain.jsonl").string(), "--out",
               dir.string()})
              .code == 0);
  CHECK(load(dir / "validation.json")["valid"] == true);
}

TEST_CASE("sweep and chainrec tables") {
  auto dir = scratch("sweep");
  REQUIRE(run({"sweep", "--field", "sphere-morse-smale", "--builder", "kicked", "--x0", "0.6,0,0.8", "--segments", "10",
               "--over", "delta", "--values", "1e-2,1e-3,1e-4", "--budget", "20", "--out", dir.string()})
              .code == 0);
  std::istringstream csv(slurp(dir / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("# orbitshade", 0) == 0);
  std::getline(csv, line);  // column names
  std::vector<double> est;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string over, value, e;
    std::getline(ls, over, ',');
    std::getline(ls, value, ',');
    std::getline(ls, e, ',');
    est.push_back(std::stod(e));
  }
  REQUIRE(est.size() == 3);
  CHECK(est[2] < est[0]);

  auto cr = scratch("chainrec");
  REQUIRE(run({"chainrec", "--field", "sphere-morse-smale", "--box-size", "0.1", "--out", cr.string()}).code == 0);
  CHECK(load(cr / "chainrec.json")["classes"] == 2);
  CHECK(slurp(cr / "chainrec.csv").find("box_id,class_id") != std::string::npos);
}
