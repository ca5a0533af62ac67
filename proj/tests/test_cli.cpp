#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "magloop/commands.hpp"
#include "magloop/config.hpp"
#include "magloop/errors.hpp"
#include "magloop/records.hpp"

using namespace magloop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("magloop_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    RunConfig::parse(text, "t.cfg");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesValuesAndLists) {
  const auto cfg = RunConfig::parse("schema = 1\npreset = bump-cylinder  # comment\nk = 0.5, 1\nwinding = 1,2,3\n"
                                    "find.scan_seeds = true\n");
  EXPECT_EQ(cfg.get_doubles("k", {}), (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(cfg.get_ints("winding", {}), (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(cfg.get_bool("find.scan_seeds", false));
  EXPECT_EQ(cfg.get_int("N", 32), 32);
  EXPECT_EQ(cfg.system().description(), bump_cylinder().description());
}

TEST(Config, ErrorsNameLineAndKey) {
  EXPECT_NE(config_error("schema = 1\npreset = flat-cylinder\ntolerance = 3\n").find("t.cfg:3"), std::string::npos);
  EXPECT_NE(config_error("schema = 1\npreset = flat-cylinder\ntolerance = 3\n").find("unknown key 'tolerance'"),
            std::string::npos);
  EXPECT_NE(config_error("schema = 1\npreset = flat-cylinder\nk = 1\nk = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(config_error("preset = flat-cylinder\n").find("schema"), std::string::npos);
  EXPECT_NE(config_error("schema = 2\npreset = flat-cylinder\n").find("t.cfg:1"), std::string::npos);
  EXPECT_NE(config_error("schema = 1\n").find("no system"), std::string::npos);
  EXPECT_NE(config_error("schema = 1\npreset = flat-cylinder\ng11 = 1\n").find("not both"), std::string::npos);
  EXPECT_NE(config_error("schema = 1\ng11 = 1\n").find("g12"), std::string::npos);
  EXPECT_NE(config_error("schema = 1\npreset = flat-cylinder\njunk line\n").find("t.cfg:3"), std::string::npos);

  const auto cfg = RunConfig::parse("schema = 1\npreset = flat-cylinder\nk = abc\nmane.tol = -1\n", "t.cfg");
  try {
    cfg.get_double("k", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("t.cfg:3: key 'k'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(cfg.get_positive("mane.tol", 1), Error);
}

TEST(Config, ExpressionSystemErrorsAreConfigErrors) {
  const auto cfg = RunConfig::parse("schema = 1\ng11 = 1\ng12 = 0\ng22 = 1 +\ntheta1 = 0\ntheta2 = x\n", "e.cfg");
  try {
    cfg.system();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  const auto bad = RunConfig::parse("schema = 1\npreset = torus\n", "p.cfg");
  EXPECT_THROW(bad.system(), Error);
}

TEST(Config, HashIgnoresFormatting) {
  const auto a = RunConfig::parse("schema = 1\npreset = flat-cylinder\nk = 1\n");
  const auto b = RunConfig::parse("# x\nk=1\n\n   preset   =   flat-cylinder\nschema=1\n");
  const auto c = RunConfig::parse("schema = 1\npreset = flat-cylinder\nk = 2\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(hex64(a.hash()).size(), 16u);
}

TEST(Records, OrbitRoundTrip) {
  const auto sys = bump_cylinder();
  SolveOptions o;
  const auto found = find_orbit(sys, 1.0, -1, o);
  ASSERT_TRUE(found.found());
  IndexOptions io;
  io.n_max = 4;
  const OrbitRecord rec = make_orbit_record(sys, 1.0, *found.best, 1, true, io);
  EXPECT_TRUE(validate_record(rec).empty());
  const json j = orbit_to_json(rec);
  const OrbitRecord back = orbit_from_json(json::parse(j.dump()));
  EXPECT_EQ(orbit_to_json(back).dump(), j.dump());
  EXPECT_TRUE(validate_record(back).empty());
  EXPECT_EQ(back.loop.packed(), rec.loop.packed());
  ASSERT_TRUE(back.index.has_value());
  EXPECT_EQ(back.index->table.size(), 4u);

  OrbitRecord broken = back;
  broken.penalty_active = true;
  broken.system_hash = "0";
  EXPECT_EQ(validate_record(broken).size(), 2u);
  json missing = j;
  missing.erase("loop");
  EXPECT_THROW(orbit_from_json(missing), Error);
}

TEST(Records, DatabaseLinesCarryProvenance) {
  const auto dir = scratch("db");
  ResultsDB db((dir / "r.jsonl").string());
  db.append({{"type", "x"}, {"config_hash", "abc"}, {"version", kToolkitVersion}});
  db.append({{"type", "y"}});
  const auto p = db.payloads();
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0]["config_hash"], "abc");
  std::ifstream in(dir / "r.jsonl");
  std::string line;
  std::getline(in, line);
  const json full = json::parse(line);
  EXPECT_TRUE(full["meta"].contains("timestamp"));
  std::ofstream(dir / "bad.jsonl") << "{not json\n";
  EXPECT_THROW(ResultsDB((dir / "bad.jsonl").string()).payloads(), Error);
}

TEST(Commands, FindFlatWindingsAndReport) {
  const auto dir = scratch("find");
  const auto cfg = RunConfig::parse("schema = 1\npreset = flat-cylinder\nk = 0.5\nwinding = 1, 2, 3\nindex.n_max = 3\n");
  RunOptions ro;
  ro.out_dir = dir.string();
  const auto r = run_command("find", cfg, ro);
  ASSERT_EQ(r.exit_code, kExitOk);
  ASSERT_EQ(r.payloads.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const auto rec = orbit_from_json(r.payloads[i]["record"]);
    EXPECT_NEAR(rec.action, i + 1, 1e-9);
    EXPECT_TRUE(rec.checks.all_pass());
    EXPECT_TRUE(fs::exists(dir / ("orbit_k0.5_w" + std::to_string(i + 1) + ".csv")));
  }
  const auto rep = RunConfig::parse("schema = 1\npreset = flat-cylinder\nreport.input = " +
                                    (dir / "results.jsonl").string() + "\n");
  const auto rr = run_command("report", rep, ro);
  EXPECT_EQ(rr.exit_code, kExitOk);
  EXPECT_EQ(rr.payloads[0]["orbit_records"], 3);
  EXPECT_EQ(rr.payloads[0]["invalid"], 0);

  const auto idx = RunConfig::parse("schema = 1\npreset = flat-cylinder\nindex.n_max = 2\nindex.input = " +
                                    (dir / "results.jsonl").string() + "\n");
  const auto ri = run_command("index", idx, ro);
  EXPECT_EQ(ri.exit_code, kExitOk);
  EXPECT_EQ(ri.payloads.size(), 3u);
}

TEST(Commands, AppendixFindExitsNoOrbit) {
  const auto dir = scratch("noorbit");
  const auto cfg = RunConfig::parse("schema = 1\npreset = appendix-cylinder\nk = 1\nwinding = 1\nsigma = 2, 4\n");
  RunOptions ro;
  ro.out_dir = dir.string();
  const auto r = run_command("find", cfg, ro);
  EXPECT_EQ(r.exit_code, kExitNoOrbit);
  ASSERT_EQ(r.payloads.size(), 1u);
  EXPECT_EQ(r.payloads[0]["type"], "no_orbit");
}

TEST(Commands, ExitCodes) {
  RunOptions ro;
  ro.out_dir = scratch("codes").string();
  const auto no_k = RunConfig::parse("schema = 1\npreset = flat-cylinder\n");
  EXPECT_EQ(run_command("find", no_k, ro).exit_code, kExitConfig);
  EXPECT_EQ(run_command("bogus", no_k, ro).exit_code, kExitConfig);
  const auto sub = RunConfig::parse("schema = 1\npreset = flat-cylinder\nk = 1\nfind.c_u = 2\n");
  EXPECT_EQ(run_command("find", sub, ro).exit_code, kExitNumerical);
  EXPECT_EQ(exit_code_for(ErrorKind::NoOrbitFound), kExitNoOrbit);
  EXPECT_EQ(exit_code_for(ErrorKind::StepFailure), kExitNumerical);
}

TEST(Commands, SimulateBumpMomentumColumn) {
  const auto dir = scratch("sim");
  const auto cfg = RunConfig::parse(
      "schema = 1\npreset = bump-cylinder\nsimulate.x = 0.2\nsimulate.vx = 0.5\nsimulate.vy = -1\n"
      "simulate.duration = 10\nsimulate.tol = 1e-12\n");
  RunOptions ro;
  ro.out_dir = dir.string();
  const auto r = run_command("simulate", cfg, ro);
  ASSERT_EQ(r.exit_code, kExitOk);
  std::ifstream in(dir / "trajectory.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,y,vx,vy,energy,p_y");
  double py0 = 0, worst = 0;
  bool first = true;
  while (std::getline(in, line)) {
    const double py = std::stod(line.substr(line.rfind(',') + 1));
    if (first) py0 = py, first = false;
    worst = std::max(worst, std::abs(py - py0));
  }
  EXPECT_LT(worst, 1e-8);
  EXPECT_LT(r.payloads[0]["energy_drift"].get<double>(), 1e-9);
}

TEST(Commands, PayloadsAreDeterministic) {
  const std::string text = "schema = 1\npreset = bump-cylinder\nk = 1\nwinding = -1\nindex.n_max = 3\n";
  const auto cfg = RunConfig::parse(text);
  RunOptions a, b;
  a.out_dir = scratch("det_a").string();
  b.out_dir = scratch("det_b").string();
  b.threads = 3;
  const auto ra = run_command("find", cfg, a);
  const auto rb = run_command("find", cfg, b);
  ASSERT_EQ(ra.payloads.size(), rb.payloads.size());
  for (std::size_t i = 0; i < ra.payloads.size(); ++i) EXPECT_EQ(ra.payloads[i].dump(), rb.payloads[i].dump());
  RunOptions c = a;
  c.out_dir = scratch("det_c").string();
  c.seed = 99;
  const auto rc = run_command("find", cfg, c);
  EXPECT_NE(rc.payloads[0]["seed"], ra.payloads[0]["seed"]);
}

TEST(Commands, ManeAndScanPersist) {
  const auto dir = scratch("mane");
  RunOptions ro;
  ro.out_dir = dir.string();
  const auto m = run_command("mane", RunConfig::parse("schema = 1\npreset = flat-cylinder\n"), ro);
  ASSERT_EQ(m.exit_code, kExitOk);
  ASSERT_EQ(m.payloads.size(), 2u);
  EXPECT_EQ(m.payloads[0]["kind"], "c");
  EXPECT_LE(m.payloads[0]["bracket"]["upper"].get<double>(), 1e-2);
  const auto s = run_command(
      "scan", RunConfig::parse("schema = 1\npreset = appendix-cylinder\nk = 1\nscan.n_x = 20\nscan.n_vx = 3\n"), ro);
  ASSERT_EQ(s.exit_code, kExitOk);
  EXPECT_EQ(s.payloads[0]["fixed_points"].size(), 0u);
  EXPECT_EQ(s.payloads[0]["seeds"], 60);
  EXPECT_EQ(ResultsDB((dir / "results.jsonl").string()).payloads().size(), 3u);
}
