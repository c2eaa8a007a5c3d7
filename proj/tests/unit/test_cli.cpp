#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "scanflow/scan_io.hpp"
#include "scanflow/stokes.hpp"
#include "scanflow_app/commands.hpp"

using namespace scanflow;
using namespace scanflow::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "scanflow_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(SCANFLOW_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    RunConfig::parse(text, "run.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = RunConfig::parse("[stokes]\nmu = 2.5\nproblem = disk\n[spline]\ncells = 4, 6\n");
  CHECK(c.get_double("stokes", "mu") == 2.5);
  CHECK(c.get_string("stokes", "problem") == "disk");
  CHECK(c.get_list("spline", "cells") == std::vector<double>{4, 6});
  CHECK(c.get_int("spline", "degree", 3) == 3);
  CHECK_FALSE(c.has("stokes", "beta"));
}

TEST_CASE("config errors carry the line") {
  CHECK(error_of("[stokes]\nmu = 1\nviscosity = 2\n").find("run.ini:3") != std::string::npos);
  CHECK(error_of("[stokes]\nmu = 1\nviscosity = 2\n").find("viscosity") != std::string::npos);
  CHECK(error_of("[solver]\nx = 1\n").find("unknown section") != std::string::npos);
  CHECK(error_of("[stokes]\nmu = 1\nmu = 2\n").find("run.ini:3") != std::string::npos);
  CHECK(error_of("[stokes]\nmu 1\n").find("run.ini:2") != std::string::npos);

  const RunConfig c = RunConfig::parse("[stokes]\n\nmu = fast\n", "run.ini");
  CHECK_THROWS_WITH_AS(c.get_double("stokes", "mu"), doctest::Contains("run.ini:3"), ConfigError);
  CHECK_THROWS_WITH_AS(c.require({"stokes.problem"}), doctest::Contains("problem"), ConfigError);
  RunConfig d;
  CHECK_THROWS_AS(d.set("scan", "colour", "1"), ConfigError);
}

TEST_CASE("exit status classes") {
  CHECK(exit_code(ConfigError("x")) == 2);
  CHECK(exit_code(ScanError("x")) == 2);
  CHECK(exit_code(SolverError("x")) == 3);
  CHECK(exit_code(DomainError("x")) == 3);
}

TEST_CASE("least-squares slope and fit window") {
  const std::vector<double> x{1, 10, 100, 1000}, y{1, 0.1, 0.01, 0.001};
  CHECK(loglog_slope(x, y, 0, 3) == doctest::Approx(-1.0));
  std::vector<AdaptStep> t(8);
  CHECK(fit_window(t, 4) == std::pair<int, int>{4, 7});
  t[5].capped = 2;
  CHECK(fit_window(t, 4) == std::pair<int, int>{2, 5});
  CHECK(fit_window(t, 10) == std::pair<int, int>{0, 5});
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("solve --config " + (dir / "missing.ini").string()) == 2);
  std::ofstream(dir / "bad.ini") << "[stokes]\nproblem = disk\nviscosity = 1\n";
  CHECK(run("solve --config " + (dir / "bad.ini").string()) == 2);
  std::ofstream(dir / "noproblem.ini") << "[stokes]\nmu = 1\n";
  CHECK(run("solve --config " + (dir / "noproblem.ini").string()) == 2);
}

TEST_CASE("segment a constant scan") {
  const fs::path dir = scratch("constant");
  write_pgm(GrayscaleGrid::from_values({16, 16}, std::vector<double>(256, 0.6)), dir / "flat.pgm");
  std::ofstream(dir / "run.ini") << "[scan]\ninput = flat.pgm\n[spline]\ncells = 4,4\n";
  Context ctx;
  ctx.config = RunConfig::load(dir / "run.ini");
  ctx.out_dir = dir / "out";
  const SegmentSummary s = cmd_segment(ctx);
  CHECK(std::abs(s.field_mean - s.voxel_mean) <= 1e-14);
  CHECK(fs::exists(dir / "out" / "segment.csv"));
}

TEST_CASE("segment the checked-in scans") {
  const fs::path dir = scratch("scans");
  const std::string configs = SCANFLOW_CONFIGS;
  CHECK(run("segment --config " + configs + "/segment_disk.ini --out " + (dir / "disk").string()) == 0);
  CHECK(slurp(dir / "disk" / "segment.csv").find("repaired_elements,0\n") != std::string::npos);
  CHECK(fs::exists(dir / "disk" / "level_set.vtk"));
  CHECK(run("segment --config " + configs + "/segment_bars.ini --out " + (dir / "bars").string()) == 0);
  Context ctx;
  ctx.config = RunConfig::load(configs + "/segment_bars.ini");
  ctx.out_dir = dir / "bars2";
  const SegmentSummary s = cmd_segment(ctx);
  CHECK(s.repairs >= 1);
  CHECK(s.remaining_mismatches == 0);
}

TEST_CASE("spacing flag overrides the sidecar") {
  const fs::path dir = scratch("spacing");
  write_pgm(GrayscaleGrid::from_values({8, 8}, std::vector<double>(64, 0.3)), dir / "s.pgm");
  std::ofstream(dir / "s.ini") << "[scan]\nspacing_x = 2\nspacing_y = 2\n";
  std::ofstream(dir / "run.ini") << "[scan]\ninput = s.pgm\n[spline]\ncells = 2,2\n[output]\nformats = vtk\n";
  CHECK(run("segment --config " + (dir / "run.ini").string() + " --out " + (dir / "a").string()) == 0);
  CHECK(slurp(dir / "a" / "level_set.vtk").find("SPACING 0.5 0.5 1") != std::string::npos);
  CHECK(run("segment --spacing 0.25,0.5 --config " + (dir / "run.ini").string() + " --out " + (dir / "b").string()) == 0);
  CHECK(slurp(dir / "b" / "level_set.vtk").find("SPACING 0.0625 0.125 1") != std::string::npos);
}

TEST_CASE("reruns give identical tables") {
  const fs::path dir = scratch("rerun");
  std::ofstream(dir / "run.ini") << "[spline]\ndegree = 1\ncells = 4,4\n[stokes]\nproblem = disk\nlevels = 2\n"
                                    "[output]\nformats = csv,vtk\n";
  for (const char* sub : {"a", "b"})
    CHECK(run("solve --threads 1 --config " + (dir / "run.ini").string() + " --out " + (dir / sub).string()) == 0);
  const std::string a = slurp(dir / "a" / "convergence.csv");
  CHECK(a.rfind("level,ndof,err_u_l2,err_p_l2,err_energy", 0) == 0);
  CHECK(a == slurp(dir / "b" / "convergence.csv"));
  CHECK(slurp(dir / "a" / "solution.vtk") == slurp(dir / "b" / "solution.vtk"));

  CHECK(run("quadrature --config " + std::string(SCANFLOW_CONFIGS) + "/quadrature.ini --out " + (dir / "q").string()) == 0);
  const std::string q = slurp(dir / "q" / "quadrature.csv");
  CHECK(q.rfind("iter,points,error,strategy\n", 0) == 0);
  CHECK(q.find(",octree\n") != std::string::npos);
  CHECK(q.find(",subcell\n") != std::string::npos);
}

TEST_CASE("adapt writes a trace and per-step meshes") {
  const fs::path dir = scratch("adapt");
  std::ofstream(dir / "run.ini") << "[spline]\ncells = 4,4\n[tessellation]\ndepth = 3\n[stokes]\nproblem = disk\n"
                                    "[adaptivity]\nsteps = 3\nvtk_steps = true\n";
  CHECK(run("adapt --config " + (dir / "run.ini").string() + " --out " + (dir / "o").string()) == 0);
  const std::string t = slurp(dir / "o" / "adapt.csv");
  CHECK(t.rfind("step,ndof,estimator,err_energy,err_u_l2\n", 0) == 0);
  CHECK(std::count(t.begin(), t.end(), '\n') == 4);
  for (int s = 0; s < 3; ++s) CHECK(fs::exists(dir / "o" / ("mesh_step" + std::to_string(s) + ".vtk")));
}

TEST_CASE("small corner bench with per-degree overrides") {
  const fs::path dir = scratch("corner");
  const std::string base = "[spline]\ncells = 4,4\n[tessellation]\ndepth = 6\n[stokes]\nproblem = corner\n"
                           "corner = 0.1,-0.1\n[bench]\nuniform_steps = 2\nfit_points = 2\nlocalize_step = 1\n";
  std::ofstream(dir / "run.ini") << base << "degrees = 1,2\ndepths = 5,3\nadaptive_steps = 3,2\n";
  CHECK(run("bench corner --config " + (dir / "run.ini").string() + " --out " + (dir / "o").string()) == 0);
  const std::string s = slurp(dir / "o" / "corner_summary.csv");
  CHECK(s.rfind("run,k,fit_first,fit_last,rate_energy,rate_estimator,localization\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
  const std::string a2 = slurp(dir / "o" / "corner_adaptive_k2.csv");
  CHECK(std::count(a2.begin(), a2.end(), '\n') == 3);

  std::ofstream(dir / "bad.ini") << base << "degrees = 1,2\ndepths = 5\n";
  CHECK(run("bench corner --config " + (dir / "bad.ini").string() + " --out " + (dir / "b").string()) == 2);
}
