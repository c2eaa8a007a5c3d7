#include <CLI11.hpp>
#include <iostream>

#include "scanflow/parallel.hpp"
#include "scanflow_app/commands.hpp"

int main(int argc, char** argv) {
  using namespace scanflow::app;
  CLI::App app{"Image-to-flow pipeline: segmentation, cut-cell quadrature, Stokes solves and adaptivity"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, spacing;
  unsigned threads = 0;
  app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides [output] directory)");
  app.add_option("--threads", threads, "worker cap, 0 uses all cores");
  app.add_option("--spacing", spacing, "voxel spacing DX,DY (overrides [scan] spacing)");

  auto* segment = app.add_subcommand("segment", "smooth a PGM scan into a spline level set");
  auto* quadrature = app.add_subcommand("quadrature", "optimize the quadrature of one cut element");
  auto* solve = app.add_subcommand("solve", "immersed Stokes solve with a uniform refinement study");
  auto* adapt = app.add_subcommand("adapt", "adaptive Stokes solve");
  auto* bench = app.add_subcommand("bench", "benchmark harnesses");
  bench->require_subcommand(1);
  auto* corner = bench->add_subcommand("corner", "re-entrant corner convergence study");
  auto* quad_circle = bench->add_subcommand("quad-circle", "quadrature on the unit square with a disk exclusion");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    scanflow::set_thread_count(threads);
    Context ctx;
    if (!config_path.empty()) ctx.config = RunConfig::load(config_path);
    if (!spacing.empty()) ctx.config.set("scan", "spacing", spacing);
    ctx.out_dir = out_dir.empty() ? "." : out_dir;
    ctx.log = &std::cout;
    if (*segment) cmd_segment(ctx);
    if (*quadrature) cmd_quadrature(ctx);
    if (*solve) cmd_solve(ctx);
    if (*adapt) cmd_adapt(ctx);
    if (*corner) cmd_bench_corner(ctx);
    if (*quad_circle) cmd_bench_quad_circle(ctx);
  } catch (const std::exception& e) {
    const int code = exit_code(e);
    std::cerr << (code == 2 ? "config error: " : "numerical failure: ") << e.what() << '\n';
    return code;
  }
  return 0;
}
