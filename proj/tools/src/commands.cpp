#include "scanflow_app/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "scanflow/export.hpp"
#include "scanflow/problems.hpp"
#include "scanflow/scan_io.hpp"

namespace scanflow::app {

namespace fs = std::filesystem;

namespace {

void say(const Context& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

bool wants(const RunConfig& cfg, const std::string& format) {
  const std::string f = cfg.get_string("output", "formats", "csv");
  std::size_t pos = 0;
  while (pos <= f.size()) {
    const std::size_t next = std::min(f.find(',', pos), f.size());
    std::string item = f.substr(pos, next - pos);
    std::erase(item, ' ');
    if (item == format) return true;
    pos = next + 1;
  }
  return false;
}

std::array<int, 2> cells(const RunConfig& cfg, std::array<int, 2> fallback) {
  if (!cfg.has("spline", "cells")) return fallback;
  const auto v = cfg.get_list("spline", "cells");
  if (v.size() != 2 || v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
    throw ConfigError(cfg.source() + ": [spline] cells must be two positive integers");
  return {static_cast<int>(v[0]), static_cast<int>(v[1])};
}

Point2 point(const RunConfig& cfg, const std::string& section, const std::string& key, Point2 fallback) {
  const auto v = cfg.get_list(section, key, std::vector<double>{fallback[0], fallback[1]});
  if (v.size() != 2) throw ConfigError(cfg.source() + ": [" + section + "] " + key + " needs two values");
  return {v[0], v[1]};
}

int positive(const RunConfig& cfg, const std::string& section, const std::string& key, int fallback, int min = 1) {
  const int v = cfg.get_int(section, key, fallback);
  if (v < min) throw ConfigError(cfg.source() + ": [" + section + "] " + key + " must be >= " + std::to_string(min));
  return v;
}

StabilizationParams stabilization(const RunConfig& cfg) {
  StabilizationParams p;
  p.beta = cfg.get_double("stokes", "beta", p.beta);
  p.gamma_g = cfg.get_double("stokes", "gamma_g", p.gamma_g);
  p.gamma_s = cfg.get_double("stokes", "gamma_s", p.gamma_s);
  if (p.beta <= 0 || p.gamma_g < 0 || p.gamma_s < 0)
    throw ConfigError(cfg.source() + ": [stokes] needs beta > 0 and non-negative gammas");
  return p;
}

struct Setup {
  StokesProblem problem;
  LevelSetFunction level_set;
  Box2 box;
  Point2 corner{0.0, 0.0};
  std::array<int, 2> cells{8, 8};
  int k = 1;
  int depth = 2;
};

Setup make_setup(const RunConfig& cfg) {
  Setup s;
  const std::string name = cfg.get_string("stokes", "problem");
  const double mu = cfg.get_double("stokes", "mu", 1.0);
  if (mu <= 0) throw ConfigError(cfg.source() + ": [stokes] mu must be positive");
  if (name == "disk" || name == "polynomial") {
    DiskGeometry g;
    g.center = point(cfg, "stokes", "center", g.center);
    g.radius = cfg.get_double("stokes", "radius", g.radius);
    s.box = {{0.0, 0.0}, {1.0, 1.0}};
    s.level_set = disk_level_set(g);
    s.problem = name == "disk" ? manufactured_disk_problem(g, mu) : polynomial_problem(s.box, mu);
  } else if (name == "corner") {
    CornerGeometry g;
    g.corner = point(cfg, "stokes", "corner", {0.1, -0.1});
    s.box = g.box;
    s.corner = g.corner;
    s.level_set = corner_level_set(g);
    s.problem = corner_problem(g, mu);
  } else {
    throw ConfigError(cfg.source() + ": [stokes] problem must be disk, polynomial or corner");
  }
  const std::string boundary = cfg.get_string("stokes", "boundary", "mixed");
  if (boundary == "dirichlet")
    s.problem.classify = nullptr;
  else if (boundary != "mixed")
    throw ConfigError(cfg.source() + ": [stokes] boundary must be mixed or dirichlet");
  s.cells = cells(cfg, {8, 8});
  s.k = positive(cfg, "spline", "degree", 1);
  s.depth = positive(cfg, "tessellation", "depth", 2, 0);
  return s;
}

std::shared_ptr<const SplineSpace2> make_space(const Setup& s, int max_level_jump, int scale = 1) {
  return std::make_shared<const SplineSpace2>(
      HierarchicalMesh2(RectMesh2::uniform(s.box, {s.cells[0] * scale, s.cells[1] * scale}), max_level_jump),
      s.k);
}

AdaptConfig adapt_config(const RunConfig& cfg, const std::string& mode) {
  AdaptConfig c;
  c.theta = cfg.get_double("adaptivity", "theta", c.theta);
  c.max_steps = positive(cfg, "adaptivity", "steps", c.max_steps);
  c.tolerance = cfg.get_double("adaptivity", "tol", 0.0);
  c.mask = cfg.get_bool("adaptivity", "mask", true);
  c.max_level = cfg.get_int("adaptivity", "max_level", -1);
  if (mode == "uniform") {
    c.theta = 1.0;
    c.mask = false;
  } else if (mode != "adaptive") {
    throw ConfigError(cfg.source() + ": [adaptivity] mode must be adaptive or uniform");
  }
  if (!(c.theta > 0.0 && c.theta <= 1.0)) throw ConfigError(cfg.source() + ": [adaptivity] theta must lie in (0,1]");
  return c;
}

void write_trace(const fs::path& path, const std::vector<AdaptStep>& trace) {
  auto out = open_out(path);
  CsvWriter csv(out, {"step", "ndof", "estimator", "err_energy", "err_u_l2"});
  for (const auto& s : trace)
    csv.row({static_cast<long long>(s.step), static_cast<long long>(s.ndof), s.estimator, s.err_energy, s.err_u_l2});
}

double box_distance(const Box2& b, const Point2& x) {
  const double dx = std::max({b.lo[0] - x[0], 0.0, x[0] - b.hi[0]});
  const double dy = std::max({b.lo[1] - x[1], 0.0, x[1] - b.hi[1]});
  return std::hypot(dx, dy);
}

/// Exclusion disk on the unit-square element.
struct QuadGeometry {
  Box2 element{{0.0, 0.0}, {1.0, 1.0}};
  Partition partition;
  int k = 2;
  int cap = 4;
};

QuadGeometry quad_geometry(const RunConfig& cfg) {
  QuadGeometry g;
  const double r = cfg.get_double("quadrature", "radius", 0.4);
  const Point2 c = point(cfg, "quadrature", "center", {0.0, 0.0});
  g.k = positive(cfg, "spline", "degree", 2);
  g.cap = cfg.get_int("quadrature", "order_cap", g.k + 2);
  const int depth = positive(cfg, "tessellation", "depth", 3, 0);
  auto f = [=](const Point2& x) { return (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]) - r * r; };
  g.partition = trim_element(sample_lattice(f, depth, g.element), depth, g.element);
  if (g.partition.empty() || g.partition.full())
    throw ConfigError(cfg.source() + ": [quadrature] disk does not cut the element");
  return g;
}

std::vector<QuadTraceRow> equal_rows(const QuadGeometry& g, std::vector<double>* errors = nullptr) {
  MomentBasis basis(g.element, g.k);
  const Eigen::VectorXd xi = exact_moments(basis, g.partition);
  std::vector<QuadTraceRow> rows;
  for (int n = 1; n <= g.cap; ++n) {
    const QuadRule rule = equal_order_rule(g.partition, n);
    Eigen::VectorXd xb = Eigen::VectorXd::Zero(basis.size());
    for (const auto& m : subcell_moments(basis, rule)) xb += m;
    rows.push_back({"equal", n, rule.size(), supremizer(basis, xi, xb).error});
    if (errors) errors->push_back(rows.back().error);
  }
  return rows;
}

void append_trace(std::vector<QuadTraceRow>& rows, const std::string& name, const std::vector<TracePoint>& t) {
  for (const auto& p : t) rows.push_back({name, p.iteration, p.points, p.error});
}

void write_quad_csv(const fs::path& path, const std::vector<QuadTraceRow>& rows) {
  auto out = open_out(path);
  CsvWriter csv(out, {"iter", "points", "error", "strategy"});
  for (const auto& r : rows)
    csv.row({static_cast<long long>(r.iter), static_cast<long long>(r.points), r.error, r.strategy});
}

}  // namespace

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ScanError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e))
    return 2;
  return 3;
}

fs::path output_dir(const Context& ctx) {
  fs::path dir = ctx.out_dir;
  if (dir.empty() || dir == ".") {
    if (ctx.config.has("output", "directory")) {
      dir = ctx.config.get_string("output", "directory");
      if (dir.is_relative()) dir = fs::current_path() / dir;
    } else {
      dir = fs::current_path();
    }
  }
  fs::create_directories(dir);
  return dir;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, int first, int last) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = last - first + 1;
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  for (int i = first; i <= last; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::pair<int, int> fit_window(const std::vector<AdaptStep>& trace, int points) {
  int last = static_cast<int>(trace.size()) - 1;
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (trace[i].capped > 0) {
      last = static_cast<int>(i);
      break;
    }
  return {std::max(0, last - points + 1), last};
}

double strategy_agreement(const std::vector<TracePoint>& octree, const std::vector<TracePoint>& subcell,
                          double floor) {
  double worst = 1.0;
  for (const auto& p : octree) {
    if (p.error <= floor) continue;
    for (std::size_t i = 0; i + 1 < subcell.size(); ++i) {
      const auto& a = subcell[i];
      const auto& b = subcell[i + 1];
      if (p.points < a.points || p.points > b.points) continue;
      double e = a.error;
      if (b.points > a.points && a.error > 0 && b.error > 0) {
        const double t = std::log(double(p.points) / a.points) / std::log(double(b.points) / a.points);
        e = std::exp((1 - t) * std::log(a.error) + t * std::log(b.error));
      }
      worst = std::max(worst, std::max(p.error / e, e / p.error));
      break;
    }
  }
  return worst;
}

SegmentSummary cmd_segment(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.require({"scan.input"});
  fs::path input = cfg.get_string("scan", "input");
  if (input.is_relative()) input = cfg.base_dir() / input;
  GrayscaleGrid grid = load_pgm(input);
  fs::path sidecar = cfg.has("scan", "sidecar") ? fs::path(cfg.get_string("scan", "sidecar"))
                                                : fs::path(input).replace_extension(".ini");
  if (sidecar.is_relative()) sidecar = cfg.base_dir() / sidecar;
  if (cfg.has("scan", "sidecar") || fs::exists(sidecar)) apply_metadata(grid, load_sidecar(sidecar));
  if (cfg.has("scan", "spacing")) {
    const Point2 h = point(cfg, "scan", "spacing", {1.0, 1.0});
    if (h[0] <= 0 || h[1] <= 0) throw ConfigError(cfg.source() + ": [scan] spacing must be positive");
    grid.spacing = h;
  }
  const double g_crit = cfg.get_double("scan", "threshold", 0.5);
  const int k = positive(cfg, "spline", "degree", 2);
  const auto n = cells(cfg, grid.dims);
  auto space = std::make_shared<const SplineSpace2>(
      HierarchicalMesh2(RectMesh2::uniform(grid.box(), {n[0], n[1]}), cfg.get_int("spline", "max_level_jump", -1)), k);

  LevelSetField field = smooth(grid, space, g_crit);
  SegmentSummary s;
  if (cfg.get_bool("segmentation", "preserve_topology", false)) {
    TopologyReport rep = preserve_topology(grid, field, g_crit, positive(cfg, "segmentation", "window", 4, 2),
                                           positive(cfg, "segmentation", "max_depth", 3, 0));
    s.repairs = rep.refined_elements;
    s.repair_rounds = rep.iterations;
    s.remaining_mismatches = rep.remaining.size();
    field = rep.field;
  }
  s.voxel_mean = grid.mean();
  s.field_mean = field.mean();
  s.bounds = check_bounds(field, grid);
  s.elements = field.space->mesh().num_elements();

  const fs::path dir = output_dir(ctx);
  {
    auto out = open_out(dir / "segment.csv");
    CsvWriter csv(out, {"metric", "value"});
    csv.row({std::string("voxel_mean"), s.voxel_mean});
    csv.row({std::string("field_mean"), s.field_mean});
    csv.row({std::string("mean_difference"), std::abs(s.field_mean - s.voxel_mean)});
    csv.row({std::string("bound_violation"), s.bounds.worst_violation});
    csv.row({std::string("elements"), static_cast<long long>(s.elements)});
    csv.row({std::string("repaired_elements"), static_cast<long long>(s.repairs)});
    csv.row({std::string("repair_rounds"), static_cast<long long>(s.repair_rounds)});
    csv.row({std::string("remaining_mismatches"), static_cast<long long>(s.remaining_mismatches)});
  }
  if (wants(cfg, "vtk")) {
    const int lattice = positive(cfg, "segmentation", "lattice", 4, 1);
    auto out = open_out(dir / "level_set.vtk");
    write_vtk_level_set(out, field, lattice * grid.dims[0] + 1, lattice * grid.dims[1] + 1);
  }
  say(ctx, "conservation: voxel mean " + format_double(s.voxel_mean) + " field mean " + format_double(s.field_mean) +
               " difference " + format_double(std::abs(s.field_mean - s.voxel_mean)));
  say(ctx, "topology repairs: " + std::to_string(s.repairs) + " elements in " + std::to_string(s.repair_rounds) +
               " rounds, " + std::to_string(s.remaining_mismatches) + " mismatches left");
  return s;
}

std::vector<QuadTraceRow> cmd_quadrature(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const QuadGeometry g = quad_geometry(cfg);
  const std::string strategy = cfg.get_string("quadrature", "strategy", "subcell");
  const std::string criterion = cfg.get_string("quadrature", "criterion", "points");
  StoppingRule stop;
  stop.max_iterations = positive(cfg, "quadrature", "max_iterations", stop.max_iterations);
  if (criterion == "points")
    stop.max_points = static_cast<std::size_t>(positive(cfg, "quadrature", "budget", 144));
  else if (criterion == "target")
    stop.target = cfg.get_double("quadrature", "target", 1e-2);
  else
    throw ConfigError(cfg.source() + ": [quadrature] criterion must be points or target");

  std::vector<QuadTraceRow> rows = equal_rows(g);
  auto run = [&](MarkingStrategy m, const std::string& name) {
    const OptimizeResult r = optimize(g.partition, g.element, g.k, stop, m, g.cap);
    append_trace(rows, name, r.trace);
    say(ctx, name + ": " + std::to_string(r.rule.size()) + " points, error " + format_double(r.error) +
                 (r.unreachable ? " (criterion not reached)" : ""));
  };
  if (strategy == "subcell" || strategy == "both") run(MarkingStrategy::SubCell, "subcell");
  if (strategy == "octree" || strategy == "both") run(MarkingStrategy::OctreeLevel, "octree");
  if (strategy != "subcell" && strategy != "octree" && strategy != "both")
    throw ConfigError(cfg.source() + ": [quadrature] strategy must be subcell, octree or both");
  write_quad_csv(output_dir(ctx) / "quadrature.csv", rows);
  return rows;
}

QuadCircleSummary cmd_bench_quad_circle(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const QuadGeometry g = quad_geometry(cfg);
  QuadCircleSummary s;
  std::vector<double> eq_err;
  s.trace = equal_rows(g, &eq_err);
  if (g.cap < 2) throw ConfigError(cfg.source() + ": [quadrature] order_cap must be >= 2");
  s.equal_error = eq_err[1];
  s.budget = cfg.has("quadrature", "budget") ? static_cast<std::size_t>(positive(cfg, "quadrature", "budget", 1))
                                             : s.trace[1].points;
  s.target = cfg.get_double("quadrature", "target", 1e-2);
  for (const auto& r : s.trace)
    if (r.error <= s.target) {
      s.equal_points_at_target = r.points;
      break;
    }

  const OptimizeResult at_budget = optimize(g.partition, g.element, g.k, {s.budget, 0.0}, MarkingStrategy::SubCell, g.cap);
  s.optimized_error = at_budget.error;
  s.optimized_points = at_budget.rule.size();
  const OptimizeResult at_target = optimize(g.partition, g.element, g.k, {0, s.target}, MarkingStrategy::SubCell, g.cap);
  s.optimized_points_at_target = at_target.unreachable ? 0 : at_target.rule.size();

  // Full traces down to the cap for the strategy comparison.
  const OptimizeResult sub = optimize(g.partition, g.element, g.k, {0, 1e-14}, MarkingStrategy::SubCell, g.cap);
  const OptimizeResult oct = optimize(g.partition, g.element, g.k, {0, 1e-14}, MarkingStrategy::OctreeLevel, g.cap);
  s.strategy_ratio = strategy_agreement(oct.trace, sub.trace);
  append_trace(s.trace, "subcell", sub.trace);
  append_trace(s.trace, "octree", oct.trace);

  const fs::path dir = output_dir(ctx);
  write_quad_csv(dir / "quad_circle.csv", s.trace);
  auto out = open_out(dir / "quad_circle_summary.csv");
  CsvWriter csv(out, {"metric", "value"});
  csv.row({std::string("budget"), static_cast<long long>(s.budget)});
  csv.row({std::string("equal_error"), s.equal_error});
  csv.row({std::string("optimized_points"), static_cast<long long>(s.optimized_points)});
  csv.row({std::string("optimized_error"), s.optimized_error});
  csv.row({std::string("error_ratio"), s.optimized_error / s.equal_error});
  csv.row({std::string("target"), s.target});
  csv.row({std::string("equal_points_at_target"), static_cast<long long>(s.equal_points_at_target)});
  csv.row({std::string("optimized_points_at_target"), static_cast<long long>(s.optimized_points_at_target)});
  csv.row({std::string("strategy_ratio"), s.strategy_ratio});
  say(ctx, "budget " + std::to_string(s.budget) + ": equal " + format_double(s.equal_error) + " optimized " +
               format_double(s.optimized_error));
  say(ctx, "target " + format_double(s.target) + ": equal " + std::to_string(s.equal_points_at_target) +
               " points, optimized " + std::to_string(s.optimized_points_at_target) + " points");
  say(ctx, "octree vs sub-cell worst ratio " + format_double(s.strategy_ratio));
  return s;
}

std::vector<ConvergenceRow> cmd_solve(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.require({"stokes.problem"});
  const Setup s = make_setup(cfg);
  const StabilizationParams params = stabilization(cfg);
  const int levels = positive(cfg, "stokes", "levels", 4);
  const int jump = cfg.get_int("spline", "max_level_jump", -1);
  const fs::path dir = output_dir(ctx);

  std::vector<ConvergenceRow> rows;
  for (int l = 0; l < levels; ++l) {
    auto space = make_space(s, jump, 1 << l);
    const ImmersedMesh mesh = build_immersed_mesh(s.level_set, space->mesh(), s.depth);
    const StokesQuadrature quad = build_quadrature(mesh, s.k);
    DiscreteSolution sol;
    try {
      sol = solve_stokes(s.problem, space, mesh, quad, params);
    } catch (const SolverError& ex) {
      throw SolverError("level " + std::to_string(l) + ": " + ex.what());
    }
    const ErrorNorms err = compute_errors(sol, quad, params, s.problem, false);
    ConvergenceRow row{l, sol.disc.size(), err.u_l2, err.p_l2, err.energy};
    if (!rows.empty()) {
      row.rate_u_l2 = std::log2(rows.back().err_u_l2 / row.err_u_l2);
      row.rate_energy = std::log2(rows.back().err_energy / row.err_energy);
    }
    rows.push_back(row);
    say(ctx, "level " + std::to_string(l) + " ndof " + std::to_string(row.ndof) + " u_l2 " +
                 format_double(row.err_u_l2) + " energy " + format_double(row.err_energy));
    if (l + 1 == levels && wants(cfg, "vtk")) {
      auto m = open_out(dir / "mesh.vtk");
      write_vtk_cut_mesh(m, mesh);
      auto v = open_out(dir / "solution.vtk");
      write_vtk_solution(v, sol);
    }
  }
  auto out = open_out(dir / "convergence.csv");
  CsvWriter csv(out, {"level", "ndof", "err_u_l2", "err_p_l2", "err_energy", "rate_u_l2", "rate_energy"});
  for (const auto& r : rows)
    csv.row({static_cast<long long>(r.level), static_cast<long long>(r.ndof), r.err_u_l2, r.err_p_l2, r.err_energy,
             r.rate_u_l2, r.rate_energy});
  return rows;
}

std::vector<AdaptStep> cmd_adapt(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.require({"stokes.problem"});
  const Setup s = make_setup(cfg);
  AdaptConfig ac = adapt_config(cfg, cfg.get_string("adaptivity", "mode", "adaptive"));
  const fs::path dir = output_dir(ctx);
  const bool snapshots = cfg.get_bool("adaptivity", "vtk_steps", false);
  ac.on_step = [&](const AdaptResult& r) {
    const AdaptStep& st = r.trace.back();
    say(ctx, "step " + std::to_string(st.step) + " ndof " + std::to_string(st.ndof) + " estimator " +
                 format_double(st.estimator) + " energy " + format_double(st.err_energy));
    if (snapshots) {
      auto out = open_out(dir / ("mesh_step" + std::to_string(st.step) + ".vtk"));
      write_vtk_cut_mesh(out, *r.mesh);
    }
  };
  const AdaptResult res = adapt_loop(s.problem, s.level_set, make_space(s, cfg.get_int("spline", "max_level_jump", -1)),
                                     s.depth, stabilization(cfg), {}, ac);
  write_trace(dir / "adapt.csv", res.trace);
  if (wants(cfg, "vtk")) {
    auto v = open_out(dir / "solution.vtk");
    write_vtk_solution(v, res.solution);
  }
  return res.trace;
}

std::vector<CornerRun> cmd_bench_corner(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.require({"stokes.problem"});
  const Setup base = make_setup(cfg);
  const StabilizationParams params = stabilization(cfg);
  const auto degrees = cfg.get_list("bench", "degrees", std::vector<double>{1.0, 2.0});
  const auto adaptive_steps = cfg.get_list("bench", "adaptive_steps", std::vector<double>{});
  if (!adaptive_steps.empty() && adaptive_steps.size() != degrees.size())
    throw ConfigError(cfg.source() + ": [bench] adaptive_steps needs one entry per degree");
  const auto depths = cfg.get_list("bench", "depths", std::vector<double>{});
  if (!depths.empty() && depths.size() != degrees.size())
    throw ConfigError(cfg.source() + ": [bench] depths needs one entry per degree");
  const int uniform_steps = positive(cfg, "bench", "uniform_steps", 4);
  const int fit_points = positive(cfg, "bench", "fit_points", 4, 2);
  const int localize_step = positive(cfg, "bench", "localize_step", 5, 0);
  const int jump = cfg.get_int("spline", "max_level_jump", -1);
  const fs::path dir = output_dir(ctx);

  std::vector<CornerRun> runs;
  for (std::size_t di = 0; di < degrees.size(); ++di) {
    const double kd = degrees[di];
    for (bool adaptive : {true, false}) {
      Setup s = base;
      s.k = static_cast<int>(kd);
      if (!depths.empty()) {
        if (!(depths[di] >= 0.0)) throw ConfigError(cfg.source() + ": [bench] depths must be non-negative");
        s.depth = static_cast<int>(depths[di]);
      }
      CornerRun run;
      run.k = s.k;
      run.adaptive = adaptive;
      AdaptConfig ac = adapt_config(cfg, adaptive ? "adaptive" : "uniform");
      if (!adaptive) ac.max_steps = uniform_steps;
      if (adaptive && !adaptive_steps.empty()) {
        if (!(adaptive_steps[di] >= 1.0)) throw ConfigError(cfg.source() + ": [bench] adaptive_steps must be positive");
        ac.max_steps = static_cast<int>(adaptive_steps[di]);
      }
      ac.on_step = [&](const AdaptResult& r) {
        if (!adaptive || r.trace.back().step != localize_step) return;
        const auto& mesh = r.space->mesh();
        int top = 0;
        for (const auto& c : mesh.elements()) top = std::max(top, c.level);
        double far = 0.0;
        for (std::size_t e = 0; e < mesh.num_elements(); ++e)
          if (mesh.element(e).level == top) far = std::max(far, box_distance(mesh.element_box(e), s.corner));
        run.localization = far;
      };
      const auto t0 = std::chrono::steady_clock::now();
      const AdaptResult res = adapt_loop(s.problem, s.level_set, make_space(s, jump), s.depth, params, {}, ac);
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      run.trace = res.trace;
      std::tie(run.fit_first, run.fit_last) =
          adaptive ? fit_window(run.trace, fit_points) : std::pair<int, int>{std::max(0, int(run.trace.size()) - fit_points),
                                                                             int(run.trace.size()) - 1};
      std::vector<double> n, e, est;
      for (const auto& st : run.trace) {
        n.push_back(static_cast<double>(st.ndof));
        e.push_back(st.err_energy);
        est.push_back(st.estimator);
      }
      run.rate_energy = loglog_slope(n, e, run.fit_first, run.fit_last);
      run.rate_estimator = loglog_slope(n, est, run.fit_first, run.fit_last);
      const std::string name = std::string(adaptive ? "adaptive" : "uniform") + "_k" + std::to_string(s.k);
      write_trace(dir / ("corner_" + name + ".csv"), run.trace);
      say(ctx, name + ": energy rate " + format_double(run.rate_energy) + " over steps " +
                   std::to_string(run.fit_first) + "-" + std::to_string(run.fit_last) + ", " +
                   std::to_string(run.trace.back().ndof) + " dofs, " + format_double(std::round(run.seconds * 10) / 10) +
                   " s");
      runs.push_back(std::move(run));
    }
  }
  auto out = open_out(dir / "corner_summary.csv");
  CsvWriter csv(out, {"run", "k", "fit_first", "fit_last", "rate_energy", "rate_estimator", "localization"});
  for (const auto& r : runs)
    csv.row({std::string(r.adaptive ? "adaptive" : "uniform"), static_cast<long long>(r.k),
             static_cast<long long>(r.fit_first), static_cast<long long>(r.fit_last), r.rate_energy, r.rate_estimator,
             r.localization});
  return runs;
}

}  // namespace scanflow::app
