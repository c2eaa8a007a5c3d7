#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "scanflow/adaptivity.hpp"
#include "scanflow/quadrature_opt.hpp"
#include "scanflow/segmentation.hpp"
#include "scanflow_app/config.hpp"

namespace scanflow::app {

/// Process exit status for an exception escaping a command: 2 for
/// configuration and input errors, 3 for numerical failures.
int exit_code(const std::exception& e);

struct Context {
  RunConfig config;
  std::filesystem::path out_dir = ".";
  std::ostream* log = nullptr;  // progress lines; null keeps quiet
};

/// Output directory: --out wins over [output] directory.
std::filesystem::path output_dir(const Context& ctx);

struct SegmentSummary {
  double voxel_mean = 0.0;
  double field_mean = 0.0;
  BoundReport bounds;
  std::size_t repairs = 0;  // elements refined by the topology pass
  int repair_rounds = 0;
  std::size_t remaining_mismatches = 0;
  std::size_t elements = 0;
};

SegmentSummary cmd_segment(const Context& ctx);

struct QuadTraceRow {
  std::string strategy;  // equal, subcell or octree
  int iter = 0;          // points per axis for equal
  std::size_t points = 0;
  double error = 0.0;
};

std::vector<QuadTraceRow> cmd_quadrature(const Context& ctx);

struct QuadCircleSummary {
  std::size_t budget = 0;
  double equal_error = 0.0;      // 2 points per axis
  double optimized_error = 0.0;  // sub-cell strategy at the same budget
  std::size_t optimized_points = 0;
  double target = 1e-2;
  std::size_t equal_points_at_target = 0;
  std::size_t optimized_points_at_target = 0;
  double strategy_ratio = 0.0;  // worst octree/sub-cell error ratio at matched points
  std::vector<QuadTraceRow> trace;
};

QuadCircleSummary cmd_bench_quad_circle(const Context& ctx);

/// Largest max(r, 1/r) of octree-level errors against the log-log
/// interpolated sub-cell trace, over points with error above `floor`.
double strategy_agreement(const std::vector<TracePoint>& octree, const std::vector<TracePoint>& subcell,
                          double floor = 1e-9);

struct ConvergenceRow {
  int level = 0;
  std::size_t ndof = 0;
  double err_u_l2 = 0.0, err_p_l2 = 0.0, err_energy = 0.0;
  double rate_u_l2 = 0.0, rate_energy = 0.0;  // zero on level 0
};

std::vector<ConvergenceRow> cmd_solve(const Context& ctx);

std::vector<AdaptStep> cmd_adapt(const Context& ctx);

struct CornerRun {
  int k = 1;
  bool adaptive = true;
  std::vector<AdaptStep> trace;
  int fit_first = 0, fit_last = 0;
  double rate_energy = 0.0;
  double rate_estimator = 0.0;
  /// Distance from the corner to the farthest finest-level element after
  /// localize_step (adaptive runs only).
  double localization = -1.0;
  double seconds = 0.0;
};

std::vector<CornerRun> cmd_bench_corner(const Context& ctx);

/// Least-squares slope of log(y) against log(x) over [first, last].
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, int first, int last);

/// Fit range for a convergence trace: the trailing `points` steps, ending at
/// the first step whose marking hit the refinement cap.
std::pair<int, int> fit_window(const std::vector<AdaptStep>& trace, int points);

}  // namespace scanflow::app
