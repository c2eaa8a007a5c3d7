#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <vector>

#include "scanflow/scan_io.hpp"
#include "scanflow/spline_basis.hpp"

namespace scanflow {

/// Spline level set f = sum_i a_i phi_i - f_crit. Coefficients are stored
/// shifted so that the domain is {f > 0}.
struct LevelSetField {
  std::shared_ptr<const SplineSpace2> space;
  Eigen::VectorXd coeffs;
  double f_crit = 0.0;

  double value(const Point2& x) const;
  double value(std::size_t element, const Point2& x) const;
  /// Unshifted smoothed intensity.
  double raw(const Point2& x) const { return value(x) + f_crit; }
  LevelSetField with_threshold(double f_crit) const;
  /// Mean of the unshifted field over the spline box.
  double mean() const;
};

/// Convolution coefficients a_i = int(phi_i g) / int(phi_i), integrated
/// exactly per voxel piece.
LevelSetField smooth(const GrayscaleGrid& grid, std::shared_ptr<const SplineSpace2> space,
                     double f_crit = 0.0);

struct BoundReport {
  double worst_violation = 0.0;
  std::size_t worst_voxel = 0;
  std::size_t samples = 0;
};

BoundReport check_bounds(const LevelSetField& field, const GrayscaleGrid& grid,
                         int samples_per_axis = 5);

struct AttenuationQuery {
  double lhat = 1.0;  // feature size over mesh size
  int k = 2;
  /// Kernel width for mesh size h.
  double sigma(double h) const;
};

double predict_attenuation(const AttenuationQuery& q);

struct WindowMismatch {
  int i0 = 0, j0 = 0, size_x = 0, size_y = 0;
  int voxel_components = 0;
  int field_components = 0;
};

struct TopologyReport {
  LevelSetField field;
  int iterations = 0;          // refinement rounds performed
  std::size_t refined_elements = 0;
  std::vector<std::size_t> active_elements;  // per round, starting with the input
  std::vector<WindowMismatch> remaining;
};

/// Number of 4-connected components of a binary image (i fastest).
int count_components(const std::vector<std::uint8_t>& mask, int nx, int ny);

std::vector<WindowMismatch> find_topology_mismatches(const GrayscaleGrid& grid,
                                                     const LevelSetField& field, double g_crit,
                                                     int window);

/// Moving-window comparison of voxel and level-set topology with local
/// refinement until the component counts agree.
TopologyReport preserve_topology(const GrayscaleGrid& grid, const LevelSetField& field,
                                 double g_crit, int window = 4, int max_depth = 3);

}  // namespace scanflow
