#pragma once

#include "scanflow/immersed_mesh.hpp"
#include "scanflow/stokes.hpp"

namespace scanflow {

/// Traction (2 mu grad^s u - p I) n of an exact solution.
Point2 exact_traction(const ExactSolution& s, double mu, const Point2& x, const Point2& n);

/// Dirichlet data from s, Neumann data from its traction.
StokesProblem problem_from_exact(ExactSolution s, VectorField force, double mu);

struct DiskGeometry {
  Point2 center{0.51, 0.47};
  double radius = 0.37;
};

LevelSetFunction disk_level_set(const DiskGeometry& g);

/// u = curl of sin(pi x) sin(pi y), p = cos(pi x) cos(pi y). Circle faces
/// with midpoint right of the centre are Neumann, the rest Dirichlet.
StokesProblem manufactured_disk_problem(const DiskGeometry& g, double mu = 1.0);

/// u = (y^2, x^2), p = x - y on whatever domain; all faces Dirichlet except
/// the box side x = box.hi[0].
StokesProblem polynomial_problem(const Box2& box, double mu = 1.0);

/// Stokes corner singularity with interior angle 3 pi / 2 (velocity vanishes on
/// both corner edges, zero body force).
struct CornerSolution {
  static constexpr double lambda = 0.54448373678246;
  static constexpr double omega = 3.0 * 3.14159265358979323846 / 2.0;
  Point2 corner{0.0, 0.0};

  Point2 u(const Point2& x) const;
  std::array<double, 4> grad_u(const Point2& x) const;
  double p(const Point2& x) const;
};

struct CornerGeometry {
  Box2 box{{-1.0, -1.0}, {1.0, 1.0}};
  Point2 corner{0.0, 0.0};
};

/// Box minus the quadrant {x > cx, y < cy}.
LevelSetFunction corner_level_set(const CornerGeometry& g);

/// Neumann on the box side x = box.hi[0], Dirichlet elsewhere.
StokesProblem corner_problem(const CornerGeometry& g, double mu = 1.0);

}  // namespace scanflow
