#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "scanflow/gauss.hpp"
#include "scanflow/immersed_mesh.hpp"
#include "scanflow/quadrature_opt.hpp"
#include "scanflow/spline_basis.hpp"

namespace scanflow {

using ScalarField = std::function<double(const Point2&)>;
using VectorField = std::function<Point2(const Point2&)>;
/// Row-major gradient: d(u_x)/dx, d(u_x)/dy, d(u_y)/dx, d(u_y)/dy.
using GradientField = std::function<std::array<double, 4>(const Point2&)>;

enum class BoundaryKind { Dirichlet, Neumann };

struct ExactSolution {
  VectorField u;
  GradientField grad_u;
  ScalarField p;
};

struct StokesProblem {
  double mu = 1.0;
  VectorField force;
  VectorField dirichlet;
  /// Traction at x for the (discrete) outward normal n.
  std::function<Point2(const Point2& x, const Point2& n)> neumann;
  /// Default: every face Dirichlet.
  std::function<BoundaryKind(const BoundaryFace&)> classify;
  std::optional<ExactSolution> exact;

  BoundaryKind kind(const BoundaryFace& f) const { return classify ? classify(f) : BoundaryKind::Dirichlet; }
};

struct StabilizationParams {
  double beta = 100.0;
  double gamma_g = 5e-2;
  double gamma_s = 5e-2;
};

/// Points per axis; 0 picks the default for degree k.
struct QuadratureOptions {
  int interior = 0;      // k+2
  int cut_box = 0;       // k+1
  int cut_triangle = 0;  // 2k
  int boundary = 0;      // 2k+1
  int face = 0;          // k+1
};

struct StokesQuadrature {
  std::vector<std::vector<QuadPoint>> volume;    // per element, empty outside
  std::vector<std::vector<QuadPoint>> boundary;  // per boundary face
  std::vector<std::vector<QuadPoint>> skeleton;  // per skeleton face
};

StokesQuadrature build_quadrature(const ImmersedMesh& mesh, int k, const QuadratureOptions& opts = {});

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Equal-order velocity/pressure unknowns. Layout: [u_x | u_y | p], each over
/// the functions supported on background elements.
struct Discretization {
  std::shared_ptr<const SplineSpace2> space;
  const ImmersedMesh* mesh = nullptr;
  std::vector<std::ptrdiff_t> dof;  // per function, -1 when unused
  std::size_t nfun = 0;
  std::vector<BoundaryKind> boundary_kind;  // per boundary face

  std::size_t size() const { return 3 * nfun; }
  std::size_t index(int component, std::size_t function) const {
    return component * nfun + static_cast<std::size_t>(dof[function]);
  }
  std::size_t velocity_size() const { return 2 * nfun; }
};

Discretization make_discretization(std::shared_ptr<const SplineSpace2> space, const ImmersedMesh& mesh,
                                   const StokesProblem& problem);

enum Term : unsigned {
  kViscous = 1u,
  kNitsche = 2u,   // symmetric consistency terms
  kPenalty = 4u,   // beta mu / h
  kGhost = 8u,
  kPressure = 16u,  // b(p, v) and b(q, u)
  kSkeleton = 32u,
  kAllTerms = 63u,
};

struct LinearSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
};

LinearSystem assemble(const StokesProblem& problem, const Discretization& disc, const StokesQuadrature& quad,
                      const StabilizationParams& params, unsigned terms = kAllTerms);

struct SolveReport {
  std::size_t size = 0;
  std::size_t nonzeros = 0;
  double residual = 0.0;  // relative algebraic residual
};

struct DiscreteSolution {
  Discretization disc;
  Eigen::VectorXd coeffs;
  SolveReport report;

  /// Local coefficients of element e: one row per element function, columns u_x, u_y, p.
  Eigen::Matrix<double, Eigen::Dynamic, 3> local(std::size_t e) const;
  /// Rows u_x, u_y, p; one column per derivative.
  Eigen::Matrix<double, 3, Eigen::Dynamic> derivatives(std::size_t e, const Point2& x,
                                                       const std::vector<Index<2>>& alphas) const;
  Point2 velocity(std::size_t e, const Point2& x) const;
  double pressure(std::size_t e, const Point2& x) const;
};

DiscreteSolution solve(const Discretization& disc, const LinearSystem& system);

/// Assembles and solves in one go.
DiscreteSolution solve_stokes(const StokesProblem& problem, std::shared_ptr<const SplineSpace2> space,
                              const ImmersedMesh& mesh, const StokesQuadrature& quad,
                              const StabilizationParams& params);

struct EnergyParts {
  double viscous = 0, flux = 0, penalty = 0, ghost = 0;  // velocity part
  double pressure = 0, skeleton = 0;                     // pressure part
  double total() const;
};

/// Squared terms of the mesh-dependent norm of the discrete pair `x`. With
/// `exact`, volume and Dirichlet terms use exact - discrete while the jump
/// terms use the discrete field alone.
EnergyParts energy_norm_parts(const Discretization& disc, const Eigen::VectorXd& x, const StokesQuadrature& quad,
                              const StabilizationParams& params, double mu, const ExactSolution* exact = nullptr);
double energy_norm(const Discretization& disc, const Eigen::VectorXd& x, const StokesQuadrature& quad,
                   const StabilizationParams& params, double mu);

/// L2 projection of (u, p) on the full background elements.
Eigen::VectorXd l2_projection(const Discretization& disc, const VectorField& u, const ScalarField& p);

struct ErrorNorms {
  double u_l2 = 0, p_l2 = 0, div_l2 = 0;
  double energy = 0;         // exact minus discrete
  double energy_interp = 0;  // projection minus discrete
};

/// energy_interp is only filled when `projection` is set.
ErrorNorms compute_errors(const DiscreteSolution& sol, const StokesQuadrature& quad,
                          const StabilizationParams& params, const StokesProblem& problem, bool projection = true);

/// max diag / min diag of the velocity block.
double diagonal_ratio(const LinearSystem& system, const Discretization& disc);

}  // namespace scanflow
