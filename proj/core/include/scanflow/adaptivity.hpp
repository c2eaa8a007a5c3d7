#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "scanflow/immersed_mesh.hpp"
#include "scanflow/stokes.hpp"

namespace scanflow {

/// Squared contributions to one element indicator.
struct IndicatorParts {
  double interior_momentum = 0;
  double interior_mass = 0;
  double neumann = 0;
  double nitsche_consistency = 0;  // 9 mu / h weight
  double nitsche_penalty = 0;      // mu beta^2 / h weight
  double stress_jump = 0;
  double ghost = 0;
  double skeleton_pressure = 0;

  double total() const;  // eta_K^2
};

struct ElementIndicators {
  std::vector<std::size_t> elements;  // background element ids
  std::vector<IndicatorParts> parts;
  std::vector<double> eta;
  double estimator = 0.0;
};

ElementIndicators compute_indicators(const DiscreteSolution& sol, const StokesProblem& problem,
                                     const StokesQuadrature& quad, const StabilizationParams& params);

/// Sum of eta_K^2 assembled face by face (each face integral evaluated once).
double estimator_squared_by_faces(const DiscreteSolution& sol, const StokesProblem& problem,
                                  const StokesQuadrature& quad, const StabilizationParams& params);

/// Smallest set carrying theta of the squared total; positions into eta.
std::vector<std::size_t> dorfler_mark(const std::vector<double>& eta, double theta);

/// Adds elements so that refining the set activates at least one new
/// function per marked element. Elements at or above max_level are never
/// added; returns the completed, sorted element set.
std::vector<std::size_t> complete_mask(const SplineSpace2& space, const std::vector<std::size_t>& marked,
                                       int max_level);

struct AdaptResult;

struct AdaptConfig {
  double theta = 0.5;
  int max_steps = 8;
  double tolerance = 0.0;
  bool mask = true;
  bool uniform = false;  // mark every background element
  /// Elements at this level are not refined; < 0 uses the octree depth.
  int max_level = -1;
  /// Called once per step after the solve; trace.back() is the current step.
  std::function<void(const AdaptResult&)> on_step;
};

struct AdaptStep {
  int step = 0;
  std::size_t ndof = 0;
  std::size_t elements = 0;
  double estimator = 0.0;
  double err_energy = 0.0;
  double err_u_l2 = 0.0;
  std::size_t marked = 0;
  std::size_t capped = 0;  // Dorfler-marked elements dropped at the level cap
  int max_level = 0;
};

enum class AdaptStatus { Tolerance, StepLimit, DepthCap };

struct AdaptResult {
  std::shared_ptr<const SplineSpace2> space;
  std::shared_ptr<const ImmersedMesh> mesh;
  StokesQuadrature quad;
  DiscreteSolution solution;
  ElementIndicators indicators;
  std::vector<AdaptStep> trace;
  AdaptStatus status = AdaptStatus::StepLimit;
};

/// Solve, estimate, mark, refine. `depth` is the octree depth of level-0
/// elements and stays fixed, so the geometry never changes.
AdaptResult adapt_loop(const StokesProblem& problem, const LevelSetFunction& level_set,
                       std::shared_ptr<const SplineSpace2> space, int depth, const StabilizationParams& params,
                       const QuadratureOptions& qopts, const AdaptConfig& config);

}  // namespace scanflow
