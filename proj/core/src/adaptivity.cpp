#include "scanflow/adaptivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "scanflow/parallel.hpp"

namespace scanflow {

namespace {

const std::vector<Index<2>> kSecond = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
const std::vector<Index<2>> kFirst = {{0, 0}, {1, 0}, {0, 1}};

// (2 mu grad^s u) n from a 3 x 3 derivative block (rows u_x, u_y, p).
Point2 viscous_flux(const Eigen::Matrix<double, 3, Eigen::Dynamic>& d, double mu, const Point2& n) {
  const double sxx = 2 * mu * d(0, 1), syy = 2 * mu * d(1, 2), sxy = mu * (d(0, 2) + d(1, 1));
  return {sxx * n[0] + sxy * n[1], sxy * n[0] + syy * n[1]};
}

struct FaceIntegrals {
  double jump = 0, ghost = 0, skeleton = 0;  // integrals of the squared half jumps
};

FaceIntegrals face_integrals(const DiscreteSolution& sol, const SkeletonFace& f, const std::vector<QuadPoint>& pts,
                             double mu) {
  const int k = sol.disc.space->degree();
  Index<2> dn{0, 0};
  dn[f.axis] = k;
  std::vector<Index<2>> alphas = kFirst;
  alphas.push_back(dn);
  Point2 n{0, 0};
  n[f.axis] = 1.0;
  FaceIntegrals r;
  if (pts.empty()) return r;
  const auto lp = sol.local(f.plus), lm = sol.local(f.minus);
  Eigen::MatrixXd B;
  Eigen::Matrix<double, 3, Eigen::Dynamic> dp, dm;
  for (const QuadPoint& q : pts) {
    sol.disc.space->eval_element(f.plus, q.x, alphas, B);
    dp.noalias() = lp.transpose() * B;
    sol.disc.space->eval_element(f.minus, q.x, alphas, B);
    dm.noalias() = lm.transpose() * B;
    const Point2 j = 0.5 * (viscous_flux(dp, mu, n) - viscous_flux(dm, mu, n));
    r.jump += q.w * dot(j, j);
    const Eigen::Vector3d jk = 0.5 * (dp.col(3) - dm.col(3));
    if (f.ghost) r.ghost += q.w * jk.head<2>().squaredNorm();
    r.skeleton += q.w * jk[2] * jk[2];
  }
  return r;
}

IndicatorParts element_parts(const DiscreteSolution& sol, std::size_t e, const StokesProblem& problem,
                             const StokesQuadrature& quad, const StabilizationParams& params, bool faces) {
  const ImmersedMesh& im = *sol.disc.mesh;
  const int k = sol.disc.space->degree();
  const double mu = problem.mu;
  const double h = im.mesh->element_box(e).diameter();
  IndicatorParts ip;
  const auto lc = sol.local(e);
  Eigen::MatrixXd B;
  Eigen::Matrix<double, 3, Eigen::Dynamic> d;
  for (const QuadPoint& q : quad.volume[e]) {
    sol.disc.space->eval_element(e, q.x, kSecond, B);
    d.noalias() = lc.transpose() * B;
    const Point2 f = problem.force ? problem.force(q.x) : Point2{0, 0};
    const double rx = f[0] + mu * (2 * d(0, 3) + d(0, 5) + d(1, 4)) - d(2, 1);
    const double ry = f[1] + mu * (d(1, 3) + 2 * d(1, 5) + d(0, 4)) - d(2, 2);
    const double div = d(0, 1) + d(1, 2);
    ip.interior_momentum += q.w * h * h / mu * (rx * rx + ry * ry);
    ip.interior_mass += q.w * mu * div * div;
  }
  for (std::size_t bf : im.element_boundary[e]) {
    const Point2 n = im.boundary[bf].normal;
    const bool dirichlet = sol.disc.boundary_kind[bf] == BoundaryKind::Dirichlet;
    for (const QuadPoint& q : quad.boundary[bf]) {
      sol.disc.space->eval_element(e, q.x, kFirst, B);
      d.noalias() = lc.transpose() * B;
      if (dirichlet) {
        const Point2 g = problem.dirichlet ? problem.dirichlet(q.x) : Point2{0, 0};
        const Point2 r{g[0] - d(0, 0), g[1] - d(1, 0)};
        ip.nitsche_consistency += q.w * 9 * mu / h * dot(r, r);
        ip.nitsche_penalty += q.w * mu * params.beta * params.beta / h * dot(r, r);
      } else {
        const Point2 t = problem.neumann ? problem.neumann(q.x, n) : Point2{0, 0};
        const Point2 r = t - viscous_flux(d, mu, n) + d(2, 0) * n;
        ip.neumann += q.w * h / mu * dot(r, r);
      }
    }
  }
  if (faces)
    for (std::size_t fi : im.element_skeleton[e]) {
      const SkeletonFace& f = im.skeleton[fi];
      const FaceIntegrals fint = face_integrals(sol, f, quad.skeleton[fi], mu);
      ip.stress_jump += h / mu * fint.jump;
      ip.ghost += mu * params.gamma_g * params.gamma_g * std::pow(f.h, 2 * k - 1) * fint.ghost;
      ip.skeleton_pressure += params.gamma_s * params.gamma_s / mu * std::pow(f.h, 2 * k + 1) * fint.skeleton;
    }
  return ip;
}

}  // namespace

double IndicatorParts::total() const {
  return interior_momentum + interior_mass + neumann + nitsche_consistency + nitsche_penalty + stress_jump + ghost +
         skeleton_pressure;
}

ElementIndicators compute_indicators(const DiscreteSolution& sol, const StokesProblem& problem,
                                     const StokesQuadrature& quad, const StabilizationParams& params) {
  const ImmersedMesh& im = *sol.disc.mesh;
  ElementIndicators out;
  out.elements = im.background;
  out.parts.resize(im.background.size());
  parallel_for(im.background.size(), [&](std::size_t b) {
    out.parts[b] = element_parts(sol, im.background[b], problem, quad, params, true);
  });
  out.eta.resize(out.parts.size());
  double sum = 0.0;
  for (std::size_t b = 0; b < out.parts.size(); ++b) {
    const double t = out.parts[b].total();
    out.eta[b] = std::sqrt(t);
    sum += t;
  }
  out.estimator = std::sqrt(sum);
  return out;
}

double estimator_squared_by_faces(const DiscreteSolution& sol, const StokesProblem& problem,
                                  const StokesQuadrature& quad, const StabilizationParams& params) {
  const ImmersedMesh& im = *sol.disc.mesh;
  const int k = sol.disc.space->degree();
  const double mu = problem.mu;
  double sum = 0.0;
  for (std::size_t e : im.background) sum += element_parts(sol, e, problem, quad, params, false).total();
  for (std::size_t fi = 0; fi < im.skeleton.size(); ++fi) {
    const SkeletonFace& f = im.skeleton[fi];
    const FaceIntegrals fint = face_integrals(sol, f, quad.skeleton[fi], mu);
    const double hsum = im.mesh->element_box(f.minus).diameter() + im.mesh->element_box(f.plus).diameter();
    sum += hsum / mu * fint.jump;
    sum += 2 * mu * params.gamma_g * params.gamma_g * std::pow(f.h, 2 * k - 1) * fint.ghost;
    sum += 2 * params.gamma_s * params.gamma_s / mu * std::pow(f.h, 2 * k + 1) * fint.skeleton;
  }
  return sum;
}

std::vector<std::size_t> dorfler_mark(const std::vector<double>& eta, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in (0,1]");
  std::vector<std::size_t> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eta[a] > eta[b]; });
  double total = 0.0;
  for (std::size_t i : order) total += eta[i] * eta[i];
  std::vector<std::size_t> marked;
  if (total <= 0.0) return marked;
  double acc = 0.0;
  for (std::size_t i : order) {
    if (acc >= theta * total) break;
    marked.push_back(i);
    acc += eta[i] * eta[i];
  }
  return marked;
}

std::vector<std::size_t> complete_mask(const SplineSpace2& space, const std::vector<std::size_t>& marked,
                                       int max_level) {
  const HierarchicalMesh2& mesh = space.mesh();
  const int k = space.degree();
  std::set<std::size_t> out(marked.begin(), marked.end());
  for (std::size_t e : marked) {
    const Cell<2> c = mesh.element(e);
    if (c.level >= max_level) continue;
    const int L = c.level + 1;
    std::array<int, 2> lo{}, hi{}, nc{};
    for (int a = 0; a < 2; ++a) {
      nc[a] = mesh.cells(L, a);
      lo[a] = 2 * c.index[a];
      hi[a] = std::min(2 * c.index[a] + 1 + k, nc[a] + k - 1);
    }
    // Candidate level-L functions touching a child of e; keep the cheapest.
    std::vector<std::size_t> best;
    bool best_coarse = true;
    bool found = false;
    for (int j1 = lo[1]; j1 <= hi[1]; ++j1)
      for (int j0 = lo[0]; j0 <= hi[0]; ++j0) {
        std::set<std::size_t> need;
        bool coarse = false, feasible = true;
        const int p0a = std::max(0, j0 - k) / 2, p0b = std::min(nc[0] - 1, j0) / 2;
        const int p1a = std::max(0, j1 - k) / 2, p1b = std::min(nc[1] - 1, j1) / 2;
        for (int p1 = p1a; p1 <= p1b && feasible; ++p1)
          for (int p0 = p0a; p0 <= p0b && feasible; ++p0) {
            const Index<2> P{p0, p1};
            if (mesh.exists(c.level, P) && mesh.refined(c.level, P)) continue;
            const auto cov = mesh.covering({c.level, P});
            if (!cov) continue;
            if (mesh.element(*cov).level >= max_level) {
              feasible = false;
              break;
            }
            if (mesh.element(*cov).level < c.level) coarse = true;
            if (!out.count(*cov)) need.insert(*cov);
          }
        if (!feasible) continue;
        const bool better =
            !found || (best_coarse && !coarse) || (best_coarse == coarse && need.size() < best.size());
        if (better) {
          best.assign(need.begin(), need.end());
          best_coarse = coarse;
          found = true;
        }
      }
    out.insert(best.begin(), best.end());
  }
  return {out.begin(), out.end()};
}

AdaptResult adapt_loop(const StokesProblem& problem, const LevelSetFunction& level_set,
                       std::shared_ptr<const SplineSpace2> space, int depth, const StabilizationParams& params,
                       const QuadratureOptions& qopts, const AdaptConfig& config) {
  if (!config.uniform && !(config.theta > 0.0 && config.theta <= 1.0))
    throw std::invalid_argument("adapt_loop: theta must lie in (0,1]");
  const int max_level = config.max_level >= 0 ? config.max_level : depth;
  AdaptResult res;
  PartitionCache cache;
  for (int step = 0;; ++step) {
    auto mesh = std::make_shared<const ImmersedMesh>(build_immersed_mesh(level_set, space->mesh(), depth, &cache));
    StokesQuadrature quad = build_quadrature(*mesh, space->degree(), qopts);
    DiscreteSolution sol;
    try {
      sol = solve_stokes(problem, space, *mesh, quad, params);
    } catch (const SolverError& ex) {
      throw SolverError("adapt step " + std::to_string(step) + ": " + ex.what());
    }
    ElementIndicators ind = compute_indicators(sol, problem, quad, params);
    AdaptStep rec;
    rec.step = step;
    rec.ndof = sol.disc.size();
    rec.elements = mesh->background.size();
    rec.estimator = ind.estimator;
    for (const auto& c : space->mesh().elements()) rec.max_level = std::max(rec.max_level, c.level);
    if (problem.exact) {
      const ErrorNorms err = compute_errors(sol, quad, params, problem, false);
      rec.err_energy = err.energy;
      rec.err_u_l2 = err.u_l2;
    }
    res.space = space;
    res.mesh = mesh;
    res.quad = std::move(quad);
    res.solution = std::move(sol);
    res.indicators = ind;
    auto finish = [&](AdaptStatus s) {
      res.trace.push_back(rec);
      res.status = s;
      if (config.on_step) config.on_step(res);
    };
    if (config.tolerance > 0.0 && ind.estimator <= config.tolerance) {
      finish(AdaptStatus::Tolerance);
      break;
    }
    if (step + 1 >= config.max_steps) {
      finish(AdaptStatus::StepLimit);
      break;
    }
    std::vector<std::size_t> marked;
    if (config.uniform) {
      marked = ind.elements;
    } else {
      for (std::size_t i : dorfler_mark(ind.eta, config.theta)) marked.push_back(ind.elements[i]);
    }
    const std::size_t before = marked.size();
    std::erase_if(marked, [&](std::size_t e) { return space->mesh().element(e).level >= max_level; });
    rec.capped = before - marked.size();
    if (marked.empty()) {
      finish(AdaptStatus::DepthCap);
      break;
    }
    std::sort(marked.begin(), marked.end());
    if (config.mask) marked = complete_mask(*space, marked, max_level);
    rec.marked = marked.size();
    res.trace.push_back(rec);
    if (config.on_step) config.on_step(res);
    space = std::make_shared<const SplineSpace2>(space->refine(marked));
  }
  return res;
}

}  // namespace scanflow
