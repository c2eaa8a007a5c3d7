#include "scanflow/stokes.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <string>

#include "scanflow/parallel.hpp"

namespace scanflow {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct LocalContrib {
  Triplets t;
  std::vector<std::pair<std::size_t, double>> r;
};

const std::vector<Index<2>> kGrad = {{0, 0}, {1, 0}, {0, 1}};

int pick(int value, int fallback) { return value > 0 ? value : fallback; }

// Global indices of [u_x | u_y | p] for a list of functions.
std::vector<std::size_t> global_indices(const Discretization& d, const std::vector<std::size_t>& funcs) {
  const std::size_t nf = funcs.size();
  std::vector<std::size_t> g(3 * nf);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < nf; ++i) g[c * nf + i] = d.index(c, funcs[i]);
  return g;
}

void scatter(const Eigen::MatrixXd& K, const std::vector<std::size_t>& g, Triplets& out) {
  for (Eigen::Index j = 0; j < K.cols(); ++j)
    for (Eigen::Index i = 0; i < K.rows(); ++i)
      if (K(i, j) != 0.0) out.emplace_back(static_cast<int>(g[i]), static_cast<int>(g[j]), K(i, j));
}

void scatter(const Eigen::VectorXd& F, const std::vector<std::size_t>& g,
             std::vector<std::pair<std::size_t, double>>& out) {
  for (Eigen::Index i = 0; i < F.size(); ++i)
    if (F(i) != 0.0) out.emplace_back(g[i], F(i));
}

Index<2> normal_derivative(int axis, int k) {
  Index<2> a{0, 0};
  a[axis] = k;
  return a;
}

// Jump basis on a skeleton face: plus functions first, minus functions negated.
struct FaceJump {
  std::vector<std::size_t> funcs;
  Eigen::VectorXd jump;
};

FaceJump face_jump(const SplineSpace2& space, const SkeletonFace& f, const Point2& x, const Index<2>& alpha) {
  FaceJump j;
  const auto& fp = space.element_functions(f.plus);
  const auto& fm = space.element_functions(f.minus);
  j.funcs = fp;
  j.funcs.insert(j.funcs.end(), fm.begin(), fm.end());
  j.jump.resize(static_cast<Eigen::Index>(j.funcs.size()));
  j.jump.head(fp.size()) = space.eval_element(f.plus, x, alpha);
  j.jump.tail(fm.size()) = -space.eval_element(f.minus, x, alpha);
  return j;
}

}  // namespace

StokesQuadrature build_quadrature(const ImmersedMesh& mesh, int k, const QuadratureOptions& opts) {
  const int ni = pick(opts.interior, k + 2), nb = pick(opts.cut_box, k + 1), nt = pick(opts.cut_triangle, 2 * k);
  const int ns = pick(opts.boundary, 2 * k + 1), nf = pick(opts.face, k + 1);
  StokesQuadrature q;
  q.volume.resize(mesh.cls.size());
  parallel_for(mesh.cls.size(), [&](std::size_t e) {
    if (mesh.cls[e] == ElementClass::Outside) return;
    const Partition& p = mesh.partitions[e];
    auto& out = q.volume[e];
    for (const SubCell& c : p.cells) {
      if (!c.cut) {
        append_box_rule(c.box, mesh.cls[e] == ElementClass::Inside ? ni : nb, out);
        continue;
      }
      for (const auto& t : p.tessellations[c.tessellation].inside) append_triangle_rule(t, nt, out);
    }
  });
  q.boundary.resize(mesh.boundary.size());
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i) append_segment_rule(mesh.boundary[i].seg, ns, q.boundary[i]);
  q.skeleton.resize(mesh.skeleton.size());
  for (std::size_t i = 0; i < mesh.skeleton.size(); ++i) append_segment_rule(mesh.skeleton[i].seg, nf, q.skeleton[i]);
  return q;
}

Discretization make_discretization(std::shared_ptr<const SplineSpace2> space, const ImmersedMesh& mesh,
                                   const StokesProblem& problem) {
  if (&space->mesh() != mesh.mesh && space->mesh().num_elements() != mesh.cls.size())
    throw DomainError("make_discretization: immersed mesh was built on a different mesh");
  Discretization d;
  d.space = std::move(space);
  d.mesh = &mesh;
  d.dof.assign(d.space->dim(), -1);
  for (std::size_t e : mesh.background)
    for (std::size_t f : d.space->element_functions(e)) d.dof[f] = 0;
  for (auto& v : d.dof)
    if (v == 0) v = static_cast<std::ptrdiff_t>(d.nfun++);
  d.boundary_kind.resize(mesh.boundary.size());
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i) d.boundary_kind[i] = problem.kind(mesh.boundary[i]);
  return d;
}

LinearSystem assemble(const StokesProblem& problem, const Discretization& disc, const StokesQuadrature& quad,
                      const StabilizationParams& params, unsigned terms) {
  const ImmersedMesh& im = *disc.mesh;
  const SplineSpace2& space = *disc.space;
  const int k = space.degree();
  const double mu = problem.mu;
  if (quad.volume.size() != im.cls.size() || quad.boundary.size() != im.boundary.size() ||
      quad.skeleton.size() != im.skeleton.size())
    throw std::invalid_argument("assemble: quadrature does not match the immersed mesh");

  std::vector<LocalContrib> elem(im.background.size());
  parallel_for(im.background.size(), [&](std::size_t b) {
    const std::size_t e = im.background[b];
    const auto& funcs = space.element_functions(e);
    const Eigen::Index nf = static_cast<Eigen::Index>(funcs.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nf, 3 * nf);
    Eigen::VectorXd F = Eigen::VectorXd::Zero(3 * nf);
    if (quad.volume[e].empty() && !im.partitions[e].empty())
      throw std::invalid_argument("assemble: missing quadrature on element " + std::to_string(e));
    auto bx = [&](int c) { return Eigen::seqN(c * nf, nf); };
    Eigen::MatrixXd M;
    for (const QuadPoint& q : quad.volume[e]) {
      space.eval_element(e, q.x, kGrad, M);
      const auto phi = M.col(0), dx = M.col(1), dy = M.col(2);
      const double w = q.w;
      if (terms & kViscous) {
        K(bx(0), bx(0)).noalias() += w * 2 * mu * (dx * dx.transpose() + 0.5 * dy * dy.transpose());
        K(bx(0), bx(1)).noalias() += w * mu * dy * dx.transpose();
        K(bx(1), bx(0)).noalias() += w * mu * dx * dy.transpose();
        K(bx(1), bx(1)).noalias() += w * 2 * mu * (0.5 * dx * dx.transpose() + dy * dy.transpose());
      }
      if (terms & kPressure) {
        K(bx(2), bx(0)).noalias() -= w * phi * dx.transpose();
        K(bx(2), bx(1)).noalias() -= w * phi * dy.transpose();
        K(bx(0), bx(2)).noalias() -= w * dx * phi.transpose();
        K(bx(1), bx(2)).noalias() -= w * dy * phi.transpose();
      }
      if (problem.force) {
        const Point2 f = problem.force(q.x);
        F(bx(0)) += w * f[0] * phi;
        F(bx(1)) += w * f[1] * phi;
      }
    }
    const double h = im.mesh->element_box(e).diameter();
    for (std::size_t bf : im.element_boundary[e]) {
      const BoundaryFace& face = im.boundary[bf];
      const Point2 n = face.normal;
      const bool dirichlet = disc.boundary_kind[bf] == BoundaryKind::Dirichlet;
      for (const QuadPoint& q : quad.boundary[bf]) {
        space.eval_element(e, q.x, kGrad, M);
        const Eigen::VectorXd phi = M.col(0), dx = M.col(1), dy = M.col(2);
        const double w = q.w;
        if (!dirichlet) {
          if (problem.neumann) {
            const Point2 t = problem.neumann(q.x, n);
            F(bx(0)) += w * t[0] * phi;
            F(bx(1)) += w * t[1] * phi;
          }
          continue;
        }
        // tr[c][d]: component d of (grad^s (phi e_c)) n.
        const std::array<std::array<Eigen::VectorXd, 2>, 2> tr = {
            {{dx * n[0] + 0.5 * dy * n[1], 0.5 * dy * n[0]}, {0.5 * dx * n[1], 0.5 * dx * n[0] + dy * n[1]}}};
        const double pen = params.beta * mu / h;
        for (int d = 0; d < 2; ++d)
          for (int c = 0; c < 2; ++c) {
            if (terms & kNitsche)
              K(bx(d), bx(c)).noalias() -= w * 2 * mu * (phi * tr[c][d].transpose() + tr[d][c] * phi.transpose());
            if ((terms & kPenalty) && c == d) K(bx(d), bx(c)).noalias() += w * pen * phi * phi.transpose();
          }
        if (terms & kPressure)
          for (int c = 0; c < 2; ++c) {
            K(bx(2), bx(c)).noalias() += w * n[c] * phi * phi.transpose();
            K(bx(c), bx(2)).noalias() += w * n[c] * phi * phi.transpose();
          }
        if (problem.dirichlet) {
          const Point2 g = problem.dirichlet(q.x);
          for (int d = 0; d < 2; ++d) {
            if (terms & kNitsche) F(bx(d)) -= w * 2 * mu * (tr[d][0] * g[0] + tr[d][1] * g[1]);
            if (terms & kPenalty) F(bx(d)) += w * pen * g[d] * phi;
          }
          if (terms & kPressure) F(bx(2)) += w * dot(g, n) * phi;
        }
      }
    }
    const auto g = global_indices(disc, funcs);
    scatter(K, g, elem[b].t);
    scatter(F, g, elem[b].r);
  });

  std::vector<LocalContrib> faces(im.skeleton.size());
  if (terms & (kGhost | kSkeleton))
    parallel_for(im.skeleton.size(), [&](std::size_t fi) {
      const SkeletonFace& f = im.skeleton[fi];
      const bool ghost = f.ghost && (terms & kGhost);
      const bool skel = terms & kSkeleton;
      if (!ghost && !skel) return;
      const Index<2> alpha = normal_derivative(f.axis, k);
      Eigen::MatrixXd Jg;
      std::vector<std::size_t> funcs;
      for (const QuadPoint& q : quad.skeleton[fi]) {
        FaceJump j = face_jump(space, f, q.x, alpha);
        if (funcs.empty()) {
          funcs = j.funcs;
          Jg = Eigen::MatrixXd::Zero(j.jump.size(), j.jump.size());
        }
        Jg.noalias() += q.w * j.jump * j.jump.transpose();
      }
      if (funcs.empty()) return;
      const Eigen::Index nf = static_cast<Eigen::Index>(funcs.size());
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nf, 3 * nf);
      if (ghost) {
        const double s = params.gamma_g * mu * std::pow(f.h, 2 * k - 1);
        K.block(0, 0, nf, nf) = s * Jg;
        K.block(nf, nf, nf, nf) = s * Jg;
      }
      if (skel) K.block(2 * nf, 2 * nf, nf, nf) = -params.gamma_s / mu * std::pow(f.h, 2 * k + 1) * Jg;
      scatter(K, global_indices(disc, funcs), faces[fi].t);
    });

  LinearSystem sys;
  const auto n = static_cast<Eigen::Index>(disc.size());
  sys.matrix.resize(n, n);
  sys.rhs = Eigen::VectorXd::Zero(n);
  Triplets all;
  std::size_t total = 0;
  for (const auto& c : elem) total += c.t.size();
  for (const auto& c : faces) total += c.t.size();
  all.reserve(total);
  for (const auto* set : {&elem, &faces})
    for (const auto& c : *set) {
      all.insert(all.end(), c.t.begin(), c.t.end());
      for (const auto& [i, v] : c.r) sys.rhs[static_cast<Eigen::Index>(i)] += v;
    }
  sys.matrix.setFromTriplets(all.begin(), all.end());
  sys.matrix.makeCompressed();
  return sys;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> DiscreteSolution::local(std::size_t e) const {
  const auto& funcs = disc.space->element_functions(e);
  Eigen::Matrix<double, Eigen::Dynamic, 3> c(funcs.size(), 3);
  for (std::size_t i = 0; i < funcs.size(); ++i)
    for (int comp = 0; comp < 3; ++comp)
      c(static_cast<Eigen::Index>(i), comp) =
          disc.dof[funcs[i]] < 0 ? 0.0 : coeffs[static_cast<Eigen::Index>(disc.index(comp, funcs[i]))];
  return c;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> DiscreteSolution::derivatives(std::size_t e, const Point2& x,
                                                                       const std::vector<Index<2>>& alphas) const {
  return local(e).transpose() * disc.space->eval_element(e, x, alphas);
}

Point2 DiscreteSolution::velocity(std::size_t e, const Point2& x) const {
  const auto d = derivatives(e, x, {{0, 0}});
  return {d(0, 0), d(1, 0)};
}

double DiscreteSolution::pressure(std::size_t e, const Point2& x) const { return derivatives(e, x, {{0, 0}})(2, 0); }

DiscreteSolution solve(const Discretization& disc, const LinearSystem& system) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(system.matrix);
  lu.factorize(system.matrix);
  if (lu.info() != Eigen::Success)
    throw SolverError("solve: factorization failed (" + lu.lastErrorMessage() + ")");
  DiscreteSolution s;
  s.disc = disc;
  s.coeffs = lu.solve(system.rhs);
  if (lu.info() != Eigen::Success || !s.coeffs.allFinite()) throw SolverError("solve: back substitution failed");
  const double rn = system.rhs.norm();
  s.report.size = static_cast<std::size_t>(system.matrix.rows());
  s.report.nonzeros = static_cast<std::size_t>(system.matrix.nonZeros());
  const double res = (system.matrix * s.coeffs - system.rhs).norm();
  s.report.residual = rn > 0.0 ? res / rn : res;
  return s;
}

DiscreteSolution solve_stokes(const StokesProblem& problem, std::shared_ptr<const SplineSpace2> space,
                              const ImmersedMesh& mesh, const StokesQuadrature& quad,
                              const StabilizationParams& params) {
  const Discretization disc = make_discretization(std::move(space), mesh, problem);
  return solve(disc, assemble(problem, disc, quad, params));
}

double EnergyParts::total() const {
  return std::sqrt(viscous + flux + penalty + ghost + pressure + skeleton);
}

EnergyParts energy_norm_parts(const Discretization& disc, const Eigen::VectorXd& x, const StokesQuadrature& quad,
                              const StabilizationParams& params, double mu, const ExactSolution* exact) {
  const ImmersedMesh& im = *disc.mesh;
  const int k = disc.space->degree();
  DiscreteSolution s;
  s.disc = disc;
  s.coeffs = x;
  std::vector<EnergyParts> part(im.background.size());
  parallel_for(im.background.size(), [&](std::size_t b) {
    const std::size_t e = im.background[b];
    EnergyParts& ep = part[b];
    const auto lc = s.local(e);
    Eigen::MatrixXd B;
    Eigen::Matrix3d M;
    for (const QuadPoint& q : quad.volume[e]) {
      disc.space->eval_element(e, q.x, kGrad, B);
      M.noalias() = lc.transpose() * B;
      std::array<double, 4> g = {M(0, 1), M(0, 2), M(1, 1), M(1, 2)};
      double p = M(2, 0);
      if (exact) {
        const auto ge = exact->grad_u(q.x);
        for (int i = 0; i < 4; ++i) g[i] = ge[i] - g[i];
        p = exact->p(q.x) - p;
      }
      const double off = 0.5 * (g[1] + g[2]);
      ep.viscous += q.w * mu * (g[0] * g[0] + 2 * off * off + g[3] * g[3]);
      ep.pressure += q.w * p * p / mu;
    }
    const double h = im.mesh->element_box(e).diameter();
    for (std::size_t bf : im.element_boundary[e]) {
      if (disc.boundary_kind[bf] != BoundaryKind::Dirichlet) continue;
      const Point2 n = im.boundary[bf].normal;
      for (const QuadPoint& q : quad.boundary[bf]) {
        disc.space->eval_element(e, q.x, kGrad, B);
        M.noalias() = lc.transpose() * B;
        std::array<double, 4> g = {M(0, 1), M(0, 2), M(1, 1), M(1, 2)};
        Point2 u{M(0, 0), M(1, 0)};
        if (exact) {
          const auto ge = exact->grad_u(q.x);
          for (int i = 0; i < 4; ++i) g[i] = ge[i] - g[i];
          u = exact->u(q.x) - u;
        }
        const double dn0 = g[0] * n[0] + g[1] * n[1], dn1 = g[2] * n[0] + g[3] * n[1];
        ep.flux += q.w * h * mu / params.beta * (dn0 * dn0 + dn1 * dn1);
        ep.penalty += q.w * params.beta * mu / h * dot(u, u);
      }
    }
  });
  EnergyParts out;
  for (const auto& p : part) {
    out.viscous += p.viscous;
    out.flux += p.flux;
    out.penalty += p.penalty;
    out.pressure += p.pressure;
  }
  for (std::size_t fi = 0; fi < im.skeleton.size(); ++fi) {
    const SkeletonFace& f = im.skeleton[fi];
    const Index<2> alpha = normal_derivative(f.axis, k);
    const auto lp = s.local(f.plus), lm = s.local(f.minus);
    for (const QuadPoint& q : quad.skeleton[fi]) {
      const Eigen::Vector3d jump = lp.transpose() * disc.space->eval_element(f.plus, q.x, alpha) -
                                   lm.transpose() * disc.space->eval_element(f.minus, q.x, alpha);
      if (f.ghost) out.ghost += q.w * params.gamma_g * std::pow(f.h, 2 * k - 1) * mu * jump.head<2>().squaredNorm();
      out.skeleton += q.w * params.gamma_s * std::pow(f.h, 2 * k + 1) / mu * jump[2] * jump[2];
    }
  }
  return out;
}

double energy_norm(const Discretization& disc, const Eigen::VectorXd& x, const StokesQuadrature& quad,
                   const StabilizationParams& params, double mu) {
  return energy_norm_parts(disc, x, quad, params, mu).total();
}

Eigen::VectorXd l2_projection(const Discretization& disc, const VectorField& u, const ScalarField& p) {
  const SplineSpace2& space = *disc.space;
  const ImmersedMesh& im = *disc.mesh;
  const int n = space.degree() + 2;
  Triplets t;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(disc.nfun), 3);
  for (std::size_t e : im.background) {
    const auto& funcs = space.element_functions(e);
    std::vector<int> g(funcs.size());
    for (std::size_t i = 0; i < funcs.size(); ++i) g[i] = static_cast<int>(disc.dof[funcs[i]]);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(funcs.size(), funcs.size());
    for (const QuadPoint& q : box_rule(im.mesh->element_box(e), n)) {
      const Eigen::VectorXd phi = space.eval_element(e, q.x);
      M.noalias() += q.w * phi * phi.transpose();
      const Point2 uv = u(q.x);
      const double pv = p(q.x);
      for (std::size_t i = 0; i < funcs.size(); ++i) {
        rhs(g[i], 0) += q.w * uv[0] * phi[i];
        rhs(g[i], 1) += q.w * uv[1] * phi[i];
        rhs(g[i], 2) += q.w * pv * phi[i];
      }
    }
    for (std::size_t j = 0; j < funcs.size(); ++j)
      for (std::size_t i = 0; i < funcs.size(); ++i) t.emplace_back(g[i], g[j], M(i, j));
  }
  Eigen::SparseMatrix<double> mass(static_cast<Eigen::Index>(disc.nfun), static_cast<Eigen::Index>(disc.nfun));
  mass.setFromTriplets(t.begin(), t.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(mass);
  if (ldlt.info() != Eigen::Success) throw SolverError("l2_projection: mass matrix factorization failed");
  const Eigen::MatrixXd c = ldlt.solve(rhs);
  Eigen::VectorXd x(static_cast<Eigen::Index>(disc.size()));
  for (int comp = 0; comp < 3; ++comp) x.segment(comp * disc.nfun, disc.nfun) = c.col(comp);
  return x;
}

ErrorNorms compute_errors(const DiscreteSolution& sol, const StokesQuadrature& quad,
                          const StabilizationParams& params, const StokesProblem& problem, bool projection) {
  ErrorNorms r;
  const ImmersedMesh& im = *sol.disc.mesh;
  std::vector<std::array<double, 3>> part(im.background.size(), {0, 0, 0});
  parallel_for(im.background.size(), [&](std::size_t b) {
    const std::size_t e = im.background[b];
    const auto lc = sol.local(e);
    Eigen::MatrixXd B;
    Eigen::Matrix3d d;
    for (const QuadPoint& q : quad.volume[e]) {
      sol.disc.space->eval_element(e, q.x, kGrad, B);
      d.noalias() = lc.transpose() * B;
      const double div = d(0, 1) + d(1, 2);
      part[b][2] += q.w * div * div;
      if (!problem.exact) continue;
      const Point2 ue = problem.exact->u(q.x);
      const Point2 du{ue[0] - d(0, 0), ue[1] - d(1, 0)};
      const double dp = problem.exact->p(q.x) - d(2, 0);
      part[b][0] += q.w * dot(du, du);
      part[b][1] += q.w * dp * dp;
    }
  });
  for (const auto& p : part) {
    r.u_l2 += p[0];
    r.p_l2 += p[1];
    r.div_l2 += p[2];
  }
  r.u_l2 = std::sqrt(r.u_l2);
  r.p_l2 = std::sqrt(r.p_l2);
  r.div_l2 = std::sqrt(r.div_l2);
  if (problem.exact) {
    r.energy = energy_norm_parts(sol.disc, sol.coeffs, quad, params, problem.mu, &*problem.exact).total();
    if (!projection) return r;
    const Eigen::VectorXd pi = l2_projection(sol.disc, problem.exact->u, problem.exact->p);
    r.energy_interp = energy_norm(sol.disc, pi - sol.coeffs, quad, params, problem.mu);
  }
  return r;
}

double diagonal_ratio(const LinearSystem& system, const Discretization& disc) {
  double lo = INFINITY, hi = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(disc.velocity_size()); ++i) {
    const double d = std::abs(system.matrix.coeff(i, i));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return lo > 0.0 ? hi / lo : INFINITY;
}

}  // namespace scanflow
