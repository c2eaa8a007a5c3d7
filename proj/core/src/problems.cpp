#include "scanflow/problems.hpp"

#include <cmath>
#include <numbers>

namespace scanflow {

using std::numbers::pi;

Point2 exact_traction(const ExactSolution& s, double mu, const Point2& x, const Point2& n) {
  const auto g = s.grad_u(x);
  const double p = s.p(x);
  const double sxx = 2 * mu * g[0] - p, syy = 2 * mu * g[3] - p, sxy = mu * (g[1] + g[2]);
  return {sxx * n[0] + sxy * n[1], sxy * n[0] + syy * n[1]};
}

StokesProblem problem_from_exact(ExactSolution s, VectorField force, double mu) {
  StokesProblem p;
  p.mu = mu;
  p.force = std::move(force);
  p.dirichlet = s.u;
  p.neumann = [s, mu](const Point2& x, const Point2& n) { return exact_traction(s, mu, x, n); };
  p.exact = std::move(s);
  return p;
}

LevelSetFunction disk_level_set(const DiskGeometry& g) {
  const auto range = [g](const Box2& b) {
    double near = 0.0, far = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double lo = b.lo[d] - g.center[d], hi = b.hi[d] - g.center[d];
      const double n = lo > 0.0 ? lo : (hi < 0.0 ? -hi : 0.0);
      const double f = std::max(std::abs(lo), std::abs(hi));
      near += n * n;
      far += f * f;
    }
    return std::pair{g.radius - std::sqrt(far), g.radius - std::sqrt(near)};
  };
  return {[g](const Point2& x) { return g.radius - norm(x - g.center); }, range};
}

StokesProblem manufactured_disk_problem(const DiskGeometry& g, double mu) {
  ExactSolution s;
  s.u = [](const Point2& x) {
    return Point2{pi * std::sin(pi * x[0]) * std::cos(pi * x[1]), -pi * std::cos(pi * x[0]) * std::sin(pi * x[1])};
  };
  s.grad_u = [](const Point2& x) {
    const double sx = std::sin(pi * x[0]), cx = std::cos(pi * x[0]), sy = std::sin(pi * x[1]), cy = std::cos(pi * x[1]);
    const double q = pi * pi;
    return std::array<double, 4>{q * cx * cy, -q * sx * sy, q * sx * sy, -q * cx * cy};
  };
  s.p = [](const Point2& x) { return std::cos(pi * x[0]) * std::cos(pi * x[1]); };
  // -mu lap u + grad p, with lap u = -2 pi^2 u.
  VectorField f = [mu](const Point2& x) {
    const double sx = std::sin(pi * x[0]), cx = std::cos(pi * x[0]), sy = std::sin(pi * x[1]), cy = std::cos(pi * x[1]);
    const double c = 2 * mu * pi * pi * pi;
    return Point2{c * sx * cy - pi * sx * cy, -c * cx * sy - pi * cx * sy};
  };
  StokesProblem p = problem_from_exact(std::move(s), std::move(f), mu);
  p.classify = [g](const BoundaryFace& f) {
    return f.seg.midpoint()[0] > g.center[0] ? BoundaryKind::Neumann : BoundaryKind::Dirichlet;
  };
  return p;
}

StokesProblem polynomial_problem(const Box2& box, double mu) {
  ExactSolution s;
  s.u = [](const Point2& x) { return Point2{x[1] * x[1], x[0] * x[0]}; };
  s.grad_u = [](const Point2& x) { return std::array<double, 4>{0.0, 2 * x[1], 2 * x[0], 0.0}; };
  s.p = [](const Point2& x) { return x[0] - x[1]; };
  VectorField f = [mu](const Point2&) { return Point2{-2 * mu + 1.0, -2 * mu - 1.0}; };
  StokesProblem p = problem_from_exact(std::move(s), std::move(f), mu);
  const double xr = box.hi[0], tol = 1e-12 * box.extent(0);
  p.classify = [xr, tol](const BoundaryFace& f) {
    return f.on_box && f.normal[0] > 0.5 && std::abs(f.seg.a[0] - xr) < tol ? BoundaryKind::Neumann
                                                                              : BoundaryKind::Dirichlet;
  };
  return p;
}

namespace {

struct Psi {
  double v, d1, d2, d3;
};

Psi corner_psi(double phi) {
  const double l = CornerSolution::lambda, w = CornerSolution::omega;
  const double a = 1 + l, b = 1 - l, c = std::cos(l * w);
  const double sa = std::sin(a * phi), ca = std::cos(a * phi), sb = std::sin(b * phi), cb = std::cos(b * phi);
  Psi p;
  p.v = sa * c / a - ca - sb * c / b + cb;
  p.d1 = ca * c + a * sa - cb * c - b * sb;
  p.d2 = -a * sa * c + a * a * ca + b * sb * c - b * b * cb;
  p.d3 = -a * a * ca * c - a * a * a * sa + b * b * cb * c + b * b * b * sb;
  return p;
}

// Polar coordinates with the angle in [0, 2 pi), measured from the +x axis.
std::pair<double, double> polar(const Point2& x, const Point2& c) {
  const Point2 d = x - c;
  double phi = std::atan2(d[1], d[0]);
  if (phi < 0.0) phi += 2 * pi;
  return {norm(d), phi};
}

}  // namespace

Point2 CornerSolution::u(const Point2& x) const {
  const auto [r, phi] = polar(x, corner);
  const Psi s = corner_psi(phi);
  const double rl = std::pow(r, lambda), sp = std::sin(phi), cp = std::cos(phi);
  return {rl * ((1 + lambda) * sp * s.v + cp * s.d1), rl * (sp * s.d1 - (1 + lambda) * cp * s.v)};
}

std::array<double, 4> CornerSolution::grad_u(const Point2& x) const {
  const auto [r, phi] = polar(x, corner);
  const Psi s = corner_psi(phi);
  const double l = lambda, sp = std::sin(phi), cp = std::cos(phi);
  const double U0 = (1 + l) * sp * s.v + cp * s.d1, U1 = sp * s.d1 - (1 + l) * cp * s.v;
  const double V0 = (1 + l) * cp * s.v + l * sp * s.d1 + cp * s.d2;
  const double V1 = (1 + l) * sp * s.v - l * cp * s.d1 + sp * s.d2;
  const double rl = std::pow(r, l - 1);
  return {rl * (l * cp * U0 - sp * V0), rl * (l * sp * U0 + cp * V0), rl * (l * cp * U1 - sp * V1),
          rl * (l * sp * U1 + cp * V1)};
}

double CornerSolution::p(const Point2& x) const {
  const auto [r, phi] = polar(x, corner);
  const Psi s = corner_psi(phi);
  return -std::pow(r, lambda - 1) * ((1 + lambda) * (1 + lambda) * s.d1 + s.d3) / (1 - lambda);
}

LevelSetFunction corner_level_set(const CornerGeometry& g) {
  const auto range = [c = g.corner](const Box2& b) {
    return std::pair{std::max(c[0] - b.hi[0], b.lo[1] - c[1]), std::max(c[0] - b.lo[0], b.hi[1] - c[1])};
  };
  return {[c = g.corner](const Point2& x) { return std::max(c[0] - x[0], x[1] - c[1]); }, range};
}

StokesProblem corner_problem(const CornerGeometry& g, double mu) {
  CornerSolution cs{g.corner};
  ExactSolution s;
  s.u = [cs](const Point2& x) { return cs.u(x); };
  s.grad_u = [cs](const Point2& x) { return cs.grad_u(x); };
  s.p = [cs](const Point2& x) { return cs.p(x); };
  StokesProblem p = problem_from_exact(std::move(s), [](const Point2&) { return Point2{0.0, 0.0}; }, mu);
  const double xr = g.box.hi[0], tol = 1e-12 * g.box.extent(0);
  p.classify = [xr, tol](const BoundaryFace& f) {
    return f.on_box && f.normal[0] > 0.5 && std::abs(f.seg.a[0] - xr) < tol ? BoundaryKind::Neumann
                                                                              : BoundaryKind::Dirichlet;
  };
  return p;
}

}  // namespace scanflow
