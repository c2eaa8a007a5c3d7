#include "scanflow/quadrature_opt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace scanflow {

namespace {

// Orthonormal Legendre polynomials on [0,1] up to degree n.
void legendre01(double t, int n, double* out) {
  const double s = 2.0 * t - 1.0;
  double p0 = 1.0, p1 = s;
  out[0] = 1.0;
  if (n >= 1) out[1] = s * std::sqrt(3.0);
  for (int m = 2; m <= n; ++m) {
    const double p2 = ((2 * m - 1) * s * p1 - (m - 1) * p0) / m;
    out[m] = p2 * std::sqrt(2.0 * m + 1.0);
    p0 = p1;
    p1 = p2;
  }
}

}  // namespace

MomentBasis::MomentBasis(const Box2& box, int k, Kind kind) : box_(box), k_(k), kind_(kind) {
  if (k < 1) throw std::invalid_argument("MomentBasis: k must be >= 1");
  const int m = size();
  gram_ = Eigen::MatrixXd::Zero(m, m);
  const auto rule = box_rule(box, 2 * k + 1);
  Eigen::VectorXd v(m);
  for (const auto& q : rule) {
    eval(q.x, v.data());
    gram_.noalias() += q.w * v * v.transpose();
  }
  gram_ldlt_.compute(gram_);
}

void MomentBasis::eval(const Point2& x, double* out) const {
  const int n = 2 * k_;
  double a[32], b[32];
  const double u = (x[0] - box_.lo[0]) / box_.extent(0);
  const double v = (x[1] - box_.lo[1]) / box_.extent(1);
  if (kind_ == Kind::Legendre) {
    legendre01(u, n, a);
    legendre01(v, n, b);
  } else {
    const double s = 2.0 * u - 1.0, t = 2.0 * v - 1.0;
    a[0] = b[0] = 1.0;
    for (int i = 1; i <= n; ++i) {
      a[i] = a[i - 1] * s;
      b[i] = b[i - 1] * t;
    }
  }
  // Legendre scaled by |K|^-1/2 so the basis is orthonormal in L2(K).
  const double scale = kind_ == Kind::Legendre ? 1.0 / std::sqrt(box_.volume()) : 1.0;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) out[j * (n + 1) + i] = scale * a[i] * b[j];
}

Eigen::VectorXd MomentBasis::eval(const Point2& x) const {
  Eigen::VectorXd v(size());
  eval(x, v.data());
  return v;
}

Eigen::VectorXd MomentBasis::integrate(const std::vector<QuadPoint>& rule) const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(size()), v(size());
  for (const auto& q : rule) {
    eval(q.x, v.data());
    m += q.w * v;
  }
  return m;
}

Eigen::VectorXd apply_inverse_gramian(const MomentBasis& basis, const Eigen::VectorXd& v) {
  return basis.gram_ldlt_.solve(v);
}

std::size_t subcell_point_count(const Partition& p, std::size_t c, int n) {
  const SubCell& s = p.cells[c];
  const std::size_t per = static_cast<std::size_t>(n) * n;
  return s.cut ? per * p.tessellations[s.tessellation].inside.size() : per;
}

void append_subcell_rule(const Partition& p, std::size_t c, int n, std::vector<QuadPoint>& out) {
  const SubCell& s = p.cells[c];
  if (!s.cut) {
    append_box_rule(s.box, n, out);
    return;
  }
  for (const auto& t : p.tessellations[s.tessellation].inside) append_triangle_rule(t, n, out);
}

QuadRule make_rule(const Partition& p, std::vector<int> orders) {
  if (orders.size() != p.cells.size()) throw std::invalid_argument("make_rule: one order per sub-cell");
  QuadRule r;
  r.orders = std::move(orders);
  r.offsets.reserve(p.cells.size() + 1);
  for (std::size_t c = 0; c < p.cells.size(); ++c) {
    r.offsets.push_back(r.points.size());
    append_subcell_rule(p, c, r.orders[c], r.points);
  }
  r.offsets.push_back(r.points.size());
  return r;
}

QuadRule equal_order_rule(const Partition& p, int points_per_axis) {
  return make_rule(p, std::vector<int>(p.cells.size(), points_per_axis));
}

int exact_moment_order(int k) { return 2 * k + 1; }

std::vector<Eigen::VectorXd> subcell_exact_moments(const MomentBasis& basis, const Partition& p) {
  const int n = exact_moment_order(basis.degree() / 2);
  std::vector<Eigen::VectorXd> out;
  out.reserve(p.cells.size());
  std::vector<QuadPoint> pts;
  for (std::size_t c = 0; c < p.cells.size(); ++c) {
    pts.clear();
    append_subcell_rule(p, c, n, pts);
    out.push_back(basis.integrate(pts));
  }
  return out;
}

Eigen::VectorXd exact_moments(const MomentBasis& basis, const Partition& p) {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(basis.size());
  for (const auto& m : subcell_exact_moments(basis, p)) xi += m;
  return xi;
}

std::vector<Eigen::VectorXd> subcell_moments(const MomentBasis& basis, const QuadRule& rule) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(rule.orders.size());
  for (std::size_t c = 0; c < rule.orders.size(); ++c) {
    std::vector<QuadPoint> pts(rule.points.begin() + rule.offsets[c], rule.points.begin() + rule.offsets[c + 1]);
    out.push_back(basis.integrate(pts));
  }
  return out;
}

Supremizer supremizer(const MomentBasis& basis, const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_bar) {
  Supremizer s;
  const Eigen::VectorXd d = xi - xi_bar;
  const Eigen::VectorXd y = apply_inverse_gramian(basis, d);
  const double e2 = d.dot(y);
  if (!(e2 > 0.0)) return s;
  s.error = std::sqrt(e2);
  s.coeffs = y / s.error;
  return s;
}

double polynomial_error(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_bar) {
  if (coeffs.size() == 0) return 0.0;
  return std::abs(coeffs.dot(xi) - coeffs.dot(xi_bar));
}

std::vector<double> subcell_errors(const Supremizer& s, const std::vector<Eigen::VectorXd>& exact,
                                   const std::vector<Eigen::VectorXd>& approx) {
  std::vector<double> e(exact.size(), 0.0);
  if (s.coeffs.size() == 0) return e;
  for (std::size_t c = 0; c < exact.size(); ++c) e[c] = std::abs(s.coeffs.dot(exact[c] - approx[c]));
  return e;
}

QuadratureOptimizer::QuadratureOptimizer(const Partition& p, const Box2& element, int k, int order_cap,
                                         MomentBasis::Kind kind)
    : part_(p), basis_(element, k, kind), cap_(order_cap > 0 ? order_cap : k + 2) {
  exact_sub_ = subcell_exact_moments(basis_, p);
  xi_ = Eigen::VectorXd::Zero(basis_.size());
  for (const auto& m : exact_sub_) xi_ += m;
  rule_ = equal_order_rule(p, 1);
  approx_sub_ = subcell_moments(basis_, rule_);
  evaluate();
}

void QuadratureOptimizer::evaluate() {
  xi_bar_ = Eigen::VectorXd::Zero(basis_.size());
  for (const auto& m : approx_sub_) xi_bar_ += m;
  sup_ = supremizer(basis_, xi_, xi_bar_);
  e_sub_ = subcell_errors(sup_, exact_sub_, approx_sub_);
}

std::size_t QuadratureOptimizer::cost(std::size_t c) const {
  const int n = rule_.orders[c];
  return subcell_point_count(part_, c, n + 1) - subcell_point_count(part_, c, n);
}

bool QuadratureOptimizer::step(MarkingStrategy strategy, std::size_t max_points) {
  const std::size_t nc = part_.cells.size();
  const std::size_t room = max_points ? max_points - std::min(max_points, rule_.size()) : SIZE_MAX;
  std::vector<std::size_t> raise;
  if (strategy == MarkingStrategy::SubCell) {
    double best = -1.0;
    std::size_t arg = nc;
    for (std::size_t c = 0; c < nc; ++c) {
      if (capped(c) || cost(c) > room) continue;
      const double ind = e_sub_[c] / static_cast<double>(cost(c));
      if (ind > best) {
        best = ind;
        arg = c;
      }
    }
    if (arg == nc) return false;
    raise.push_back(arg);
  } else {
    std::map<int, double> level_error;
    std::map<int, std::size_t> level_cost;
    for (std::size_t c = 0; c < nc; ++c) {
      if (capped(c)) continue;
      level_error[part_.cells[c].level] += e_sub_[c];
      level_cost[part_.cells[c].level] += cost(c);
    }
    int best_level = -1;
    double best = -1.0;
    for (const auto& [l, e] : level_error)
      if (level_cost[l] <= room && e > best) {
        best = e;
        best_level = l;
      }
    if (best_level < 0) return false;
    for (std::size_t c = 0; c < nc; ++c)
      if (!capped(c) && part_.cells[c].level == best_level) raise.push_back(c);
  }
  for (std::size_t c : raise) ++rule_.orders[c];
  rule_ = make_rule(part_, rule_.orders);
  for (std::size_t c : raise) {
    std::vector<QuadPoint> pts(rule_.points.begin() + rule_.offsets[c], rule_.points.begin() + rule_.offsets[c + 1]);
    approx_sub_[c] = basis_.integrate(pts);
  }
  evaluate();
  return true;
}

OptimizeResult optimize(const Partition& p, const Box2& element, int k, const StoppingRule& stop,
                        MarkingStrategy strategy, int order_cap) {
  if (p.empty()) throw std::invalid_argument("optimize: empty partition");
  QuadratureOptimizer opt(p, element, k, order_cap);
  OptimizeResult res;
  res.trace.push_back({0, opt.rule().size(), opt.error()});
  int it = 0;
  auto met = [&] { return stop.target > 0.0 && opt.error() <= stop.target; };
  while (!met() && it < stop.max_iterations) {
    if (!opt.step(strategy, stop.max_points)) break;
    ++it;
    res.trace.push_back({it, opt.rule().size(), opt.error()});
  }
  res.rule = opt.rule();
  res.error = opt.error();
  res.unreachable = stop.target > 0.0 && !met();
  return res;
}

}  // namespace scanflow
