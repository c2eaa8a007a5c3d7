#include <doctest.h>

#include <cmath>
#include <random>

#include "scanflow/quadrature_opt.hpp"

using namespace scanflow;

namespace {

const Box2 kUnit{{0, 0}, {1, 1}};

Partition corner_exclusion(double r = 0.4, int depth = 3) {
  auto f = [=](const Point2& x) { return x[0] * x[0] + x[1] * x[1] - r * r; };
  return trim_element(sample_lattice(f, depth, kUnit), depth, kUnit);
}

Partition uncut() { return trim_element(std::vector<double>(4, 1.0), 0, kUnit); }

Eigen::VectorXd approx(const MomentBasis& b, const QuadRule& r) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  for (const auto& m : subcell_moments(b, r)) x += m;
  return x;
}

}  // namespace

TEST_CASE("Legendre Gramian is the identity") {
  for (int k = 1; k <= 3; ++k) {
    const MomentBasis b({{0.2, -1.0}, {0.7, 0.5}}, k);
    CHECK((b.gramian() - Eigen::MatrixXd::Identity(b.size(), b.size())).cwiseAbs().maxCoeff() <= 1e-12);
    const MomentBasis m({{0.2, -1.0}, {0.7, 0.5}}, k, MomentBasis::Kind::Monomial);
    CHECK((m.gramian() - m.gramian().transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(m.gramian().llt().info() == Eigen::Success);
  }
}

TEST_CASE("rule weights") {
  const Partition p = corner_exclusion();
  for (int n = 1; n <= 4; ++n) {
    const QuadRule r = equal_order_rule(p, n);
    double total = 0;
    for (std::size_t c = 0; c < p.cells.size(); ++c) {
      double w = 0;
      for (std::size_t i = r.offsets[c]; i < r.offsets[c + 1]; ++i) {
        CHECK(r.points[i].w > 0.0);
        w += r.points[i].w;
      }
      CHECK(w == doctest::Approx(p.cell_volume(c)).epsilon(1e-12));
      total += w;
    }
    CHECK(total == doctest::Approx(p.volume()).epsilon(1e-12));
  }
}

TEST_CASE("midpoint rule on an uncut element") {
  const Partition p = uncut();
  const QuadRule r = equal_order_rule(p, 1);
  REQUIRE(r.size() == 1);
  CHECK(r.points[0].x == Point2{0.5, 0.5});
  double s = 0;
  for (const auto& q : r.points) s += q.w * (1 + 2 * q.x[0]) * (3 - q.x[1]);
  CHECK(s == doctest::Approx(2.0 * 2.5));
}

TEST_CASE("supremizer") {
  const Partition p = uncut();
  const MomentBasis b(kUnit, 1);
  const Eigen::VectorXd xi = exact_moments(b, p);

  SUBCASE("exact moments give zero error") { CHECK(supremizer(b, xi, xi).error == 0.0); }

  SUBCASE("midpoint rule against brute force") {
    const Eigen::VectorXd xb = approx(b, equal_order_rule(p, 1));
    const Supremizer s = supremizer(b, xi, xb);
    const Eigen::VectorXd d = xi - xb;
    CHECK(s.error == doctest::Approx(std::sqrt(d.dot(apply_inverse_gramian(b, d)))).epsilon(1e-12));
    CHECK(polynomial_error(s.coeffs, xi, xb) == doctest::Approx(s.error).epsilon(1e-12));
    std::mt19937 rng(9);
    std::normal_distribution<double> g;
    double best = 0;
    for (int t = 0; t < 100000; ++t) {
      Eigen::VectorXd c(b.size());
      for (int i = 0; i < c.size(); ++i) c[i] = g(rng);
      c /= c.norm();  // orthonormal basis: unit coefficient vector is a unit polynomial
      const double e = polynomial_error(c, xi, xb);
      CHECK(e <= s.error + 1e-10);
      best = std::max(best, e);
    }
    CHECK(best >= 0.9 * s.error);
  }

  SUBCASE("homogeneous in the defect") {
    const Eigen::VectorXd xb = approx(b, equal_order_rule(p, 1));
    CHECK(supremizer(b, 3.0 * xi, 3.0 * xb).error == doctest::Approx(3.0 * supremizer(b, xi, xb).error));
  }

  SUBCASE("independent of the basis") {
    const Partition q = corner_exclusion();
    for (int k = 1; k <= 3; ++k) {
      const MomentBasis l(kUnit, k), m(kUnit, k, MomentBasis::Kind::Monomial);
      const QuadRule r = equal_order_rule(q, 2);
      const double el = supremizer(l, exact_moments(l, q), approx(l, r)).error;
      const double em = supremizer(m, exact_moments(m, q), approx(m, r)).error;
      CHECK(em == doctest::Approx(el).epsilon(1e-10));
    }
  }
}

TEST_CASE("sub-cell errors") {
  const Partition p = corner_exclusion();
  const MomentBasis b(kUnit, 2);
  const auto exact = subcell_exact_moments(b, p);

  SUBCASE("exactly integrated sub-cells have no error") {
    std::vector<int> orders(p.cells.size(), 1);
    for (std::size_t c = 0; c < p.cells.size(); ++c)
      if (!p.cells[c].cut) orders[c] = exact_moment_order(2);
    const QuadRule r = make_rule(p, orders);
    const auto approx_sub = subcell_moments(b, r);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(b.size()), xb = xi;
    for (std::size_t c = 0; c < exact.size(); ++c) {
      xi += exact[c];
      xb += approx_sub[c];
    }
    const auto e = subcell_errors(supremizer(b, xi, xb), exact, approx_sub);
    for (std::size_t c = 0; c < p.cells.size(); ++c)
      if (!p.cells[c].cut) CHECK(e[c] <= 1e-13);
  }

  SUBCASE("upper bound and largest error on a largest sub-cell") {
    QuadratureOptimizer opt(p, kUnit, 2);
    double sum = 0, emax = 0, vmax = 0;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < p.cells.size(); ++c) {
      sum += opt.subcell_error()[c];
      vmax = std::max(vmax, p.cell_volume(c));
      if (opt.subcell_error()[c] > emax) {
        emax = opt.subcell_error()[c];
        arg = c;
      }
    }
    CHECK(sum >= opt.error() * (1 - 1e-12));
    CHECK(p.cell_volume(arg) == doctest::Approx(vmax));
  }

  SUBCASE("holds along an optimization") {
    QuadratureOptimizer opt(p, kUnit, 2);
    for (int it = 0; it < 40 && opt.step(MarkingStrategy::SubCell); ++it) {
      double sum = 0;
      for (double e : opt.subcell_error()) sum += e;
      CHECK(sum >= opt.error() * (1 - 1e-12));
    }
  }
}

TEST_CASE("optimizer starts from one point per sub-cell and respects the budget") {
  const Partition p = corner_exclusion();
  const OptimizeResult r = optimize(p, kUnit, 2, {112, 0.0}, MarkingStrategy::SubCell);
  CHECK(r.trace.front().points == equal_order_rule(p, 1).size());
  CHECK(r.rule.size() <= 112);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].points > r.trace[i - 1].points);
  const double equal2 = [&] {
    const MomentBasis b(kUnit, 2);
    return supremizer(b, exact_moments(b, p), approx(b, equal_order_rule(p, 2))).error;
  }();
  CHECK(r.error <= 0.1 * equal2);
}

TEST_CASE("the octree-level strategy stays close to the sub-cell strategy") {
  const Partition p = corner_exclusion();
  const OptimizeResult a = optimize(p, kUnit, 2, {0, 1e-6}, MarkingStrategy::OctreeLevel);
  const OptimizeResult b = optimize(p, kUnit, 2, {0, 1e-6}, MarkingStrategy::SubCell);
  CHECK_FALSE(a.unreachable);
  CHECK_FALSE(b.unreachable);
  CHECK(a.trace.size() < b.trace.size());
}

TEST_CASE("unreachable targets are flagged") {
  const Partition p = corner_exclusion();
  const OptimizeResult r = optimize(p, kUnit, 2, {0, 1e-30}, MarkingStrategy::SubCell);
  CHECK(r.unreachable);
  const QuadRule full = equal_order_rule(p, 4);
  CHECK(r.rule.size() == full.size());
}
