#include <doctest.h>

#include <random>
#include <set>

#include "scanflow/spline_basis.hpp"

using namespace scanflow;

namespace {

SplineSpace2 uniform2(int n, int k) { return SplineSpace2(HierarchicalMesh2(RectMesh2::uniform({{0, 0}, {1, 1}}, {n, n})), k); }

double sum_at(const SplineSpace2& s, const Point2& x, const Index<2>& alpha = {}) {
  double t = 0;
  for (double v : s.eval(x, alpha).values) t += v;
  return t;
}

/// Refined space with a few levels near one corner.
SplineSpace2 graded(int k) {
  SplineSpace2 s = uniform2(4, k);
  for (int r = 0; r < 3; ++r) {
    std::vector<std::size_t> marked;
    for (std::size_t e = 0; e < s.mesh().num_elements(); ++e)
      if (s.mesh().element_box(e).lo[0] < 0.2 && s.mesh().element_box(e).lo[1] < 0.3) marked.push_back(e);
    s = s.refine(marked);
  }
  return s;
}

}  // namespace

TEST_CASE("dimensions of uniform spaces") {
  HierarchicalMesh<1> m(RectMesh<1>::uniform({{0.0}, {1.0}}, {4}));
  CHECK(SplineSpace<1>(m, 1).dim() == 5);
  CHECK(SplineSpace<1>(m, 2).dim() == 6);
  CHECK(uniform2(4, 2).dim() == 36);
}

TEST_CASE("quadratic values at an interior element midpoint") {
  HierarchicalMesh<1> m(RectMesh<1>::uniform({{0.0}, {1.0}}, {4}));
  SplineSpace<1> s(m, 2);
  const auto v = s.eval({0.375});
  REQUIRE(v.values.size() == 3);
  CHECK(v.values[0] == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(v.values[1] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(v.values[2] == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("partition of unity and non-negativity on hierarchical spaces") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 1; k <= 3; ++k) {
    const SplineSpace2 s = graded(k);
    for (int t = 0; t < 300; ++t) {
      const Point2 x{u(rng), u(rng)};
      CHECK(sum_at(s, x) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(sum_at(s, x, {1, 0})) < 1e-9);
      CHECK(std::abs(sum_at(s, x, {0, 1})) < 1e-9);
      for (double v : s.eval(x).values) CHECK(v >= -1e-14);
    }
  }
}

TEST_CASE("restriction to an element is a polynomial of degree k per axis") {
  const SplineSpace2 s = graded(2);
  // Third derivative along an axis vanishes: fit with a finite difference of
  // second derivatives across the element.
  for (std::size_t e = 0; e < s.mesh().num_elements(); e += 7) {
    const Box2 b = s.mesh().element_box(e);
    const Point2 a{b.lo[0] + 0.2 * b.extent(0), b.lo[1] + 0.3 * b.extent(1)};
    const Point2 c{b.lo[0] + 0.7 * b.extent(0), b.lo[1] + 0.9 * b.extent(1)};
    const auto da = s.eval_element(e, a, Index<2>{2, 2});
    const auto dc = s.eval_element(e, c, Index<2>{2, 2});
    CHECK((da - dc).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + da.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("derivative order above the degree is rejected") {
  const SplineSpace2 s = uniform2(2, 1);
  CHECK_THROWS_AS(s.eval({0.5, 0.5}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(s.eval({1.5, 0.5}), DomainError);
}

TEST_CASE("refine") {
  const SplineSpace2 s = uniform2(4, 1);
  SUBCASE("empty mark set") {
    const SplineSpace2 r = s.refine({});
    CHECK(r.dim() == s.dim());
    CHECK(r.mesh().num_elements() == s.mesh().num_elements());
  }
  SUBCASE("one corner element adds three hats") {
    std::size_t corner = 0;
    for (std::size_t e = 0; e < s.mesh().num_elements(); ++e)
      if (s.mesh().element(e).index == Index<2>{0, 0}) corner = e;
    const SplineSpace2 r = s.refine({corner});
    CHECK(r.dim() == s.dim() + 3);
    CHECK(r.mesh().num_elements() == s.mesh().num_elements() + 3);
  }
  SUBCASE("two passes equal one pass with the union") {
    const auto& m = s.mesh();
    const SplineSpace2 once = s.refine({0, 5});
    // element ids of the same cells after the first pass
    const auto id = [&](const SplineSpace2& sp, std::size_t e) { return *sp.mesh().element_id(m.element(e)); };
    const SplineSpace2 first = s.refine({0});
    const SplineSpace2 twice = first.refine({id(first, 5)});
    std::set<std::pair<int, std::pair<int, int>>> a, b;
    for (const auto& c : once.mesh().elements()) a.insert({c.level, {c.index[0], c.index[1]}});
    for (const auto& c : twice.mesh().elements()) b.insert({c.level, {c.index[0], c.index[1]}});
    CHECK(a == b);
    CHECK(once.dim() == twice.dim());
  }
}

TEST_CASE("active elements tile the root box") {
  const SplineSpace2 s = graded(2);
  double area = 0;
  for (std::size_t e = 0; e < s.mesh().num_elements(); ++e) area += s.mesh().element_box(e).volume();
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t e = 0; e < s.mesh().num_elements(); ++e)
    CHECK(s.mesh().locate(s.mesh().element_box(e).center()) == e);
}

TEST_CASE("level jump bound") {
  HierarchicalMesh2 m(RectMesh2::uniform({{0, 0}, {1, 1}}, {4, 4}), 1);
  for (int r = 0; r < 3; ++r) {
    std::size_t corner = m.locate({0.01, 0.01});
    m = m.refine({corner});
  }
  // neighbours across every face differ by at most one level
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Box2 b = m.element_box(e);
    for (int a = 0; a < 2; ++a)
      for (double side : {-1e-9, 1e-9}) {
        Point2 x = b.center();
        x[a] = side < 0 ? b.lo[a] + side : b.hi[a] + side;
        if (x[a] <= 0 || x[a] >= 1) continue;
        CHECK(std::abs(m.element(m.locate(x)).level - m.element(e).level) <= 1);
      }
  }
}
