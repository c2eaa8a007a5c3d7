#include "scanflow/gauss.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace scanflow {
namespace {

constexpr int kMaxCached = 40;

// Golub-Welsch on the Jacobi matrix for weight (1-x)^a (1+x)^b on [-1,1].
Rule1D golub_welsch(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("quadrature: order must be >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  const double ab = a + b;
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * i + ab;
    J(i, i) = (i == 0) ? (b - a) / (ab + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (i + 1 < n) {
      const double m = i + 1;
      const double t = 2.0 * m + ab;
      const double off = std::sqrt(4.0 * m * (m + a) * (m + b) * (m + ab) /
                                   (t * t * (t + 1.0) * (t - 1.0)));
      J(i, i + 1) = J(i + 1, i) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) /
                     std::tgamma(ab + 2.0);
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  const double scale = std::pow(2.0, ab + 1.0);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    r.x[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
    r.w[i] = mu0 * v0 * v0 / scale;
  }
  return r;
}

// Newton polish of Legendre nodes; Golub-Welsch alone loses a few digits in
// the weights for larger n.
void polish_legendre(Rule1D& r) {
  const int n = static_cast<int>(r.x.size());
  for (int i = 0; i < n; ++i) {
    double x = 2.0 * r.x[i] - 1.0;
    double dp = 1.0;
    for (int it = 0; it < 4; ++it) {
      double p0 = 1.0, p1 = x;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      x -= p1 / dp;
    }
    r.x[i] = 0.5 * (x + 1.0);
    r.w[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

const std::vector<Rule1D>& legendre_table() {
  static const std::vector<Rule1D> table = [] {
    std::vector<Rule1D> t(kMaxCached + 1);
    for (int n = 1; n <= kMaxCached; ++n) {
      t[n] = golub_welsch(n, 0.0, 0.0);
      polish_legendre(t[n]);
    }
    return t;
  }();
  return table;
}

const std::vector<Rule1D>& jacobi10_table() {
  static const std::vector<Rule1D> table = [] {
    std::vector<Rule1D> t(kMaxCached + 1);
    for (int n = 1; n <= kMaxCached; ++n) t[n] = golub_welsch(n, 1.0, 0.0);
    return t;
  }();
  return table;
}

}  // namespace

const Rule1D& gauss_legendre(int n) {
  if (n < 1 || n > kMaxCached) throw std::invalid_argument("gauss_legendre: unsupported order");
  return legendre_table()[n];
}

Rule1D gauss_jacobi(int n, double alpha, double beta) { return golub_welsch(n, alpha, beta); }

void append_box_rule(const Box2& box, int n, std::vector<QuadPoint>& out) {
  const Rule1D& g = gauss_legendre(n);
  const double hx = box.extent(0), hy = box.extent(1);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      out.push_back({{box.lo[0] + hx * g.x[i], box.lo[1] + hy * g.x[j]}, g.w[i] * g.w[j] * hx * hy});
}

std::vector<QuadPoint> box_rule(const Box2& box, int n) {
  std::vector<QuadPoint> r;
  r.reserve(static_cast<size_t>(n * n));
  append_box_rule(box, n, r);
  return r;
}

void append_triangle_rule(const Triangle& t, int n, std::vector<QuadPoint>& out) {
  if (n > kMaxCached) throw std::invalid_argument("triangle_rule: unsupported order");
  const Rule1D& gu = jacobi10_table()[n];
  const Rule1D& gv = gauss_legendre(n);
  const double area2 = 2.0 * t.area();
  const Point2 e1 = t.b - t.a, e2 = t.c - t.a;
  for (int i = 0; i < n; ++i) {
    const double u = gu.x[i];
    for (int j = 0; j < n; ++j) {
      const double v = gv.x[j] * (1.0 - u);
      out.push_back({t.a + u * e1 + v * e2, gu.w[i] * gv.w[j] * area2});
    }
  }
}

std::vector<QuadPoint> triangle_rule(const Triangle& t, int n) {
  std::vector<QuadPoint> r;
  append_triangle_rule(t, n, r);
  return r;
}

void append_segment_rule(const Segment& s, int n, std::vector<QuadPoint>& out) {
  const Rule1D& g = gauss_legendre(n);
  const double len = s.length();
  for (int i = 0; i < n; ++i) out.push_back({s.a + g.x[i] * (s.b - s.a), g.w[i] * len});
}

}  // namespace scanflow
