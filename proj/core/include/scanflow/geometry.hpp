#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace scanflow {

template <int D>
using Vec = std::array<double, D>;
using Point2 = Vec<2>;

inline Point2 operator+(const Point2& a, const Point2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point2 operator-(const Point2& a, const Point2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point2 operator*(double s, const Point2& a) { return {s * a[0], s * a[1]}; }
inline double dot(const Point2& a, const Point2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Point2& a) { return std::hypot(a[0], a[1]); }
inline double cross(const Point2& a, const Point2& b) { return a[0] * b[1] - a[1] * b[0]; }

/// Axis-aligned box.
template <int D>
struct Box {
  Vec<D> lo{};
  Vec<D> hi{};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < D; ++a) v *= extent(a);
    return v;
  }
  double diameter() const {
    double s = 0.0;
    for (int a = 0; a < D; ++a) s += extent(a) * extent(a);
    return std::sqrt(s);
  }
  Vec<D> center() const {
    Vec<D> c;
    for (int a = 0; a < D; ++a) c[a] = 0.5 * (lo[a] + hi[a]);
    return c;
  }
  bool contains(const Vec<D>& x, double tol = 0.0) const {
    for (int a = 0; a < D; ++a)
      if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) return false;
    return true;
  }
  // Positive-measure overlap.
  bool overlaps(const Box& o) const {
    for (int a = 0; a < D; ++a)
      if (std::min(hi[a], o.hi[a]) <= std::max(lo[a], o.lo[a])) return false;
    return true;
  }
  Box intersect(const Box& o) const {
    Box r;
    for (int a = 0; a < D; ++a) {
      r.lo[a] = std::max(lo[a], o.lo[a]);
      r.hi[a] = std::min(hi[a], o.hi[a]);
    }
    return r;
  }
  bool operator==(const Box&) const = default;
};
using Box2 = Box<2>;

struct Segment {
  Point2 a{}, b{};
  double length() const { return norm(b - a); }
  Point2 midpoint() const { return 0.5 * (a + b); }
};

struct Triangle {
  Point2 a{}, b{}, c{};
  double signed_area() const { return 0.5 * cross(b - a, c - a); }
  double area() const { return std::abs(signed_area()); }
  Point2 centroid() const { return (1.0 / 3.0) * (a + b + c); }
};

}  // namespace scanflow
