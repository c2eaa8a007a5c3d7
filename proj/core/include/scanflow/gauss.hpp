#pragma once

#include <vector>

#include "scanflow/geometry.hpp"

namespace scanflow {

/// One-dimensional rule on [0,1].
struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

struct QuadPoint {
  Point2 x{};
  double w = 0.0;
};

/// n-point Gauss-Legendre rule on [0,1] (exact to degree 2n-1).
const Rule1D& gauss_legendre(int n);

/// n-point Gauss-Jacobi rule on [0,1] for the weight (1-u)^alpha u^beta.
Rule1D gauss_jacobi(int n, double alpha, double beta);

/// Tensor Gauss rule with n points per axis.
void append_box_rule(const Box2& box, int n, std::vector<QuadPoint>& out);
std::vector<QuadPoint> box_rule(const Box2& box, int n);

/// Collapsed (Duffy) n x n rule on a triangle, exact to total degree 2n-1.
/// n = 1 is the centroid rule.
void append_triangle_rule(const Triangle& t, int n, std::vector<QuadPoint>& out);
std::vector<QuadPoint> triangle_rule(const Triangle& t, int n);

/// Gauss rule with n points along a segment; weights include the length.
void append_segment_rule(const Segment& s, int n, std::vector<QuadPoint>& out);

}  // namespace scanflow
