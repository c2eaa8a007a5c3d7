#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "scanflow/gauss.hpp"
#include "scanflow/immersed_mesh.hpp"

namespace scanflow {

/// Tensor polynomials of degree 2k per axis on an element box.
class MomentBasis {
 public:
  enum class Kind { Legendre, Monomial };

  MomentBasis(const Box2& box, int k, Kind kind = Kind::Legendre);

  int degree() const { return 2 * k_; }
  int size() const { return (2 * k_ + 1) * (2 * k_ + 1); }
  const Box2& box() const { return box_; }
  Kind kind() const { return kind_; }
  void eval(const Point2& x, double* out) const;
  Eigen::VectorXd eval(const Point2& x) const;
  /// L2 Gramian over the full box.
  const Eigen::MatrixXd& gramian() const { return gram_; }
  Eigen::VectorXd integrate(const std::vector<QuadPoint>& rule) const;

 private:
  Box2 box_;
  int k_;
  Kind kind_;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> gram_ldlt_;
  friend struct Supremizer;
  friend Eigen::VectorXd apply_inverse_gramian(const MomentBasis&, const Eigen::VectorXd&);
};

Eigen::VectorXd apply_inverse_gramian(const MomentBasis& basis, const Eigen::VectorXd& v);

/// Per sub-cell points per axis; cut leaves apply the order on each fan triangle.
struct QuadRule {
  std::vector<int> orders;
  std::vector<QuadPoint> points;
  std::vector<std::size_t> offsets;  // sub-cell c owns points[offsets[c], offsets[c+1])

  std::size_t size() const { return points.size(); }
};

std::size_t subcell_point_count(const Partition& p, std::size_t c, int n);
void append_subcell_rule(const Partition& p, std::size_t c, int n, std::vector<QuadPoint>& out);
QuadRule make_rule(const Partition& p, std::vector<int> orders);
QuadRule equal_order_rule(const Partition& p, int points_per_axis);

/// Order used for the reference moments: 2k+1 per axis on boxes, collapsed
/// 2k+1 on triangles.
int exact_moment_order(int k);
std::vector<Eigen::VectorXd> subcell_exact_moments(const MomentBasis& basis, const Partition& p);
Eigen::VectorXd exact_moments(const MomentBasis& basis, const Partition& p);
std::vector<Eigen::VectorXd> subcell_moments(const MomentBasis& basis, const QuadRule& rule);

/// Worst-case unit polynomial for the moment defect xi - xi_bar.
struct Supremizer {
  Eigen::VectorXd coeffs;  // empty when the defect vanishes
  double error = 0.0;      // ||xi - xi_bar||_{G^-1}
};

Supremizer supremizer(const MomentBasis& basis, const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_bar);

/// |int p - sum w p| for the polynomial with the given coefficients.
double polynomial_error(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& xi,
                        const Eigen::VectorXd& xi_bar);

std::vector<double> subcell_errors(const Supremizer& s, const std::vector<Eigen::VectorXd>& exact,
                                   const std::vector<Eigen::VectorXd>& approx);

enum class MarkingStrategy { SubCell, OctreeLevel };

struct StoppingRule {
  std::size_t max_points = 0;  // 0 disables
  double target = 0.0;         // 0 disables
  int max_iterations = 100000;
};

struct TracePoint {
  int iteration = 0;
  std::size_t points = 0;
  double error = 0.0;
};

/// Incremental order raising on one cut element.
class QuadratureOptimizer {
 public:
  QuadratureOptimizer(const Partition& p, const Box2& element, int k, int order_cap = -1,
                      MomentBasis::Kind kind = MomentBasis::Kind::Legendre);

  void evaluate();
  /// Raises orders per strategy without exceeding `max_points` (0: no limit);
  /// false when nothing can be raised.
  bool step(MarkingStrategy strategy, std::size_t max_points = 0);

  const QuadRule& rule() const { return rule_; }
  double error() const { return sup_.error; }
  const Supremizer& current_supremizer() const { return sup_; }
  const std::vector<double>& subcell_error() const { return e_sub_; }
  const Eigen::VectorXd& xi() const { return xi_; }
  const Eigen::VectorXd& xi_bar() const { return xi_bar_; }
  const MomentBasis& basis() const { return basis_; }
  /// Points added by raising sub-cell c one order.
  std::size_t cost(std::size_t c) const;
  bool capped(std::size_t c) const { return rule_.orders[c] >= cap_; }

 private:
  const Partition& part_;
  MomentBasis basis_;
  int cap_;
  std::vector<Eigen::VectorXd> exact_sub_;
  Eigen::VectorXd xi_;
  std::vector<Eigen::VectorXd> approx_sub_;
  Eigen::VectorXd xi_bar_;
  QuadRule rule_;
  Supremizer sup_;
  std::vector<double> e_sub_;
};

struct OptimizeResult {
  QuadRule rule;
  std::vector<TracePoint> trace;
  double error = 0.0;
  bool unreachable = false;  // stopped with the criterion unmet
};

OptimizeResult optimize(const Partition& p, const Box2& element, int k, const StoppingRule& stop,
                        MarkingStrategy strategy, int order_cap = -1);

}  // namespace scanflow
