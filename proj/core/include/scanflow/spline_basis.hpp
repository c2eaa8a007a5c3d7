#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "scanflow/geometry.hpp"

namespace scanflow {

template <int D>
using Index = std::array<int, D>;

/// Out-of-domain evaluation or inconsistent mesh input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Tensor mesh given by strictly increasing breakpoints per axis.
template <int D>
class RectMesh {
 public:
  RectMesh() = default;
  explicit RectMesh(std::array<std::vector<double>, D> breaks);
  static RectMesh uniform(const Box<D>& box, const Index<D>& cells);

  const std::vector<double>& breaks(int axis) const { return breaks_[axis]; }
  int cells(int axis) const { return static_cast<int>(breaks_[axis].size()) - 1; }
  std::size_t num_elements() const;
  Box<D> box() const;
  Box<D> element(const Index<D>& c) const;

 private:
  std::array<std::vector<double>, D> breaks_;
};

template <int D>
struct Cell {
  int level = 0;
  Index<D> index{};
  bool operator==(const Cell&) const = default;
};

/// Dyadically refined mesh. Level-l cells bisect level-(l-1) cells once per axis.
template <int D>
class HierarchicalMesh {
 public:
  HierarchicalMesh() = default;
  /// max_level_jump < 0 means no grading is enforced.
  explicit HierarchicalMesh(RectMesh<D> root, int max_level_jump = -1);

  const RectMesh<D>& root() const { return root_; }
  int max_level_jump() const { return max_level_jump_; }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  int cells(int level, int axis) const { return root_.cells(axis) << level; }
  const std::vector<double>& breaks(int level, int axis) const;
  Box<D> box() const { return root_.box(); }
  Box<D> cell_box(const Cell<D>& c) const;

  /// Cell exists when it is active or refined.
  bool exists(int level, const Index<D>& idx) const;
  bool refined(int level, const Index<D>& idx) const;
  /// Existing cells of a level in lexicographic order (last axis slowest).
  std::vector<Index<D>> level_cells(int level) const;

  const std::vector<Cell<D>>& elements() const { return active_; }
  std::size_t num_elements() const { return active_.size(); }
  const Cell<D>& element(std::size_t e) const { return active_[e]; }
  Box<D> element_box(std::size_t e) const { return cell_box(active_[e]); }
  std::optional<std::size_t> element_id(const Cell<D>& c) const;

  /// Active element covering the region of `c` when that element sits at
  /// c.level or coarser; nullopt when `c` is refined further.
  std::optional<std::size_t> covering(const Cell<D>& c) const;

  /// Active element containing x (ties resolved towards the upper cell).
  std::size_t locate(const Vec<D>& x) const;

  /// Bisects the marked active elements (plus whatever the grading bound requires).
  HierarchicalMesh refine(const std::vector<std::size_t>& marked) const;

  static std::uint64_t key(const Index<D>& idx);

 private:
  void ensure_level(int level);
  void rebuild_active();
  void mark_refined(int level, const Index<D>& idx);

  RectMesh<D> root_;
  int max_level_jump_ = -1;
  std::vector<std::unordered_map<std::uint64_t, bool>> levels_;  // exists -> refined flag
  std::vector<std::array<std::vector<double>, D>> breaks_;
  std::vector<Cell<D>> active_;
  std::vector<std::unordered_map<std::uint64_t, std::size_t>> active_id_;
};

/// Derivative tables of the (k+1) nonzero 1D B-splines per axis at a point.
/// ders[a][m * (k+1) + j] is the m-th derivative of local function j on axis a.
template <int D>
struct LocalDers {
  int order = 0;
  std::array<std::vector<double>, D> ders;
};

/// Truncated hierarchical B-spline space of degree k and regularity k-1.
template <int D>
class SplineSpace {
 public:
  struct Function {
    int level = 0;
    Index<D> index{};
  };

  SplineSpace(HierarchicalMesh<D> mesh, int k);

  int degree() const { return k_; }
  std::size_t dim() const { return functions_.size(); }
  int local_size() const { return nloc_; }
  const HierarchicalMesh<D>& mesh() const { return mesh_; }
  const Function& function(std::size_t i) const { return functions_[i]; }
  /// Support of the untruncated B-spline behind function i.
  Box<D> support(std::size_t i) const;
  const std::vector<double>& knots(int level, int axis) const { return knots_[level][axis]; }

  const std::vector<std::size_t>& element_functions(std::size_t e) const { return elem_funcs_[e]; }
  /// Rows: element_functions(e); columns: local tensor B-splines of the
  /// element's level, local index j0 + (k+1) j1 (+ ...).
  const Eigen::MatrixXd& extraction(std::size_t e) const { return extraction_[e]; }
  const std::vector<std::size_t>& function_elements(std::size_t i) const { return func_elems_[i]; }

  void local_ders(std::size_t e, const Vec<D>& x, int order, LocalDers<D>& out) const;
  /// Tensor values of the local B-splines for derivative alpha.
  void local_values(const LocalDers<D>& ld, const Index<D>& alpha, double* out) const;

  /// Values (or derivatives) of element_functions(e) at x.
  Eigen::VectorXd eval_element(std::size_t e, const Vec<D>& x, const Index<D>& alpha = {}) const;
  /// One column per derivative multi-index.
  Eigen::MatrixXd eval_element(std::size_t e, const Vec<D>& x, const std::vector<Index<D>>& alphas) const;
  /// Same, into a reused buffer.
  void eval_element(std::size_t e, const Vec<D>& x, const std::vector<Index<D>>& alphas, Eigen::MatrixXd& out) const;

  struct SparseValues {
    std::vector<std::size_t> ids;
    std::vector<double> values;
  };
  SparseValues eval(const Vec<D>& x, const Index<D>& alpha = {}) const;

  SplineSpace refine(const std::vector<std::size_t>& marked) const;

 private:
  bool in_region(int level, const Index<D>& j) const;
  bool fully_refined(int level, const Index<D>& j) const;

  HierarchicalMesh<D> mesh_;
  int k_;
  int nloc_;
  std::vector<std::array<std::vector<double>, D>> knots_;
  std::vector<Function> functions_;
  std::vector<std::unordered_map<std::uint64_t, std::size_t>> function_id_;
  std::vector<std::vector<std::size_t>> elem_funcs_;
  std::vector<Eigen::MatrixXd> extraction_;
  std::vector<std::vector<std::size_t>> func_elems_;
  mutable std::vector<std::unordered_map<std::uint64_t, bool>> region_cache_;
};

/// All nonzero B-spline derivatives up to order n at u for knot span `span`
/// (Piegl-Tiller). out has (n+1)*(p+1) entries, row m holds the m-th derivatives.
void bspline_ders(const std::vector<double>& U, int span, int p, double u, int n, double* out);

using RectMesh2 = RectMesh<2>;
using HierarchicalMesh2 = HierarchicalMesh<2>;
using SplineSpace2 = SplineSpace<2>;

extern template class RectMesh<1>;
extern template class RectMesh<2>;
extern template class HierarchicalMesh<1>;
extern template class HierarchicalMesh<2>;
extern template class SplineSpace<1>;
extern template class SplineSpace<2>;

}  // namespace scanflow
