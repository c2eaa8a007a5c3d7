#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>
#include <unordered_map>
#include <vector>

#include "scanflow/geometry.hpp"
#include "scanflow/spline_basis.hpp"

namespace scanflow {

struct LevelSetField;

/// Inside fragment of a cut leaf cell as a triangle fan around the midpoint.
struct Tessellation {
  std::vector<Triangle> inside;
  std::vector<Segment> boundary;  // zero point -> midpoint
  std::vector<Point2> normals;    // outward unit normal per boundary segment
  /// Inside part of each cell side: 0 bottom, 1 right, 2 top, 3 left.
  std::array<std::optional<Segment>, 4> edges;
  Point2 midpoint{};
  bool has_midpoint = false;

  double area() const;
};

struct SubCell {
  Box2 box;
  int level = 0;  // octree level below the element
  bool cut = false;
  int tessellation = -1;
};

struct Partition {
  std::vector<SubCell> cells;
  std::vector<Tessellation> tessellations;

  bool empty() const { return cells.empty(); }
  bool full() const { return cells.size() == 1 && !cells[0].cut && cells[0].level == 0; }
  double volume() const;
  double cell_volume(std::size_t c) const;
};

/// Inside portion of the segment a-b under linear interpolation of (va, vb).
std::optional<Segment> truncate_edge(const Point2& a, const Point2& b, double va, double vb);

/// Midpoint tessellation of one cell. v holds vertex values in lexicographic
/// order: (lo,lo), (hi,lo), (lo,hi), (hi,hi).
Tessellation mosaic_element(const std::array<double, 4>& v, const Box2& cell = {{0, 0}, {1, 1}});

/// Octree trimming from samples on the (2^depth+1)^2 vertex lattice of `box`
/// (x fastest).
Partition trim_element(std::span<const double> values, int depth, const Box2& box = {{0, 0}, {1, 1}});

/// Conservative bounds [lo, hi] of a level set over a box.
using LevelSetRange = std::function<std::pair<double, double>(const Box2&)>;

struct LevelSetFunction {
  std::function<double(const Point2&)> value;
  /// Optional. Lets trimming skip cells whose sign is already decided.
  LevelSetRange range;

  LevelSetFunction() = default;
  template <class F>
    requires(!std::same_as<std::decay_t<F>, LevelSetFunction> && std::invocable<F&, const Point2&>)
  LevelSetFunction(F f, LevelSetRange r = {}) : value(std::move(f)), range(std::move(r)) {}

  double operator()(const Point2& x) const { return value(x); }
  explicit operator bool() const { return static_cast<bool>(value); }
};

/// Samples f on the octree lattice of `box` (x fastest).
std::vector<double> sample_lattice(const LevelSetFunction& f, int depth, const Box2& box);

enum class ElementClass : std::uint8_t { Outside, Inside, Cut };

struct BoundaryFace {
  Segment seg;
  Point2 normal{};
  std::size_t element = 0;
  bool on_box = false;  // part of the background-box boundary
};

struct SkeletonFace {
  std::size_t minus = 0, plus = 0;  // plus lies on the +axis side
  int axis = 0;                     // normal direction
  Segment seg;
  double h = 0.0;  // smaller adjacent element size normal to the face
  bool ghost = false;
};

struct ImmersedMesh {
  const HierarchicalMesh2* mesh = nullptr;
  int depth = 0;
  std::vector<ElementClass> cls;  // per active element
  std::vector<Partition> partitions;
  std::vector<std::size_t> background;  // elements meeting the domain
  std::vector<std::size_t> crossed;     // elements cut by the boundary
  std::vector<BoundaryFace> boundary;
  std::vector<SkeletonFace> skeleton;
  std::vector<std::size_t> ghost;  // indices into skeleton
  std::vector<std::vector<std::size_t>> element_skeleton;
  std::vector<std::vector<std::size_t>> element_boundary;

  bool active(std::size_t e) const { return cls[e] != ElementClass::Outside; }
  /// Octree depth used for element e.
  int element_depth(std::size_t e) const;
  double inside_volume() const;
};

/// Partitions keyed by hierarchical cell. Valid for one level set and one
/// depth; adaptive loops reuse it because the geometry never changes.
class PartitionCache {
 public:
  const Partition* find(const Cell<2>& c) const;
  void insert(const Cell<2>& c, Partition p);
  std::size_t size() const { return map_.size(); }
  int depth = -1;

 private:
  std::unordered_map<std::uint64_t, Partition> map_;
};

/// `depth` applies to level-0 elements; an element at level l uses depth - l
/// so refined elements keep the same leaf resolution.
ImmersedMesh build_immersed_mesh(const LevelSetFunction& f, const HierarchicalMesh2& mesh, int depth,
                                 PartitionCache* cache = nullptr);
ImmersedMesh build_immersed_mesh(const LevelSetField& field, const HierarchicalMesh2& mesh, int depth);

}  // namespace scanflow
