#include "scanflow/immersed_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scanflow/parallel.hpp"
#include "scanflow/segmentation.hpp"

namespace scanflow {

double Tessellation::area() const {
  double a = 0.0;
  for (const auto& t : inside) a += t.area();
  return a;
}

double Partition::cell_volume(std::size_t c) const {
  const SubCell& s = cells[c];
  return s.cut ? tessellations[s.tessellation].area() : s.box.volume();
}

double Partition::volume() const {
  double v = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) v += cell_volume(c);
  return v;
}

std::optional<Segment> truncate_edge(const Point2& a, const Point2& b, double va, double vb) {
  const bool pa = va > 0.0, pb = vb > 0.0;
  if (pa && pb) return Segment{a, b};
  if (!pa && !pb) return std::nullopt;
  const double t = va / (va - vb);
  const Point2 z = a + t * (b - a);
  return pa ? Segment{a, z} : Segment{z, b};
}

Tessellation mosaic_element(const std::array<double, 4>& v, const Box2& cell) {
  const std::array<Point2, 4> p = {Point2{cell.lo[0], cell.lo[1]}, Point2{cell.hi[0], cell.lo[1]},
                                   Point2{cell.hi[0], cell.hi[1]}, Point2{cell.lo[0], cell.hi[1]}};
  const std::array<double, 4> c = {v[0], v[1], v[3], v[2]};  // counter-clockwise
  Tessellation t;
  std::array<std::optional<Point2>, 4> zero;
  for (int i = 0; i < 4; ++i) {
    const int j = (i + 1) % 4;
    t.edges[i] = truncate_edge(p[i], p[j], c[i], c[j]);
    if ((c[i] > 0.0) != (c[j] > 0.0)) zero[i] = p[i] + (c[i] / (c[i] - c[j])) * (p[j] - p[i]);
  }
  const double cv = 0.25 * (c[0] + c[1] + c[2] + c[3]);
  const Point2 m0 = cell.center();
  Point2 sum{0, 0};
  int count = 0;
  for (int i = 0; i < 4; ++i)
    if ((cv > 0.0) != (c[i] > 0.0)) {
      sum = sum + (m0 + (cv / (cv - c[i])) * (p[i] - m0));
      ++count;
    }
  if (count == 0)
    for (int i = 0; i < 4; ++i)
      if (zero[i]) {
        sum = sum + *zero[i];
        ++count;
      }
  if (count == 0) {
    // No sign change anywhere: classify by majority sign.
    int pos = 0;
    for (double x : c) pos += x > 0.0;
    if (pos >= 2) {
      t.inside = {{p[0], p[1], m0}, {p[1], p[2], m0}, {p[2], p[3], m0}, {p[3], p[0], m0}};
      for (int i = 0; i < 4; ++i) t.edges[i] = Segment{p[i], p[(i + 1) % 4]};
    } else {
      t.edges = {};
    }
    return t;
  }
  const Point2 m = (1.0 / count) * sum;
  t.midpoint = m;
  t.has_midpoint = true;
  for (int i = 0; i < 4; ++i) {
    if (!t.edges[i]) continue;
    const Segment& s = *t.edges[i];
    if (s.length() > 0.0) t.inside.push_back({s.a, s.b, m});
  }
  for (int i = 0; i < 4; ++i) {
    if (!zero[i]) continue;
    const Point2 z = *zero[i];
    const Point2 d = m - z;
    const double len = norm(d);
    if (len <= 0.0) continue;
    Point2 n{d[1] / len, -d[0] / len};
    const Point2 inside_vertex = c[i] > 0.0 ? p[i] : p[(i + 1) % 4];
    if (dot(n, inside_vertex - z) > 0.0) n = -1.0 * n;
    t.boundary.push_back({z, m});
    t.normals.push_back(n);
  }
  return t;
}

namespace {

enum class Sign { Positive, NonPositive, Mixed };

// Bottom-up octree trim. A cell is kept whole when every lattice vertex in it
// is positive, dropped when none is, and otherwise split; leaves are
// tessellated. Identical to classifying each cell from all of its samples.
template <class Sample>
struct Trimmer {
  Sample at;  // (i, j) -> level-set value on the lattice
  const LevelSetRange* range;
  int n;  // samples per axis
  Box2 box;
  Partition out;

  Point2 vertex(int i, int j) const {
    return {box.lo[0] + box.extent(0) * i / (n - 1), box.lo[1] + box.extent(1) * j / (n - 1)};
  }

  Sign run(int i0, int j0, int s, int level) {
    const Box2 cell{vertex(i0, j0), vertex(i0 + s, j0 + s)};
    if (range) {
      const double pad = 1e-10 * (cell.extent(0) + cell.extent(1));
      const auto [lo, hi] = (*range)({{cell.lo[0] - pad, cell.lo[1] - pad}, {cell.hi[0] + pad, cell.hi[1] + pad}});
      // Margin against rounding in the samples themselves.
      const double tol = 1e-12 * (std::abs(lo) + std::abs(hi));
      if (lo > tol) {
        out.cells.push_back({cell, level, false, -1});
        return Sign::Positive;
      }
      if (hi < -tol) return Sign::NonPositive;
    }
    if (s == 1) {
      const std::array<double, 4> v = {at(i0, j0), at(i0 + 1, j0), at(i0, j0 + 1), at(i0 + 1, j0 + 1)};
      const int pos = static_cast<int>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0.0; }));
      if (pos == 4) {
        out.cells.push_back({cell, level, false, -1});
        return Sign::Positive;
      }
      if (pos == 0) return Sign::NonPositive;
      Tessellation t = mosaic_element(v, cell);
      if (!t.inside.empty()) {
        out.cells.push_back({cell, level, true, static_cast<int>(out.tessellations.size())});
        out.tessellations.push_back(std::move(t));
      }
      return Sign::Mixed;
    }
    const std::size_t mark = out.cells.size();
    const int h = s / 2;
    const std::array<Sign, 4> c = {run(i0, j0, h, level + 1), run(i0 + h, j0, h, level + 1),
                                   run(i0, j0 + h, h, level + 1), run(i0 + h, j0 + h, h, level + 1)};
    const auto all = [&c](Sign x) { return std::all_of(c.begin(), c.end(), [x](Sign y) { return y == x; }); };
    if (all(Sign::Positive)) {
      out.cells.resize(mark);
      out.cells.push_back({cell, level, false, -1});
      return Sign::Positive;
    }
    return all(Sign::NonPositive) ? Sign::NonPositive : Sign::Mixed;
  }
};

template <class Sample>
Partition trim(Sample at, const LevelSetRange* range, int depth, const Box2& box) {
  Trimmer<Sample> t{std::move(at), range, (1 << depth) + 1, box, {}};
  t.run(0, 0, t.n - 1, 0);
  return std::move(t.out);
}

Point2 lattice_point(const Box2& box, int n, int i, int j) {
  Point2 x{box.lo[0] + box.extent(0) * i / (n - 1), box.lo[1] + box.extent(1) * j / (n - 1)};
  if (i == n - 1) x[0] = box.hi[0];
  if (j == n - 1) x[1] = box.hi[1];
  return x;
}

}  // namespace

Partition trim_element(std::span<const double> values, int depth, const Box2& box) {
  if (depth < 0 || depth > 20) throw std::invalid_argument("trim_element: depth out of range");
  const int n = (1 << depth) + 1;
  if (values.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("trim_element: expected (2^depth+1)^2 samples");
  return trim([values, n](int i, int j) { return values[static_cast<std::size_t>(j) * n + i]; }, nullptr, depth, box);
}

std::vector<double> sample_lattice(const LevelSetFunction& f, int depth, const Box2& box) {
  const int n = (1 << depth) + 1;
  std::vector<double> v(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(j) * n + i] = f(lattice_point(box, n, i, j));
  return v;
}

int ImmersedMesh::element_depth(std::size_t e) const {
  return std::max(0, depth - mesh->element(e).level);
}

double ImmersedMesh::inside_volume() const {
  double v = 0.0;
  for (const auto& p : partitions) v += p.volume();
  return v;
}

namespace {

std::uint64_t cell_key(const Cell<2>& c) {
  return HierarchicalMesh2::key(c.index) | (static_cast<std::uint64_t>(c.level) << 42);
}

}  // namespace

const Partition* PartitionCache::find(const Cell<2>& c) const {
  const auto it = map_.find(cell_key(c));
  return it == map_.end() ? nullptr : &it->second;
}

void PartitionCache::insert(const Cell<2>& c, Partition p) { map_[cell_key(c)] = std::move(p); }

ImmersedMesh build_immersed_mesh(const LevelSetFunction& f, const HierarchicalMesh2& mesh, int depth,
                                 PartitionCache* cache) {
  ImmersedMesh im;
  im.mesh = &mesh;
  im.depth = depth;
  const std::size_t ne = mesh.num_elements();
  im.cls.assign(ne, ElementClass::Outside);
  im.partitions.resize(ne);
  if (cache) {
    if (cache->depth >= 0 && cache->depth != depth) throw std::invalid_argument("build_immersed_mesh: cache depth differs");
    cache->depth = depth;
  }
  std::vector<std::size_t> todo;
  for (std::size_t e = 0; e < ne; ++e) {
    const Partition* hit = cache ? cache->find(mesh.element(e)) : nullptr;
    if (hit)
      im.partitions[e] = *hit;
    else
      todo.push_back(e);
  }
  parallel_for(todo.size(), [&](std::size_t t) {
    const std::size_t e = todo[t];
    const Box2 b = mesh.element_box(e);
    const int d = std::max(0, depth - mesh.element(e).level);
    const int n = (1 << d) + 1;
    im.partitions[e] = trim([&f, &b, n](int i, int j) { return f(lattice_point(b, n, i, j)); },
                            f.range ? &f.range : nullptr, d, b);
  });
  if (cache)
    for (std::size_t e : todo) cache->insert(mesh.element(e), im.partitions[e]);
  for (std::size_t e = 0; e < ne; ++e) {
    const Partition& p = im.partitions[e];
    im.cls[e] = p.empty() ? ElementClass::Outside : (p.full() ? ElementClass::Inside : ElementClass::Cut);
  }
  im.element_skeleton.assign(ne, {});
  im.element_boundary.assign(ne, {});
  const Box2 outer = mesh.box();
  const double tol = 1e-12 * std::max(outer.extent(0), outer.extent(1));
  for (std::size_t e = 0; e < ne; ++e) {
    if (im.cls[e] == ElementClass::Outside) continue;
    im.background.push_back(e);
    if (im.cls[e] == ElementClass::Cut) im.crossed.push_back(e);
    const Partition& p = im.partitions[e];
    for (const auto& t : p.tessellations)
      for (std::size_t s = 0; s < t.boundary.size(); ++s) {
        im.element_boundary[e].push_back(im.boundary.size());
        im.boundary.push_back({t.boundary[s], t.normals[s], e, false});
      }
    // Portions of the background-box boundary inside the domain.
    for (const SubCell& c : p.cells) {
      const std::array<bool, 4> on = {std::abs(c.box.lo[1] - outer.lo[1]) < tol,
                                      std::abs(c.box.hi[0] - outer.hi[0]) < tol,
                                      std::abs(c.box.hi[1] - outer.hi[1]) < tol,
                                      std::abs(c.box.lo[0] - outer.lo[0]) < tol};
      const std::array<Point2, 4> normals = {Point2{0, -1}, Point2{1, 0}, Point2{0, 1}, Point2{-1, 0}};
      const std::array<Segment, 4> sides = {
          Segment{{c.box.lo[0], c.box.lo[1]}, {c.box.hi[0], c.box.lo[1]}},
          Segment{{c.box.hi[0], c.box.lo[1]}, {c.box.hi[0], c.box.hi[1]}},
          Segment{{c.box.hi[0], c.box.hi[1]}, {c.box.lo[0], c.box.hi[1]}},
          Segment{{c.box.lo[0], c.box.hi[1]}, {c.box.lo[0], c.box.lo[1]}}};
      for (int s = 0; s < 4; ++s) {
        if (!on[s]) continue;
        std::optional<Segment> seg = c.cut ? p.tessellations[c.tessellation].edges[s] : sides[s];
        if (!seg || seg->length() <= 0.0) continue;
        im.element_boundary[e].push_back(im.boundary.size());
        im.boundary.push_back({*seg, normals[s], e, true});
      }
    }
  }
  // Skeleton faces, represented on the finer side.
  for (std::size_t e : im.background) {
    const Cell<2>& c = mesh.element(e);
    const Box2 b = mesh.element_box(e);
    for (int axis = 0; axis < 2; ++axis)
      for (int dir : {-1, 1}) {
        Cell<2> nb = c;
        nb.index[axis] += dir;
        const auto cov = mesh.covering(nb);
        if (!cov) continue;  // outer boundary or finer neighbours
        const std::size_t o = *cov;
        if (im.cls[o] == ElementClass::Outside) continue;
        const int ol = mesh.element(o).level;
        if (ol == c.level && dir < 0) continue;
        SkeletonFace f;
        f.axis = axis;
        f.minus = dir > 0 ? e : o;
        f.plus = dir > 0 ? o : e;
        const double x = dir > 0 ? b.hi[axis] : b.lo[axis];
        const int t = 1 - axis;
        Point2 a{}, bb{};
        a[axis] = bb[axis] = x;
        a[t] = b.lo[t];
        bb[t] = b.hi[t];
        f.seg = {a, bb};
        f.h = std::min(b.extent(axis), mesh.element_box(o).extent(axis));
        f.ghost = im.cls[e] == ElementClass::Cut || im.cls[o] == ElementClass::Cut;
        const std::size_t id = im.skeleton.size();
        if (f.ghost) im.ghost.push_back(id);
        im.element_skeleton[f.minus].push_back(id);
        im.element_skeleton[f.plus].push_back(id);
        im.skeleton.push_back(f);
      }
  }
  return im;
}

ImmersedMesh build_immersed_mesh(const LevelSetField& field, const HierarchicalMesh2& mesh, int depth) {
  const Box2 a = field.space->mesh().box(), b = mesh.box();
  for (int d = 0; d < 2; ++d) {
    const double tol = 1e-10 * a.extent(d);
    if (std::abs(a.lo[d] - b.lo[d]) > tol || std::abs(a.hi[d] - b.hi[d]) > tol)
      throw DomainError("build_immersed_mesh: level set and mesh boxes differ");
  }
  // Local B-spline coefficients bound the field on each element (convex hull).
  const SplineSpace2& sp = *field.space;
  std::vector<std::pair<double, double>> bounds(sp.mesh().num_elements());
  for (std::size_t e = 0; e < bounds.size(); ++e) {
    const auto& ids = sp.element_functions(e);
    Eigen::VectorXd c(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) c[static_cast<Eigen::Index>(i)] = field.coeffs[static_cast<Eigen::Index>(ids[i])];
    const Eigen::VectorXd d = sp.extraction(e).transpose() * c;
    bounds[e] = {d.minCoeff(), d.maxCoeff()};
  }
  const LevelSetRange range = [&sp, &bounds](const Box2& q) -> std::pair<double, double> {
    const std::size_t e = sp.mesh().locate(q.center());
    const Box2 eb = sp.mesh().element_box(e);
    const double tol = 1e-9 * (q.extent(0) + q.extent(1));
    if (q.lo[0] < eb.lo[0] - tol || q.lo[1] < eb.lo[1] - tol || q.hi[0] > eb.hi[0] + tol || q.hi[1] > eb.hi[1] + tol)
      return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    return bounds[e];
  };
  return build_immersed_mesh(LevelSetFunction([&field](const Point2& x) { return field.value(x); }, range), mesh, depth);
}

}  // namespace scanflow
