#include "scanflow/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "scanflow/gauss.hpp"
#include "scanflow/parallel.hpp"

namespace scanflow {

double LevelSetField::value(const Point2& x) const { return value(space->mesh().locate(x), x); }

double LevelSetField::value(std::size_t e, const Point2& x) const {
  const Eigen::VectorXd phi = space->eval_element(e, x);
  const auto& ids = space->element_functions(e);
  double f = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) f += phi[static_cast<int>(i)] * coeffs[static_cast<int>(ids[i])];
  return f;
}

LevelSetField LevelSetField::with_threshold(double t) const {
  LevelSetField out = *this;
  out.coeffs.array() += f_crit - t;
  out.f_crit = t;
  return out;
}

double LevelSetField::mean() const {
  const auto& mesh = space->mesh();
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    for (const auto& q : box_rule(mesh.element_box(e), space->degree() + 1)) sum += q.w * value(e, q.x);
  return sum / mesh.box().volume() + f_crit;
}

namespace {

// Voxel index range [first, last] overlapping [lo, hi] with positive measure.
std::pair<int, int> voxel_range(double lo, double hi, double origin, double dx, int n) {
  const double tol = 1e-9;
  int first = static_cast<int>(std::floor((lo - origin) / dx + tol));
  int last = static_cast<int>(std::ceil((hi - origin) / dx - tol)) - 1;
  return {std::clamp(first, 0, n - 1), std::clamp(last, 0, n - 1)};
}

void check_box(const GrayscaleGrid& grid, const SplineSpace2& space) {
  const Box2 a = grid.box(), b = space.mesh().box();
  for (int d = 0; d < 2; ++d) {
    const double tol = 1e-10 * a.extent(d);
    if (std::abs(a.lo[d] - b.lo[d]) > tol || std::abs(a.hi[d] - b.hi[d]) > tol)
      throw DomainError("smooth: spline mesh box does not match the scan domain");
  }
}

}  // namespace

LevelSetField smooth(const GrayscaleGrid& grid, std::shared_ptr<const SplineSpace2> space,
                     double f_crit) {
  check_box(grid, *space);
  const int k = space->degree();
  const std::size_t ne = space->mesh().num_elements();
  std::vector<Eigen::VectorXd> num(ne), den(ne);
  const Rule1D& g = gauss_legendre(k + 1);
  parallel_for(ne, [&](std::size_t e) {
    const Box2 box = space->mesh().element_box(e);
    const int nf = static_cast<int>(space->element_functions(e).size());
    Eigen::VectorXd n = Eigen::VectorXd::Zero(nf), d = Eigen::VectorXd::Zero(nf);
    const auto [i0, i1] = voxel_range(box.lo[0], box.hi[0], grid.origin[0], grid.spacing[0], grid.dims[0]);
    const auto [j0, j1] = voxel_range(box.lo[1], box.hi[1], grid.origin[1], grid.spacing[1], grid.dims[1]);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        const Box2 piece = box.intersect(grid.voxel(i, j));
        if (piece.extent(0) <= 0 || piece.extent(1) <= 0) continue;
        const double gv = grid.at(i, j);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(nf);
        for (int b = 0; b <= k; ++b)
          for (int a = 0; a <= k; ++a) {
            const Point2 x{piece.lo[0] + g.x[a] * piece.extent(0), piece.lo[1] + g.x[b] * piece.extent(1)};
            acc += (g.w[a] * g.w[b] * piece.volume()) * space->eval_element(e, x);
          }
        d += acc;
        n += gv * acc;
      }
    num[e] = std::move(n);
    den[e] = std::move(d);
  });
  Eigen::VectorXd N = Eigen::VectorXd::Zero(static_cast<int>(space->dim()));
  Eigen::VectorXd W = N;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ids = space->element_functions(e);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      N[static_cast<int>(ids[i])] += num[e][static_cast<int>(i)];
      W[static_cast<int>(ids[i])] += den[e][static_cast<int>(i)];
    }
  }
  LevelSetField f;
  f.space = std::move(space);
  f.coeffs = N.cwiseQuotient(W).array() - f_crit;
  f.f_crit = f_crit;
  return f;
}

BoundReport check_bounds(const LevelSetField& field, const GrayscaleGrid& grid, int samples_per_axis) {
  const SplineSpace2& space = *field.space;
  const std::size_t nf = space.dim();
  std::vector<double> gmin(nf), gmax(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const Box2 s = space.support(f);
    const auto [i0, i1] = voxel_range(s.lo[0], s.hi[0], grid.origin[0], grid.spacing[0], grid.dims[0]);
    const auto [j0, j1] = voxel_range(s.lo[1], s.hi[1], grid.origin[1], grid.spacing[1], grid.dims[1]);
    double lo = 1e300, hi = -1e300;
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        lo = std::min(lo, grid.at(i, j));
        hi = std::max(hi, grid.at(i, j));
      }
    gmin[f] = lo;
    gmax[f] = hi;
  }
  // Elements overlapping each voxel.
  std::vector<std::vector<std::size_t>> voxel_elems(grid.size());
  for (std::size_t e = 0; e < space.mesh().num_elements(); ++e) {
    const Box2 b = space.mesh().element_box(e);
    const auto [i0, i1] = voxel_range(b.lo[0], b.hi[0], grid.origin[0], grid.spacing[0], grid.dims[0]);
    const auto [j0, j1] = voxel_range(b.lo[1], b.hi[1], grid.origin[1], grid.spacing[1], grid.dims[1]);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        if (b.overlaps(grid.voxel(i, j))) voxel_elems[grid.index(i, j)].push_back(e);
  }
  std::vector<double> worst(grid.size(), 0.0);
  parallel_for(grid.size(), [&](std::size_t v) {
    const int i = static_cast<int>(v % grid.dims[0]), j = static_cast<int>(v / grid.dims[0]);
    double lo = 1e300, hi = -1e300;
    for (std::size_t e : voxel_elems[v])
      for (std::size_t f : space.element_functions(e)) {
        lo = std::min(lo, gmin[f]);
        hi = std::max(hi, gmax[f]);
      }
    const Box2 vb = grid.voxel(i, j);
    double w = 0.0;
    for (int b = 0; b < samples_per_axis; ++b)
      for (int a = 0; a < samples_per_axis; ++a) {
        const Point2 x{vb.lo[0] + (a + 0.5) / samples_per_axis * vb.extent(0),
                       vb.lo[1] + (b + 0.5) / samples_per_axis * vb.extent(1)};
        const double f = field.raw(x);
        w = std::max({w, lo - f, f - hi});
      }
    worst[v] = w;
  });
  BoundReport r;
  r.samples = grid.size() * samples_per_axis * samples_per_axis;
  for (std::size_t v = 0; v < grid.size(); ++v)
    if (worst[v] > r.worst_violation) {
      r.worst_violation = worst[v];
      r.worst_voxel = v;
    }
  return r;
}

double AttenuationQuery::sigma(double h) const { return h * std::sqrt((k + 1) / 6.0); }

double predict_attenuation(const AttenuationQuery& q) {
  if (!(q.lhat > 0) || q.k < 1) throw std::invalid_argument("predict_attenuation: need lhat > 0, k >= 1");
  const double kp = q.k + 1.0;
  return q.lhat * std::sqrt(3.0 / (std::numbers::pi * kp)) * std::exp(-3.0 * q.lhat * q.lhat / (16.0 * kp));
}

int count_components(const std::vector<std::uint8_t>& mask, int nx, int ny) {
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<int> stack;
  int count = 0;
  for (int s = 0; s < nx * ny; ++s) {
    if (!mask[s] || seen[s]) continue;
    ++count;
    seen[s] = 1;
    stack.assign(1, s);
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      const int i = c % nx, j = c / nx;
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& p : nb) {
        if (p[0] < 0 || p[0] >= nx || p[1] < 0 || p[1] >= ny) continue;
        const int q = p[1] * nx + p[0];
        if (mask[q] && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
  }
  return count;
}

namespace {

std::vector<int> window_starts(int n, int window, int stride) {
  std::vector<int> s;
  if (n <= window) return {0};
  for (int i = 0; i + window <= n; i += stride) s.push_back(i);
  if (s.back() + window < n) s.push_back(n - window);
  return s;
}

}  // namespace

std::vector<WindowMismatch> find_topology_mismatches(const GrayscaleGrid& grid,
                                                     const LevelSetField& field, double g_crit,
                                                     int window) {
  if (window < 2) throw std::invalid_argument("preserve_topology: window must be >= 2");
  const int nx = grid.dims[0], ny = grid.dims[1];
  std::vector<std::uint8_t> vm(grid.size()), fm(grid.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      vm[grid.index(i, j)] = grid.at(i, j) > g_crit;
      fm[grid.index(i, j)] = field.value(grid.voxel_center(i, j)) > 0.0;
    }
  const int stride = std::max(1, window / 2);
  const auto si = window_starts(nx, window, stride), sj = window_starts(ny, window, stride);
  std::vector<WindowMismatch> out;
  for (int j0 : sj)
    for (int i0 : si) {
      const int wx = std::min(window, nx - i0), wy = std::min(window, ny - j0);
      std::vector<std::uint8_t> a(wx * wy), b(wx * wy);
      for (int j = 0; j < wy; ++j)
        for (int i = 0; i < wx; ++i) {
          a[j * wx + i] = vm[grid.index(i0 + i, j0 + j)];
          b[j * wx + i] = fm[grid.index(i0 + i, j0 + j)];
        }
      const int ca = count_components(a, wx, wy), cb = count_components(b, wx, wy);
      if (ca != cb) out.push_back({i0, j0, wx, wy, ca, cb});
    }
  return out;
}

TopologyReport preserve_topology(const GrayscaleGrid& grid, const LevelSetField& field,
                                 double g_crit, int window, int max_depth) {
  if (max_depth < 1) throw std::invalid_argument("preserve_topology: max_depth must be >= 1");
  TopologyReport rep;
  rep.field = field;
  rep.active_elements.push_back(field.space->mesh().num_elements());
  while (true) {
    rep.remaining = find_topology_mismatches(grid, rep.field, g_crit, window);
    if (rep.remaining.empty()) break;
    const auto& mesh = rep.field.space->mesh();
    std::vector<std::uint8_t> mark(mesh.num_elements(), 0);
    for (const auto& w : rep.remaining) {
      const Box2 wb{grid.voxel(w.i0, w.j0).lo, grid.voxel(w.i0 + w.size_x - 1, w.j0 + w.size_y - 1).hi};
      for (std::size_t e = 0; e < mesh.num_elements(); ++e)
        if (mesh.element(e).level < max_depth && mesh.element_box(e).overlaps(wb)) mark[e] = 1;
    }
    std::vector<std::size_t> marked;
    for (std::size_t e = 0; e < mark.size(); ++e)
      if (mark[e]) marked.push_back(e);
    if (marked.empty()) break;
    auto space = std::make_shared<const SplineSpace2>(rep.field.space->refine(marked));
    rep.field = smooth(grid, space, rep.field.f_crit);
    rep.refined_elements += marked.size();
    ++rep.iterations;
    rep.active_elements.push_back(space->mesh().num_elements());
  }
  return rep;
}

}  // namespace scanflow
