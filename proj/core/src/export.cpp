#include "scanflow/export.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace scanflow {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<Cell> cells) { row(std::vector<Cell>(cells)); }

void CsvWriter::row(const std::vector<Cell>& cells) {
  if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: column count mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    std::visit(
        [this](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>)
            out_ << format_double(v);
          else
            out_ << v;
        },
        cells[i]);
  }
  out_ << '\n';
}

namespace {

// One polygon per box sub-cell or fan triangle, in element order.
struct Polygons {
  std::vector<Point2> points;
  std::vector<std::vector<std::size_t>> polys;
  std::vector<std::size_t> element;
};

Polygons collect(const ImmersedMesh& mesh) {
  Polygons p;
  auto add = [&](std::initializer_list<Point2> pts, std::size_t e) {
    std::vector<std::size_t> ids;
    for (const auto& x : pts) {
      ids.push_back(p.points.size());
      p.points.push_back(x);
    }
    p.polys.push_back(std::move(ids));
    p.element.push_back(e);
  };
  for (std::size_t e : mesh.background) {
    const Partition& part = mesh.partitions[e];
    for (const SubCell& c : part.cells) {
      if (!c.cut) {
        add({{c.box.lo[0], c.box.lo[1]}, {c.box.hi[0], c.box.lo[1]}, {c.box.hi[0], c.box.hi[1]},
             {c.box.lo[0], c.box.hi[1]}},
            e);
        continue;
      }
      for (const auto& t : part.tessellations[c.tessellation].inside) add({t.a, t.b, t.c}, e);
    }
  }
  return p;
}

void write_points(std::ostream& out, const std::vector<Point2>& pts) {
  out << "POINTS " << pts.size() << " double\n";
  for (const auto& x : pts) out << format_double(x[0]) << ' ' << format_double(x[1]) << " 0\n";
}

void write_polygons(std::ostream& out, const Polygons& p) {
  std::size_t n = 0;
  for (const auto& poly : p.polys) n += poly.size() + 1;
  out << "POLYGONS " << p.polys.size() << ' ' << n << '\n';
  for (const auto& poly : p.polys) {
    out << poly.size();
    for (std::size_t i : poly) out << ' ' << i;
    out << '\n';
  }
}

}  // namespace

void write_vtk_cut_mesh(std::ostream& out, const ImmersedMesh& mesh) {
  Polygons p = collect(mesh);
  const std::size_t base = p.points.size();
  for (const auto& b : mesh.boundary) {
    p.points.push_back(b.seg.a);
    p.points.push_back(b.seg.b);
  }
  out << "# vtk DataFile Version 3.0\ncut mesh\nASCII\nDATASET POLYDATA\n";
  write_points(out, p.points);
  write_polygons(out, p);
  out << "LINES " << mesh.boundary.size() << ' ' << 3 * mesh.boundary.size() << '\n';
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i) out << "2 " << base + 2 * i << ' ' << base + 2 * i + 1 << '\n';
  // Cell data follows polygon order, then lines (VTK orders lines before polygons).
  const std::size_t nc = p.polys.size() + mesh.boundary.size();
  out << "CELL_DATA " << nc << "\nSCALARS element int 1\nLOOKUP_TABLE default\n";
  for (const auto& b : mesh.boundary) out << b.element << '\n';
  for (std::size_t e : p.element) out << e << '\n';
  out << "VECTORS normal double\n";
  for (const auto& b : mesh.boundary) out << format_double(b.normal[0]) << ' ' << format_double(b.normal[1]) << " 0\n";
  for (std::size_t i = 0; i < p.polys.size(); ++i) out << "0 0 0\n";
}

void write_vtk_level_set(std::ostream& out, const LevelSetField& field, int nx, int ny) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("write_vtk_level_set: need at least 2 samples per axis");
  const Box2 b = field.space->mesh().box();
  const double dx = b.extent(0) / (nx - 1), dy = b.extent(1) / (ny - 1);
  out << "# vtk DataFile Version 3.0\nlevel set\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << nx << ' ' << ny << " 1\nORIGIN " << format_double(b.lo[0]) << ' ' << format_double(b.lo[1])
      << " 0\nSPACING " << format_double(dx) << ' ' << format_double(dy) << " 1\n";
  out << "POINT_DATA " << static_cast<long long>(nx) * ny << "\nSCALARS f double 1\nLOOKUP_TABLE default\n";
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point2 x{i == nx - 1 ? b.hi[0] : b.lo[0] + i * dx, j == ny - 1 ? b.hi[1] : b.lo[1] + j * dy};
      out << format_double(field.value(x)) << '\n';
    }
}

void write_vtk_solution(std::ostream& out, const DiscreteSolution& sol) {
  const Polygons p = collect(*sol.disc.mesh);
  std::vector<Point2> vel(p.points.size());
  std::vector<double> pres(p.points.size());
  for (std::size_t i = 0; i < p.polys.size(); ++i)
    for (std::size_t id : p.polys[i]) {
      const auto d = sol.derivatives(p.element[i], p.points[id], {{0, 0}});
      vel[id] = {d(0, 0), d(1, 0)};
      pres[id] = d(2, 0);
    }
  out << "# vtk DataFile Version 3.0\nstokes solution\nASCII\nDATASET POLYDATA\n";
  write_points(out, p.points);
  write_polygons(out, p);
  out << "POINT_DATA " << p.points.size() << "\nVECTORS velocity double\n";
  for (const auto& v : vel) out << format_double(v[0]) << ' ' << format_double(v[1]) << " 0\n";
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (double v : pres) out << format_double(v) << '\n';
}

}  // namespace scanflow
