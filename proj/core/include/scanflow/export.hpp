#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "scanflow/immersed_mesh.hpp"
#include "scanflow/segmentation.hpp"
#include "scanflow/stokes.hpp"

namespace scanflow {

/// Shortest representation that reads back to the same double.
std::string format_double(double v);

/// Comma separated rows with a header line.
class CsvWriter {
 public:
  using Cell = std::variant<double, long long, std::string>;

  CsvWriter(std::ostream& out, const std::vector<std::string>& header);
  void row(std::initializer_list<Cell> cells);
  void row(const std::vector<Cell>& cells);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

/// Legacy VTK polydata: sub-cells and fan triangles as polygons, boundary
/// faces as lines with a cell-data normal.
void write_vtk_cut_mesh(std::ostream& out, const ImmersedMesh& mesh);

/// Level set sampled on an nx x ny lattice of the spline box.
void write_vtk_level_set(std::ostream& out, const LevelSetField& field, int nx, int ny);

/// Velocity and pressure at the polygon vertices of the cut mesh.
void write_vtk_solution(std::ostream& out, const DiscreteSolution& sol);

}  // namespace scanflow
