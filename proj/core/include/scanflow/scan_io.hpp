#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scanflow/geometry.hpp"

namespace scanflow {

/// Malformed or truncated scan input. `offset` is the byte position of the
/// problem when known.
class ScanError : public std::runtime_error {
 public:
  ScanError(const std::string& what, std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(what), offset_(offset) {}
  std::optional<std::size_t> offset() const { return offset_; }

 private:
  std::optional<std::size_t> offset_;
};

/// Rectilinear 2D voxel image. Voxel (i, j) has i along x and j along y,
/// with j = 0 the bottom row; values are stored with i fastest.
struct GrayscaleGrid {
  std::array<int, 2> dims{0, 0};
  Vec<2> spacing{1.0, 1.0};
  Vec<2> origin{0.0, 0.0};
  std::vector<double> values;  // normalized to [0,1]
  std::array<double, 2> raw_range{0.0, 0.0};
  int maxval = 255;

  std::size_t size() const { return values.size(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * dims[0] + i; }
  double at(int i, int j) const { return values[index(i, j)]; }
  Box2 box() const {
    return {origin, {origin[0] + dims[0] * spacing[0], origin[1] + dims[1] * spacing[1]}};
  }
  Box2 voxel(int i, int j) const {
    return {{origin[0] + i * spacing[0], origin[1] + j * spacing[1]},
            {origin[0] + (i + 1) * spacing[0], origin[1] + (j + 1) * spacing[1]}};
  }
  Point2 voxel_center(int i, int j) const {
    return {origin[0] + (i + 0.5) * spacing[0], origin[1] + (j + 0.5) * spacing[1]};
  }
  double voxel_volume() const { return spacing[0] * spacing[1]; }
  double mean() const;

  /// Grid with the given values; raw_range is taken from the values.
  static GrayscaleGrid from_values(std::array<int, 2> dims, std::vector<double> values,
                                   Vec<2> spacing = {1.0, 1.0}, Vec<2> origin = {0.0, 0.0});
};

struct VoxelDomain {
  const GrayscaleGrid* grid = nullptr;
  std::vector<std::uint8_t> mask;
  double threshold = 0.5;
  std::size_t count = 0;
};

GrayscaleGrid parse_pgm(std::string_view bytes);
GrayscaleGrid load_pgm(const std::filesystem::path& path);
void write_pgm(const GrayscaleGrid& grid, const std::filesystem::path& path, bool binary = false);
std::string format_pgm(const GrayscaleGrid& grid, bool binary = false);

VoxelDomain threshold(const GrayscaleGrid& grid, double g_crit);

struct ScanMetadata {
  std::optional<Vec<2>> spacing;
  std::optional<Vec<2>> origin;
};

/// Reads an INI sidecar with a [scan] section (spacing_x, spacing_y,
/// origin_x, origin_y). Missing keys stay unset.
ScanMetadata load_sidecar(const std::filesystem::path& path);
void apply_metadata(GrayscaleGrid& grid, const ScanMetadata& meta);

}  // namespace scanflow
