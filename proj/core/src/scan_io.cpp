#include "scanflow/scan_io.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace scanflow {

double GrayscaleGrid::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

GrayscaleGrid GrayscaleGrid::from_values(std::array<int, 2> dims, std::vector<double> values,
                                         Vec<2> spacing, Vec<2> origin) {
  if (dims[0] <= 0 || dims[1] <= 0) throw ScanError("grid dims must be positive");
  if (values.size() != static_cast<std::size_t>(dims[0]) * dims[1])
    throw ScanError("grid value count does not match dims");
  GrayscaleGrid g;
  g.dims = dims;
  g.spacing = spacing;
  g.origin = origin;
  g.values = std::move(values);
  auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
  g.raw_range = {*lo, *hi};
  return g;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view s) : s_(s) {}

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ == start) {
      if (pos_ >= s_.size())
        throw ScanError(std::string("pgm: unexpected end of data reading ") + what, start);
      throw ScanError(std::string("pgm: expected ") + what + " at byte " + std::to_string(start),
                      start);
    }
    if (pos_ - start > 9)
      throw ScanError(std::string("pgm: ") + what + " too large at byte " + std::to_string(start),
                      start);
    return std::stol(std::string(s_.substr(start, pos_ - start)));
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayscaleGrid parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw ScanError("pgm: bad magic number at byte 0 (expected P2 or P5)", 0);
  const bool binary = bytes[1] == '5';
  HeaderReader rd(bytes);
  rd.advance(2);
  const std::size_t after_magic = rd.pos();
  if (after_magic < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[after_magic])) &&
      bytes[after_magic] != '#')
    throw ScanError("pgm: missing whitespace after magic at byte 2", 2);
  const long width = rd.integer("width");
  const long height = rd.integer("height");
  const long maxval = rd.integer("maxval");
  if (width <= 0 || height <= 0)
    throw ScanError("pgm: width and height must be positive (header ends at byte " +
                        std::to_string(rd.pos()) + ")",
                    rd.pos());
  if (maxval <= 0 || maxval > 65535)
    throw ScanError("pgm: maxval out of range at byte " + std::to_string(rd.pos()), rd.pos());

  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<long> raw(n);
  if (binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    if (rd.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[rd.pos()])))
      throw ScanError("pgm: expected single whitespace before raster at byte " +
                          std::to_string(rd.pos()),
                      rd.pos());
    rd.advance(1);
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    const std::size_t have = bytes.size() - rd.pos();
    if (have < n * bpp)
      throw ScanError("pgm: size mismatch, raster needs " + std::to_string(n * bpp) +
                          " bytes but only " + std::to_string(have) + " remain",
                      rd.pos());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + rd.pos());
    for (std::size_t v = 0; v < n; ++v)
      raw[v] = bpp == 1 ? p[v] : (static_cast<long>(p[2 * v]) << 8) | p[2 * v + 1];
  } else {
    for (std::size_t v = 0; v < n; ++v) {
      rd.skip_space_and_comments();
      if (rd.pos() >= bytes.size())
        throw ScanError("pgm: size mismatch, expected " + std::to_string(n) + " samples, found " +
                            std::to_string(v),
                        rd.pos());
      raw[v] = rd.integer("sample");
    }
  }

  GrayscaleGrid g;
  g.dims = {static_cast<int>(width), static_cast<int>(height)};
  g.maxval = static_cast<int>(maxval);
  g.values.resize(n);
  long lo = raw.empty() ? 0 : raw[0], hi = lo;
  for (std::size_t v = 0; v < n; ++v) {
    if (raw[v] > maxval) throw ScanError("pgm: sample exceeds maxval (sample " + std::to_string(v) + ")");
    lo = std::min(lo, raw[v]);
    hi = std::max(hi, raw[v]);
    // PGM rows run top to bottom; flip so that j = 0 is the bottom row.
    const std::size_t row = v / width, col = v % width;
    g.values[(height - 1 - row) * width + col] = static_cast<double>(raw[v]) / maxval;
  }
  g.raw_range = {static_cast<double>(lo), static_cast<double>(hi)};
  return g;
}

GrayscaleGrid load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScanError("pgm: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_pgm(bytes);
  } catch (const ScanError& e) {
    throw ScanError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string format_pgm(const GrayscaleGrid& grid, bool binary) {
  const int w = grid.dims[0], h = grid.dims[1], m = grid.maxval;
  std::ostringstream os;
  os << (binary ? "P5" : "P2") << "\n" << w << " " << h << "\n" << m << "\n";
  for (int row = 0; row < h; ++row) {
    const int j = h - 1 - row;
    for (int i = 0; i < w; ++i) {
      const long r = std::lround(std::clamp(grid.at(i, j), 0.0, 1.0) * m);
      if (binary) {
        if (m >= 256) os.put(static_cast<char>((r >> 8) & 0xff));
        os.put(static_cast<char>(r & 0xff));
      } else {
        os << r << (i + 1 < w ? ' ' : '\n');
      }
    }
  }
  return os.str();
}

void write_pgm(const GrayscaleGrid& grid, const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScanError("pgm: cannot write " + path.string());
  out << format_pgm(grid, binary);
}

VoxelDomain threshold(const GrayscaleGrid& grid, double g_crit) {
  if (!(g_crit >= 0.0 && g_crit <= 1.0)) throw std::invalid_argument("threshold: g_crit must lie in [0,1]");
  VoxelDomain d;
  d.grid = &grid;
  d.threshold = g_crit;
  d.mask.resize(grid.size());
  for (std::size_t v = 0; v < grid.size(); ++v) {
    d.mask[v] = grid.values[v] > g_crit;
    d.count += d.mask[v];
  }
  return d;
}

ScanMetadata load_sidecar(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ScanError("sidecar: " + std::string(e.what()));
  }
  ScanMetadata meta;
  const auto scan = tree.get_child_optional("scan");
  if (!scan) return meta;
  for (const auto& [key, _] : *scan)
    if (key != "spacing_x" && key != "spacing_y" && key != "origin_x" && key != "origin_y")
      throw ScanError("sidecar " + path.string() + ": unknown key [scan] " + key);
  auto number = [&](const char* key) -> std::optional<double> {
    auto v = scan->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
      throw ScanError("sidecar " + path.string() + ": [scan] " + key + " is not a number");
    }
  };
  const auto sx = number("spacing_x"), sy = number("spacing_y");
  const auto ox = number("origin_x"), oy = number("origin_y");
  if (sx || sy) {
    if (!sx || !sy) throw ScanError("sidecar " + path.string() + ": spacing_x and spacing_y go together");
    if (*sx <= 0 || *sy <= 0) throw ScanError("sidecar " + path.string() + ": spacing must be positive");
    meta.spacing = Vec<2>{*sx, *sy};
  }
  if (ox || oy) meta.origin = Vec<2>{ox.value_or(0.0), oy.value_or(0.0)};
  return meta;
}

void apply_metadata(GrayscaleGrid& grid, const ScanMetadata& meta) {
  if (meta.spacing) grid.spacing = *meta.spacing;
  if (meta.origin) grid.origin = *meta.origin;
}

}  // namespace scanflow
