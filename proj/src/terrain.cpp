#include "dualpf/terrain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "dualpf/rng.hpp"

namespace dualpf {

TerrainMap::TerrainMap(Eigen::Vector2d origin, double cell_size, Eigen::MatrixXd heights)
    : origin_(origin), cell_size_(cell_size), heights_(std::move(heights)) {
  if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_)) throw TerrainError("terrain: cell size must be positive");
  if (heights_.rows() < 2 || heights_.cols() < 2) throw TerrainError("terrain: need at least 2x2 nodes");
  if (!heights_.allFinite()) throw TerrainError("terrain: non-finite height");
  if (!origin_.allFinite()) throw TerrainError("terrain: non-finite origin");
}

Eigen::Vector2d TerrainMap::upper_corner() const {
  return origin_ + cell_size_ * Eigen::Vector2d(static_cast<double>(cols() - 1), static_cast<double>(rows() - 1));
}

bool TerrainMap::contains(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d hi = upper_corner();
  return p.x() >= origin_.x() && p.x() <= hi.x() && p.y() >= origin_.y() && p.y() <= hi.y();
}

namespace {

struct CellCoord {
  Eigen::Index i;  // lower node index
  double t;        // fractional position in [0,1]
  bool on_edge;    // exactly on an interior node line
};

CellCoord locate(double s, Eigen::Index nodes) {
  const double last = static_cast<double>(nodes - 1);
  const double c = std::clamp(s, 0.0, last);
  auto i = static_cast<Eigen::Index>(std::floor(c));
  if (i >= nodes - 1) i = nodes - 2;
  const double t = c - static_cast<double>(i);
  const bool edge = (t == 0.0 && i > 0) || (t == 1.0 && i + 1 < nodes - 1);
  return {i, t, edge};
}

}  // namespace

double TerrainMap::height(const Eigen::Vector2d& p, bool* clamped) const {
  if (!p.allFinite()) throw TerrainError("terrain: non-finite query");
  if (clamped) *clamped = !contains(p);
  const Eigen::Vector2d s = (p - origin_) / cell_size_;
  const CellCoord cx = locate(s.x(), cols());
  const CellCoord cy = locate(s.y(), rows());
  const double h00 = heights_(cy.i, cx.i);
  const double h10 = heights_(cy.i, cx.i + 1);
  const double h01 = heights_(cy.i + 1, cx.i);
  const double h11 = heights_(cy.i + 1, cx.i + 1);
  return (1 - cx.t) * (1 - cy.t) * h00 + cx.t * (1 - cy.t) * h10 + (1 - cx.t) * cy.t * h01 + cx.t * cy.t * h11;
}

Eigen::Vector2d TerrainMap::gradient(const Eigen::Vector2d& p, bool* clamped) const {
  if (!p.allFinite()) throw TerrainError("terrain: non-finite query");
  if (clamped) *clamped = !contains(p);
  const Eigen::Vector2d s = (p - origin_) / cell_size_;
  const CellCoord cx = locate(s.x(), cols());
  const CellCoord cy = locate(s.y(), rows());

  auto h = [&](Eigen::Index iy, Eigen::Index ix) { return heights_(iy, ix); };
  // d/dx within cell (ix, iy) at fractional ty
  auto dx_in = [&](Eigen::Index ix, Eigen::Index iy, double ty) {
    return ((1 - ty) * (h(iy, ix + 1) - h(iy, ix)) + ty * (h(iy + 1, ix + 1) - h(iy + 1, ix))) / cell_size_;
  };
  auto dy_in = [&](Eigen::Index ix, Eigen::Index iy, double tx) {
    return ((1 - tx) * (h(iy + 1, ix) - h(iy, ix)) + tx * (h(iy + 1, ix + 1) - h(iy, ix + 1))) / cell_size_;
  };

  double gx = dx_in(cx.i, cy.i, cy.t);
  double gy = dy_in(cx.i, cy.i, cx.t);
  if (cx.on_edge) {
    // node line shared by cells cx.i - 1 and cx.i (t == 0) or cx.i and cx.i + 1 (t == 1)
    const Eigen::Index other = cx.t == 0.0 ? cx.i - 1 : cx.i + 1;
    gx = 0.5 * (gx + dx_in(other, cy.i, cy.t));
  }
  if (cy.on_edge) {
    const Eigen::Index other = cy.t == 0.0 ? cy.i - 1 : cy.i + 1;
    gy = 0.5 * (gy + dy_in(cx.i, other, cx.t));
  }
  return {gx, gy};
}

TerrainMap read_ascii_grid(std::istream& in) {
  long ncols = -1, nrows = -1;
  double xll = NAN, yll = NAN, cell = NAN, nodata = NAN;
  bool have_nodata = false;
  std::string key;
  for (int field = 0; field < 6; ++field) {
    const auto pos = in.tellg();
    if (!(in >> key)) throw TerrainError("terrain file: truncated header");
    std::string lower = key;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "ncols") {
      in >> ncols;
    } else if (lower == "nrows") {
      in >> nrows;
    } else if (lower == "xllcorner") {
      in >> xll;
    } else if (lower == "yllcorner") {
      in >> yll;
    } else if (lower == "cellsize") {
      in >> cell;
    } else if (lower == "nodata_value") {
      in >> nodata;
      have_nodata = true;
    } else {
      in.clear();
      in.seekg(pos);
      break;
    }
    if (!in) throw TerrainError("terrain file: bad value for " + key);
  }
  if (ncols < 2 || nrows < 2 || !std::isfinite(xll) || !std::isfinite(yll) || !(cell > 0.0))
    throw TerrainError("terrain file: missing or invalid header (ncols, nrows, xllcorner, yllcorner, cellsize)");
  Eigen::MatrixXd heights(nrows, ncols);
  for (long r = 0; r < nrows; ++r) {
    for (long c = 0; c < ncols; ++c) {
      double v;
      if (!(in >> v))
        throw TerrainError("terrain file: expected " + std::to_string(nrows * ncols) + " heights, got " +
                           std::to_string(r * ncols + c));
      if (have_nodata && v == nodata) throw TerrainError("terrain file: NODATA cells are not supported");
      heights(nrows - 1 - r, c) = v;
    }
  }
  return TerrainMap({xll, yll}, cell, std::move(heights));
}

TerrainMap load_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TerrainError("cannot open terrain file " + path);
  return read_ascii_grid(in);
}

void write_ascii_grid(std::ostream& out, const TerrainMap& map) {
  out << std::setprecision(17);
  out << "ncols " << map.cols() << "\n"
      << "nrows " << map.rows() << "\n"
      << "xllcorner " << map.origin().x() << "\n"
      << "yllcorner " << map.origin().y() << "\n"
      << "cellsize " << map.cell_size() << "\n";
  for (Eigen::Index r = map.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < map.cols(); ++c) out << (c ? " " : "") << map.heights()(r, c);
    out << "\n";
  }
}

void save_ascii_grid(const std::string& path, const TerrainMap& map) {
  std::ofstream out(path);
  if (!out) throw TerrainError("cannot write terrain file " + path);
  write_ascii_grid(out, map);
}

namespace {

template <class F>
TerrainMap tabulate(const TerrainFootprint& fp, F&& f) {
  Eigen::MatrixXd h(fp.rows, fp.cols);
  for (Eigen::Index r = 0; r < fp.rows; ++r)
    for (Eigen::Index c = 0; c < fp.cols; ++c)
      h(r, c) = f(fp.origin + fp.cell_size * Eigen::Vector2d(static_cast<double>(c), static_cast<double>(r)));
  return TerrainMap(fp.origin, fp.cell_size, std::move(h));
}

}  // namespace

TerrainMap make_flat_terrain(const TerrainFootprint& fp, double height) {
  return tabulate(fp, [&](const Eigen::Vector2d&) { return height; });
}

TerrainMap make_ramp_terrain(const TerrainFootprint& fp, Eigen::Vector2d slope, double base) {
  return tabulate(fp, [&](const Eigen::Vector2d& p) { return base + slope.dot(p - fp.origin); });
}

TerrainMap make_two_hill_terrain(const TerrainFootprint& fp, const TwoHillSpec& hills) {
  if (!(hills.width > 0.0)) throw TerrainError("two-hill terrain: width must be positive");
  const double w2 = 2.0 * hills.width * hills.width;
  return tabulate(fp, [&](const Eigen::Vector2d& p) {
    return hills.base + hills.amplitude * (std::exp(-(p - hills.center_a).squaredNorm() / w2) +
                                           std::exp(-(p - hills.center_b).squaredNorm() / w2));
  });
}

TerrainMap make_two_zone_terrain(const TerrainFootprint& fp, const TwoZoneSpec& zones) {
  if (!(zones.rough_wavelength > 0.0)) throw TerrainError("two-zone terrain: wavelength must be positive");
  const double w = zones.rough_wavelength;
  const Eigen::Vector2d lo = fp.origin;
  const Eigen::Vector2d hi =
      fp.origin + fp.cell_size * Eigen::Vector2d(static_cast<double>(fp.cols - 1), static_cast<double>(fp.rows - 1));
  const auto lc = static_cast<Eigen::Index>(std::ceil((hi.x() - lo.x()) / w)) + 2;
  const auto lr = static_cast<Eigen::Index>(std::ceil((hi.y() - lo.y()) / w)) + 2;
  Eigen::MatrixXd lattice(lr, lc);
  Rng rng(derive_seed(zones.seed, {0x7e77a1ULL}));
  for (Eigen::Index r = 0; r < lr; ++r)
    for (Eigen::Index c = 0; c < lc; ++c) lattice(r, c) = zones.rough_amplitude * (2.0 * uniform01(rng) - 1.0);
  const TerrainMap rough(lo, w, std::move(lattice));
  return tabulate(fp, [&](const Eigen::Vector2d& p) {
    return p.x() < zones.boundary ? zones.flat_height : zones.flat_height + rough.height(p);
  });
}

}  // namespace dualpf
