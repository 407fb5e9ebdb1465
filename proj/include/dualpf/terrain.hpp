#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dualpf {

class TerrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regular heightmap with bilinear interpolation. Node (ix, iy) sits at
/// origin + (ix, iy) * cell_size; heights(iy, ix), so row 0 is the southern edge.
class TerrainMap {
 public:
  TerrainMap() = default;
  TerrainMap(Eigen::Vector2d origin, double cell_size, Eigen::MatrixXd heights);

  const Eigen::Vector2d& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  const Eigen::MatrixXd& heights() const { return heights_; }
  Eigen::Index rows() const { return heights_.rows(); }
  Eigen::Index cols() const { return heights_.cols(); }
  Eigen::Vector2d upper_corner() const;

  bool contains(const Eigen::Vector2d& p) const;
  /// Bilinear height. Points outside the footprint are clamped to it and
  /// `clamped` (if given) is set.
  double height(const Eigen::Vector2d& p, bool* clamped = nullptr) const;
  /// Exact derivative of the bilinear patch; on a shared cell edge the two
  /// one-sided derivatives are averaged.
  Eigen::Vector2d gradient(const Eigen::Vector2d& p, bool* clamped = nullptr) const;

  double min_height() const { return heights_.minCoeff(); }
  double max_height() const { return heights_.maxCoeff(); }

 private:
  Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
  double cell_size_ = 1.0;
  Eigen::MatrixXd heights_;
};

/// ESRI ASCII grid: ncols, nrows, xllcorner, yllcorner, cellsize, optional
/// NODATA_value, then nrows lines of heights, northernmost first.
TerrainMap read_ascii_grid(std::istream& in);
TerrainMap load_ascii_grid(const std::string& path);
void write_ascii_grid(std::ostream& out, const TerrainMap& map);
void save_ascii_grid(const std::string& path, const TerrainMap& map);

struct TerrainFootprint {
  Eigen::Vector2d origin{-500.0, -500.0};
  double cell_size = 10.0;
  Eigen::Index cols = 101;
  Eigen::Index rows = 101;
};

TerrainMap make_flat_terrain(const TerrainFootprint& fp, double height = 0.0);

/// h = base + slope . (p - origin).
TerrainMap make_ramp_terrain(const TerrainFootprint& fp, Eigen::Vector2d slope, double base = 0.0);

struct TwoHillSpec {
  Eigen::Vector2d center_a{-300.0, 0.0};
  Eigen::Vector2d center_b{300.0, 0.0};
  double amplitude = 100.0;
  double width = 80.0;  // Gaussian standard deviation of each hill
  double base = 0.0;
};

TerrainMap make_two_hill_terrain(const TerrainFootprint& fp, const TwoHillSpec& hills);

struct TwoZoneSpec {
  /// x1 coordinate of the boundary; flat to the west, rough to the east.
  double boundary = 0.0;
  double flat_height = 0.0;
  double rough_amplitude = 30.0;
  /// Spacing of the random control lattice that is bilinearly upsampled.
  double rough_wavelength = 50.0;
  std::uint64_t seed = 1;
};

TerrainMap make_two_zone_terrain(const TerrainFootprint& fp, const TwoZoneSpec& zones);

}  // namespace dualpf
