#pragma once

// Terrain-aided navigation: 6-state double integrator (position, velocity)
// with saturated acceleration, observed through velocity and height above
// the terrain.

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "dualpf/model.hpp"
#include "dualpf/terrain.hpp"

namespace dualpf {

/// Zero-mean Gaussian truncated to [-radius*sigma, radius*sigma] and renormalized.
/// radius = +inf gives the plain Gaussian.
class TruncatedGaussian {
 public:
  TruncatedGaussian(double sigma, double radius);

  double sigma() const { return sigma_; }
  double radius() const { return radius_; }
  double half_width() const { return radius_ * sigma_; }
  double density(double e) const;
  double sample(Rng& rng) const;
  /// Density at 0.
  double peak() const { return density(0.0); }

 private:
  double sigma_;
  double radius_;
  double norm_;  // 1 / (sigma sqrt(2 pi) (2 Phi(radius) - 1))
};

struct TanParams {
  double dt = 1.0;
  double U_max = 1.0;
  Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Identity();
  /// Per-channel standard deviations for (v1, v2, v3, height).
  Eigen::Vector4d noise_sigma{0.1, 0.1, 0.1, 1.0};
  /// Truncation radius in units of sigma; infinity disables truncation.
  double noise_support_radius = 3.0;
  /// Include the dt^2/2 acceleration term in the position update.
  bool position_coupling = true;
  /// rho = 0 when the horizontal position is off the map footprint.
  bool zero_likelihood_off_map = true;
  Eigen::Matrix<double, 6, 1> initial_mean = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 6> initial_cov = Eigen::Matrix<double, 6, 6>::Identity();

  /// Throws ModelError on invalid values.
  void validate() const;
};

/// Gaussian law N(mean, cov) on R^n with a possibly singular covariance;
/// the density is only available when cov is positive definite.
class GaussianLaw {
 public:
  GaussianLaw() = default;
  GaussianLaw(Vector mean, Matrix cov);

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  bool has_density() const { return has_density_; }
  /// mean + offset + factor * z
  void sample(VectorView offset, Rng& rng, VectorSlot out) const;
  double density(VectorView x, VectorView center) const;
  double peak() const;

 private:
  Vector mean_;
  Matrix cov_;
  Matrix factor_;
  Matrix precision_;
  double log_norm_ = 0.0;
  bool has_density_ = false;
};

struct TanModel {
  ModelSpec spec;
  std::shared_ptr<const TerrainMap> terrain;
  TanParams params;
  Eigen::Matrix<double, 6, 6> A;
  Eigen::Matrix<double, 6, 3> B;
};

TanModel build_tan_model(std::shared_ptr<const TerrainMap> terrain, const TanParams& params);

/// Noise-free observation [v1, v2, v3, x3 - h(x1, x2)].
Eigen::Vector4d tan_observation_mean(const TerrainMap& terrain, VectorView state);

/// 1-D slice: position s along a transect of the map, control = along-track
/// velocity (|u| <= U_max), s' = s + dt u + N(0, q), y = altitude - h(s) + eta.
struct TanSliceParams {
  Eigen::Vector2d start{0.0, 0.0};
  Eigen::Vector2d direction{1.0, 0.0};
  double length = 1000.0;
  double altitude = 200.0;
  double dt = 1.0;
  double U_max = 10.0;
  double process_sd = 2.0;
  double noise_sigma = 5.0;
  double noise_support_radius = 3.0;
  double initial_mean = 500.0;
  double initial_sd = 100.0;

  void validate() const;
};

struct TanSliceModel {
  ModelSpec spec;
  std::shared_ptr<const TerrainMap> terrain;
  TanSliceParams params;
  /// Terrain height at along-track position s.
  double profile(double s) const;
};

TanSliceModel build_tan_slice_model(std::shared_ptr<const TerrainMap> terrain, const TanSliceParams& params);

/// Points used by verify_assumptions.
struct TanSweep {
  /// Horizontal positions probed, as a regular grid over the map plus this margin.
  double position_margin = 200.0;
  int position_nodes = 25;
  std::vector<double> altitudes{-50.0, 0.0, 100.0, 300.0};
  std::vector<double> speeds{-3.0, 0.0, 3.0};
  /// Extra distance beyond the noise support used by the vanishing check, in sigmas.
  double support_margin = 0.5;
  /// Probe radii (in sigmas) used when the noise is not truncated.
  std::vector<double> untruncated_probe_radii{10.0, 20.0, 30.0};
  std::size_t random_probes = 2000;
  std::uint64_t seed = 7;
};

struct AssumptionReport {
  ValidationReport report;
  double norm_K_inf = 0.0;
  double norm_K_analytic = 0.0;
  double norm_rho_inf = 0.0;
  Vector norm_rho_phi2_inf;
  Vector norm_rho_phi_inf;
  bool passed() const { return report.passed(); }
};

/// Finiteness of rho and K, finiteness of the sup-norms, and vanishing of
/// x_i^2 rho outside the noise support / map footprint.
AssumptionReport verify_assumptions(const TanModel& model, const TanSweep& sweep = {});

}  // namespace dualpf
