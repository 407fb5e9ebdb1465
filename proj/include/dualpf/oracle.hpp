#pragma once

// Deterministic grid (point-mass) filter: the reference for the exact
// filtering distribution mu_k on state spaces of dimension one or two.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dualpf/model.hpp"
#include "dualpf/particle_filter.hpp"

namespace dualpf {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridAxis {
  double lower = 0.0;
  double step = 1.0;
  std::size_t count = 1;

  double node(std::size_t i) const { return lower + step * static_cast<double>(i); }
  double upper() const { return node(count - 1); }
  static GridAxis spanning(double lower, double upper, std::size_t count);
};

/// Probability masses on the nodes of a regular axis-aligned grid.
/// Node index is row-major over axes: flat = i0 * count1 + i1.
class GridDistribution {
 public:
  GridDistribution() = default;
  GridDistribution(std::vector<GridAxis> axes, Vector masses);

  const std::vector<GridAxis>& axes() const { return axes_; }
  const Vector& masses() const { return masses_; }
  int dim() const { return static_cast<int>(axes_.size()); }
  Eigen::Index size() const { return masses_.size(); }
  double cell_volume() const;
  Vector node(Eigen::Index flat) const;
  /// All nodes, one per column.
  Matrix nodes() const;

  /// Discretizes a density: mass(node) proportional to density(node).
  static GridDistribution from_density(std::vector<GridAxis> axes,
                                       const std::function<double(VectorView)>& density);

 private:
  std::vector<GridAxis> axes_;
  Vector masses_;
};

struct GridOptions {
  /// Re-fit the grid after each prediction so it covers mean +- coverage_sigmas * sd per axis.
  bool auto_expand = false;
  double coverage_sigmas = 6.0;
  std::size_t max_nodes_per_axis = 20000;
  bool parallel = true;
};

GridDistribution grid_predict(const GridDistribution& dist, const ModelSpec& spec, VectorView control,
                              const GridOptions& options = {});

GridDistribution grid_correct(const GridDistribution& dist, const ModelSpec& spec, VectorView observation);

/// <mu, rho(y, .)>.
double grid_mean_likelihood(const GridDistribution& dist, const ModelSpec& spec, VectorView observation);

struct ConditionalMse {
  Vector mean;
  double e_star = 0.0;
};

/// Conditional mean and e* = sum_i m_i ||x_i - mean||^2.
ConditionalMse conditional_mse(const GridDistribution& dist);

/// Per-coordinate <mu, phi_j^2>.
Vector second_moments(const GridDistribution& dist);

/// Expected squared distance from the conditional law to a point: sum_i m_i ||x_i - point||^2.
double expected_squared_distance(const GridDistribution& dist, VectorView point);

/// Draws a node with probability equal to its mass.
Vector sample_node(const GridDistribution& dist, Rng& rng);

/// Sequential grid filter along one information vector.
class GridTracker {
 public:
  struct Step {
    /// <mu_{k|k-1}, rho(y_k, .)>.
    double predicted_likelihood = 0.0;
    /// <mu_k, rho(y_k, .)>.
    double posterior_likelihood = 0.0;
    ConditionalMse mse;
    /// <mu_k, phi_j^2>.
    Vector second_moments;
  };

  GridTracker(const ModelSpec& spec, std::vector<GridAxis> axes, GridOptions options = {});

  /// k = 0: condition the initial law on y_0.
  const Step& start(VectorView y0);
  /// k -> k+1 with control u_k and observation y_{k+1}.
  const Step& advance(VectorView control, VectorView observation);

  const GridDistribution& posterior() const { return posterior_; }
  const GridDistribution& predicted() const { return predicted_; }
  const std::vector<Step>& steps() const { return steps_; }

 private:
  const Step& record(VectorView observation);

  const ModelSpec* spec_;
  std::vector<GridAxis> axes_;
  GridOptions options_;
  GridDistribution predicted_;
  GridDistribution posterior_;
  std::vector<Step> steps_;
};

/// A simulated trajectory with its information vector.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> observations;
  std::vector<Vector> controls;  // controls[k] = u_k applied between k and k+1
};

/// Control policy for open-loop simulations: u_k from (k, history).
using Policy = std::function<Vector(long k, const History& history)>;
Policy constant_policy(Vector control);

/// Simulates states and observations for k = 0..horizon-1.
Trajectory simulate(const ModelSpec& spec, const Policy& policy, std::size_t horizon, Rng& rng);

/// Everything an estimator may look at when producing the time-k estimate.
/// `truth` is exposed for diagnostic estimators only.
struct EstimationStep {
  long k = 0;
  const Vector* control = nullptr;  // u_{k-1}; null at k = 0
  const Vector* observation = nullptr;
  const Vector* truth = nullptr;
};

using Estimator = std::function<Vector(const EstimationStep&)>;
/// Builds a fresh estimator for one trial from a trial-specific seed.
using EstimatorFactory = std::function<Estimator(std::uint64_t seed)>;

struct TotalMseResult {
  std::vector<double> mean;       // per k
  std::vector<double> std_error;  // per k
  /// per_trial[t][k] = ||X_k - Xhat_k||^2 for the kept trials.
  std::vector<std::vector<double>> per_trial;
  std::vector<std::size_t> kept_trials;
  std::size_t failed_trials = 0;
};

/// Monte Carlo estimate of E||X_k - Xhat_k||^2 over independent trajectories.
/// Trajectory t uses the stream derive_seed(seed, {t, 0}) and the estimator
/// seed derive_seed(seed, {t, 1}), so two calls with the same seed see the same
/// trajectories.
TotalMseResult total_mse_monte_carlo(const ModelSpec& spec, const Policy& policy,
                                     const EstimatorFactory& estimator, std::size_t trials,
                                     std::size_t horizon, std::uint64_t seed);

/// Estimator factories for the two estimators the bounds talk about.
EstimatorFactory grid_estimator(const ModelSpec& spec, std::vector<GridAxis> axes, GridOptions options = {});
/// Particle mean X^N_k of a fresh filter per trial.
EstimatorFactory particle_estimator(const ModelSpec& spec, FilterConfig cfg);

}  // namespace dualpf
