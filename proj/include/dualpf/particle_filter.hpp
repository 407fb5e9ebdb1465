#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>

#include "dualpf/model.hpp"

namespace dualpf {

enum class Stage { predicted, corrected };
enum class ResamplingScheme { multinomial, systematic };

/// Weighted particle cloud mu^N = sum_i w_i delta_{x_i}. Positions are stored
/// one particle per column.
struct ParticleSet {
  Matrix positions;
  Vector weights;
  Stage stage = Stage::predicted;

  Eigen::Index size() const { return positions.cols(); }
  int dim() const { return static_cast<int>(positions.rows()); }
  /// Positions with uniform weights.
  static ParticleSet uniform(Matrix positions, Stage stage);
  /// Throws std::logic_error when the weight/position invariants do not hold.
  void check() const;
};

struct FilterConfig {
  std::size_t particle_count = 1000;
  /// Acceptance level for the selection step (the gamma_k / 2 of the bounds);
  /// a predicted cloud is kept when its mean likelihood exceeds this value.
  double gamma_threshold = 0.0;
  std::size_t max_redraws = 50;
  ResamplingScheme resampling = ResamplingScheme::systematic;
};

/// Raised by correct() when every particle has zero likelihood.
class FilterDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a propagated particle is not finite.
class ParticleError : public std::runtime_error {
 public:
  ParticleError(const std::string& what, Eigen::Index index)
      : std::runtime_error(what), index_(index) {}
  Eigen::Index index() const { return index_; }

 private:
  Eigen::Index index_;
};

/// Draws N particles from the initial law (stage = predicted, uniform weights).
ParticleSet initialize(const ModelSpec& spec, std::size_t particle_count, Rng& rng);

ParticleSet predict(const ParticleSet& pf, const ModelSpec& spec, VectorView control, Rng& rng);

/// Weighted mean likelihood <mu^N, rho(y, .)>, with the per-particle values.
double mean_likelihood(const ParticleSet& pf, const ModelSpec& spec, VectorView observation,
                       Vector* per_particle = nullptr);

struct SelectionResult {
  ParticleSet cloud;
  /// Number of re-spawned clouds (0 when the first cloud was accepted).
  std::size_t redraw_count = 0;
  /// False when every attempt stayed at or below the threshold; `cloud` is
  /// then the best-scoring attempt.
  bool accepted = true;
  double mean_likelihood = 0.0;
  /// rho(y, x_i) for the returned cloud.
  Vector likelihoods;
};

using CloudSpawner = std::function<ParticleSet(Rng&)>;

/// Selection step: keep the predicted cloud if <mu^N_{k|k-1}, rho> > gamma_threshold,
/// otherwise re-spawn it (up to max_redraws times).
SelectionResult select(const ParticleSet& pf, const ModelSpec& spec, VectorView observation,
                       const FilterConfig& cfg, const CloudSpawner& spawn, Rng& rng);

ParticleSet correct(const ParticleSet& pf, const ModelSpec& spec, VectorView observation);
/// Same as correct() with likelihoods already evaluated.
ParticleSet correct_with(const ParticleSet& pf, const Vector& likelihoods);

ParticleSet resample(const ParticleSet& pf, const FilterConfig& cfg, Rng& rng);

/// Ancestor indices for N draws proportional to `weights`.
std::vector<Eigen::Index> resample_indices(const Vector& weights, ResamplingScheme scheme, Rng& rng);

/// X^N = sum_i w_i x_i.
Vector empirical_mean(const ParticleSet& pf);

double effective_sample_size(const Vector& weights);

struct FilterDiagnostics {
  double mean_predicted_likelihood = 0.0;
  std::size_t redraw_count = 0;
  bool selection_accepted = true;
  double ess_before_resampling = 0.0;
  /// ESS of the returned cloud (N after resampling).
  double effective_sample_size = 0.0;
};

struct FilterStepResult {
  ParticleSet cloud;
  FilterDiagnostics diagnostics;
};

/// One cycle mu^N_{k} -> mu^N_{k+1}: predict, select, correct, resample.
FilterStepResult filter_step(const ParticleSet& pf, const ModelSpec& spec, VectorView control,
                             VectorView observation, const FilterConfig& cfg, Rng& rng);

/// Time-0 cycle: sample the initial law, select (re-sampling the initial law), correct, resample.
FilterStepResult filter_start(const ModelSpec& spec, VectorView observation, const FilterConfig& cfg,
                              Rng& rng);

}  // namespace dualpf
