#include "dualpf/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dualpf/kernels.hpp"

namespace dualpf {

ParticleSet ParticleSet::uniform(Matrix positions, Stage stage) {
  ParticleSet pf;
  const auto n = positions.cols();
  pf.positions = std::move(positions);
  pf.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  pf.stage = stage;
  return pf;
}

void ParticleSet::check() const {
  if (positions.cols() < 1) throw std::logic_error("ParticleSet: empty cloud");
  if (weights.size() != positions.cols()) throw std::logic_error("ParticleSet: weight count mismatch");
  if ((weights.array() < 0.0).any()) throw std::logic_error("ParticleSet: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9) throw std::logic_error("ParticleSet: weights not normalized");
  if (!positions.allFinite()) throw std::logic_error("ParticleSet: non-finite position");
}

ParticleSet initialize(const ModelSpec& spec, std::size_t particle_count, Rng& rng) {
  if (particle_count == 0) throw std::invalid_argument("initialize: particle_count must be >= 1");
  Matrix positions(spec.state_dim, static_cast<Eigen::Index>(particle_count));
  kernels::sample_initial_parallel(spec, draw_seed(rng), positions);
  if (const auto bad = kernels::first_non_finite_column(positions); bad >= 0)
    throw ParticleError("initialize: non-finite initial particle " + std::to_string(bad), bad);
  return ParticleSet::uniform(std::move(positions), Stage::predicted);
}

ParticleSet predict(const ParticleSet& pf, const ModelSpec& spec, VectorView control, Rng& rng) {
  if (pf.stage != Stage::corrected) throw std::logic_error("predict: cloud must be corrected");
  ParticleSet out;
  kernels::propagate_parallel(spec, pf.positions, spec.control_set.project(control), draw_seed(rng),
                              out.positions);
  if (const auto bad = kernels::first_non_finite_column(out.positions); bad >= 0)
    throw ParticleError("predict: non-finite propagated particle " + std::to_string(bad), bad);
  out.weights = pf.weights;
  out.stage = Stage::predicted;
  return out;
}

double mean_likelihood(const ParticleSet& pf, const ModelSpec& spec, VectorView observation,
                       Vector* per_particle) {
  Vector lik;
  kernels::likelihoods_parallel(spec, pf.positions, observation, lik);
  const double m = pf.weights.dot(lik);
  if (per_particle) *per_particle = std::move(lik);
  return m;
}

SelectionResult select(const ParticleSet& pf, const ModelSpec& spec, VectorView observation,
                       const FilterConfig& cfg, const CloudSpawner& spawn, Rng& rng) {
  if (pf.stage != Stage::predicted) throw std::logic_error("select: cloud must be predicted");
  if (cfg.max_redraws < 1) throw std::invalid_argument("select: max_redraws must be >= 1");

  SelectionResult best;
  best.cloud = pf;
  best.mean_likelihood = mean_likelihood(pf, spec, observation, &best.likelihoods);
  if (best.mean_likelihood > cfg.gamma_threshold) return best;

  for (std::size_t attempt = 1; attempt <= cfg.max_redraws; ++attempt) {
    ParticleSet candidate = spawn(rng);
    Vector lik;
    const double m = mean_likelihood(candidate, spec, observation, &lik);
    if (m > best.mean_likelihood) {
      best.cloud = std::move(candidate);
      best.mean_likelihood = m;
      best.likelihoods = std::move(lik);
    }
    if (m > cfg.gamma_threshold) {
      best.redraw_count = attempt;
      best.accepted = true;
      return best;
    }
  }
  best.redraw_count = cfg.max_redraws;
  best.accepted = false;
  return best;
}

ParticleSet correct_with(const ParticleSet& pf, const Vector& likelihoods) {
  if (pf.stage != Stage::predicted) throw std::logic_error("correct: cloud must be predicted");
  if (likelihoods.size() != pf.size()) throw std::invalid_argument("correct: likelihood count mismatch");
  ParticleSet out;
  out.positions = pf.positions;
  out.weights = pf.weights.cwiseProduct(likelihoods);
  const double total = out.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw FilterDivergence("correct: total unnormalized weight is " + std::to_string(total));
  out.weights /= total;
  out.stage = Stage::corrected;
  return out;
}

ParticleSet correct(const ParticleSet& pf, const ModelSpec& spec, VectorView observation) {
  Vector lik;
  kernels::likelihoods_parallel(spec, pf.positions, observation, lik);
  return correct_with(pf, lik);
}

std::vector<Eigen::Index> resample_indices(const Vector& weights, ResamplingScheme scheme, Rng& rng) {
  const Eigen::Index n = weights.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  if (scheme == ResamplingScheme::multinomial) {
    std::discrete_distribution<Eigen::Index> pick(weights.data(), weights.data() + n);
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
    return idx;
  }
  // Systematic: one uniform offset, N evenly spaced pointers into the CDF.
  const double step = 1.0 / static_cast<double>(n);
  double u = uniform01(rng) * step;
  double cdf = weights[0];
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    while (u > cdf && j + 1 < n) cdf += weights[++j];
    idx[static_cast<std::size_t>(i)] = j;
    u += step;
  }
  return idx;
}

ParticleSet resample(const ParticleSet& pf, const FilterConfig& cfg, Rng& rng) {
  if (pf.stage != Stage::corrected) throw std::logic_error("resample: cloud must be corrected");
  const auto idx = resample_indices(pf.weights, cfg.resampling, rng);
  Matrix positions(pf.positions.rows(), pf.positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i)
    positions.col(i) = pf.positions.col(idx[static_cast<std::size_t>(i)]);
  return ParticleSet::uniform(std::move(positions), Stage::corrected);
}

Vector empirical_mean(const ParticleSet& pf) { return pf.positions * pf.weights; }

double effective_sample_size(const Vector& weights) {
  const double s2 = weights.squaredNorm();
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

namespace {

FilterStepResult finish_step(const ModelSpec&, SelectionResult sel, const FilterConfig& cfg, Rng& rng) {
  FilterStepResult out;
  out.diagnostics.mean_predicted_likelihood = sel.mean_likelihood;
  out.diagnostics.redraw_count = sel.redraw_count;
  out.diagnostics.selection_accepted = sel.accepted;
  ParticleSet corrected = correct_with(sel.cloud, sel.likelihoods);
  out.diagnostics.ess_before_resampling = effective_sample_size(corrected.weights);
  out.cloud = resample(corrected, cfg, rng);
  out.diagnostics.effective_sample_size = effective_sample_size(out.cloud.weights);
  return out;
}

}  // namespace

FilterStepResult filter_step(const ParticleSet& pf, const ModelSpec& spec, VectorView control,
                             VectorView observation, const FilterConfig& cfg, Rng& rng) {
  const Vector u = control;
  ParticleSet predicted = predict(pf, spec, u, rng);
  auto spawn = [&](Rng& r) { return predict(pf, spec, u, r); };
  return finish_step(spec, select(predicted, spec, observation, cfg, spawn, rng), cfg, rng);
}

FilterStepResult filter_start(const ModelSpec& spec, VectorView observation, const FilterConfig& cfg,
                              Rng& rng) {
  ParticleSet prior = initialize(spec, cfg.particle_count, rng);
  auto spawn = [&](Rng& r) { return initialize(spec, cfg.particle_count, r); };
  return finish_step(spec, select(prior, spec, observation, cfg, spawn, rng), cfg, rng);
}

}  // namespace dualpf
