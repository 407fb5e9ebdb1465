#include "dualpf/oracle.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <numeric>
#include <string>

#include "dualpf/kernels.hpp"

namespace dualpf {

GridAxis GridAxis::spanning(double lower, double upper, std::size_t count) {
  if (count < 2 || !(upper > lower)) throw OracleError("GridAxis::spanning: need count >= 2 and upper > lower");
  return {lower, (upper - lower) / static_cast<double>(count - 1), count};
}

GridDistribution::GridDistribution(std::vector<GridAxis> axes, Vector masses)
    : axes_(std::move(axes)), masses_(std::move(masses)) {
  if (axes_.empty() || axes_.size() > 2) throw OracleError("GridDistribution: grid oracle supports 1 or 2 dimensions");
  std::size_t total = 1;
  for (const auto& a : axes_) {
    if (a.count < 1 || !(a.step > 0.0)) throw OracleError("GridDistribution: invalid axis");
    total *= a.count;
  }
  if (static_cast<std::size_t>(masses_.size()) != total) throw OracleError("GridDistribution: mass count mismatch");
}

double GridDistribution::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes_) v *= a.step;
  return v;
}

Vector GridDistribution::node(Eigen::Index flat) const {
  Vector x(dim());
  if (dim() == 1) {
    x[0] = axes_[0].node(static_cast<std::size_t>(flat));
  } else {
    const auto c1 = static_cast<Eigen::Index>(axes_[1].count);
    x[0] = axes_[0].node(static_cast<std::size_t>(flat / c1));
    x[1] = axes_[1].node(static_cast<std::size_t>(flat % c1));
  }
  return x;
}

Matrix GridDistribution::nodes() const {
  Matrix out(dim(), size());
  for (Eigen::Index i = 0; i < size(); ++i) out.col(i) = node(i);
  return out;
}

namespace {

Matrix axes_nodes(const std::vector<GridAxis>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.count;
  return GridDistribution(axes, Vector::Zero(static_cast<Eigen::Index>(total))).nodes();
}

double normalize_or_throw(Vector& m, const char* where) {
  const double total = m.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw OracleError(std::string(where) + ": total mass underflow (" + std::to_string(total) +
                      "); widen the grid or check the model support");
  m /= total;
  return total;
}

struct AxisMoments {
  double mean = 0.0;
  double sd = 0.0;
};

AxisMoments axis_moments(const GridDistribution& d, int axis) {
  const Matrix nodes = d.nodes();
  const double m = nodes.row(axis).dot(d.masses());
  const double v = (nodes.row(axis).array() - m).square().matrix().dot(d.masses());
  return {m, std::sqrt(std::max(v, 0.0))};
}

// Sub-grid of `d` restricted to node index ranges [lo[a], hi[a]] per axis.
GridDistribution restrict_grid(const GridDistribution& d, const std::vector<std::size_t>& lo,
                               const std::vector<std::size_t>& hi) {
  std::vector<GridAxis> axes = d.axes();
  for (std::size_t a = 0; a < axes.size(); ++a) {
    axes[a].lower = d.axes()[a].node(lo[a]);
    axes[a].count = hi[a] - lo[a] + 1;
  }
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.count;
  Vector m(static_cast<Eigen::Index>(total));
  if (axes.size() == 1) {
    m = d.masses().segment(static_cast<Eigen::Index>(lo[0]), static_cast<Eigen::Index>(axes[0].count));
  } else {
    const std::size_t c1 = d.axes()[1].count;
    for (std::size_t i = 0; i < axes[0].count; ++i)
      for (std::size_t j = 0; j < axes[1].count; ++j)
        m[static_cast<Eigen::Index>(i * axes[1].count + j)] =
            d.masses()[static_cast<Eigen::Index>((i + lo[0]) * c1 + (j + lo[1]))];
  }
  normalize_or_throw(m, "grid_predict");
  return GridDistribution(std::move(axes), std::move(m));
}

GridDistribution transition_onto(const GridDistribution& dist, const ModelSpec& spec, VectorView control,
                                 std::vector<GridAxis> target_axes, bool parallel) {
  const Matrix sources = dist.nodes();
  const Matrix targets = axes_nodes(target_axes);
  Vector out;
  if (parallel)
    kernels::grid_transition_parallel(spec, sources, dist.masses(), targets, control, out);
  else
    kernels::grid_transition_serial(spec, sources, dist.masses(), targets, control, out);
  if (!out.allFinite()) throw OracleError("grid_predict: non-finite transition density");
  normalize_or_throw(out, "grid_predict");
  return GridDistribution(std::move(target_axes), std::move(out));
}

}  // namespace

GridDistribution GridDistribution::from_density(std::vector<GridAxis> axes,
                                                const std::function<double(VectorView)>& density) {
  const Matrix nodes = axes_nodes(axes);
  Vector m(nodes.cols());
  for (Eigen::Index i = 0; i < nodes.cols(); ++i) {
    m[i] = density(nodes.col(i));
    if (!std::isfinite(m[i]) || m[i] < 0.0) throw OracleError("from_density: invalid density value");
  }
  normalize_or_throw(m, "from_density");
  return GridDistribution(std::move(axes), std::move(m));
}

GridDistribution grid_predict(const GridDistribution& dist, const ModelSpec& spec, VectorView control,
                              const GridOptions& options) {
  if (dist.dim() != spec.state_dim) throw OracleError("grid_predict: grid/model dimension mismatch");
  const Vector u = spec.control_set.project(control);
  std::vector<GridAxis> axes = dist.axes();
  GridDistribution out = transition_onto(dist, spec, u, axes, options.parallel);
  if (!options.auto_expand) return out;

  for (int iter = 0; iter < 16; ++iter) {
    bool grown = false;
    std::vector<std::size_t> lo(axes.size()), hi(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto mom = axis_moments(out, static_cast<int>(a));
      const double half = options.coverage_sigmas * std::max(mom.sd, axes[a].step);
      const double need_lo = mom.mean - half;
      const double need_hi = mom.mean + half;
      auto& ax = axes[a];
      if (need_lo < ax.lower) {
        const auto add = static_cast<std::size_t>(std::ceil((ax.lower - need_lo) / ax.step));
        ax.lower -= static_cast<double>(add) * ax.step;
        ax.count += add;
        grown = true;
      }
      if (need_hi > ax.upper()) {
        ax.count += static_cast<std::size_t>(std::ceil((need_hi - ax.upper()) / ax.step));
        grown = true;
      }
      if (ax.count > options.max_nodes_per_axis)
        throw OracleError("grid_predict: auto-expanded grid exceeds max_nodes_per_axis");
      const double flo = std::floor((need_lo - ax.lower) / ax.step);
      const double fhi = std::ceil((need_hi - ax.lower) / ax.step);
      lo[a] = static_cast<std::size_t>(std::clamp(flo, 0.0, static_cast<double>(ax.count - 1)));
      hi[a] = static_cast<std::size_t>(std::clamp(fhi, 0.0, static_cast<double>(ax.count - 1)));
    }
    if (grown) {
      out = transition_onto(dist, spec, u, axes, options.parallel);
      continue;
    }
    bool trim = false;
    for (std::size_t a = 0; a < axes.size(); ++a)
      if (lo[a] > 0 || hi[a] + 1 < axes[a].count) trim = true;
    return trim ? restrict_grid(out, lo, hi) : out;
  }
  throw OracleError("grid_predict: auto-expansion did not converge");
}

GridDistribution grid_correct(const GridDistribution& dist, const ModelSpec& spec, VectorView observation) {
  Vector lik;
  kernels::likelihoods_parallel(spec, dist.nodes(), observation, lik);
  if (!lik.allFinite()) throw OracleError("grid_correct: non-finite likelihood");
  Vector m = dist.masses().cwiseProduct(lik);
  const double total = m.sum();
  if (!(total > 0.0))
    throw OracleError("grid_correct: posterior has zero mass (observation outside the model support)");
  m /= total;
  return GridDistribution(dist.axes(), std::move(m));
}

double grid_mean_likelihood(const GridDistribution& dist, const ModelSpec& spec, VectorView observation) {
  Vector lik;
  kernels::likelihoods_parallel(spec, dist.nodes(), observation, lik);
  return dist.masses().dot(lik);
}

ConditionalMse conditional_mse(const GridDistribution& dist) {
  const Matrix nodes = dist.nodes();
  ConditionalMse out;
  out.mean = nodes * dist.masses();
  out.e_star = (nodes.colwise() - out.mean).colwise().squaredNorm().dot(dist.masses());
  return out;
}

Vector second_moments(const GridDistribution& dist) {
  const Matrix nodes = dist.nodes();
  return nodes.array().square().matrix() * dist.masses();
}

double expected_squared_distance(const GridDistribution& dist, VectorView point) {
  const Matrix nodes = dist.nodes();
  return (nodes.colwise() - point).colwise().squaredNorm().dot(dist.masses());
}

Vector sample_node(const GridDistribution& dist, Rng& rng) {
  double u = uniform01(rng);
  const Vector& m = dist.masses();
  Eigen::Index i = 0;
  for (; i + 1 < m.size(); ++i) {
    u -= m[i];
    if (u < 0.0) break;
  }
  return dist.node(i);
}

GridTracker::GridTracker(const ModelSpec& spec, std::vector<GridAxis> axes, GridOptions options)
    : spec_(&spec), axes_(std::move(axes)), options_(options) {
  if (spec.state_dim > 2) throw OracleError("GridTracker: grid oracle supports state_dim <= 2");
  if (static_cast<int>(axes_.size()) != spec.state_dim) throw OracleError("GridTracker: axis count mismatch");
}

const GridTracker::Step& GridTracker::record(VectorView observation) {
  Step s;
  s.predicted_likelihood = grid_mean_likelihood(predicted_, *spec_, observation);
  posterior_ = grid_correct(predicted_, *spec_, observation);
  s.posterior_likelihood = grid_mean_likelihood(posterior_, *spec_, observation);
  s.mse = conditional_mse(posterior_);
  s.second_moments = second_moments(posterior_);
  steps_.push_back(std::move(s));
  return steps_.back();
}

const GridTracker::Step& GridTracker::start(VectorView y0) {
  steps_.clear();
  predicted_ = GridDistribution::from_density(axes_, spec_->initial_density);
  return record(y0);
}

const GridTracker::Step& GridTracker::advance(VectorView control, VectorView observation) {
  if (steps_.empty()) throw OracleError("GridTracker::advance before start");
  predicted_ = grid_predict(posterior_, *spec_, control, options_);
  return record(observation);
}

Policy constant_policy(Vector control) {
  return [control = std::move(control)](long, const History&) { return control; };
}

Trajectory simulate(const ModelSpec& spec, const Policy& policy, std::size_t horizon, Rng& rng) {
  Trajectory t;
  if (horizon == 0) return t;
  Vector x(spec.state_dim), y(spec.obs_dim), next(spec.state_dim);
  spec.initial_sample(rng, x);
  spec.observation_sample(x, rng, y);
  History h;
  h.start(y);
  t.states.push_back(x);
  t.observations.push_back(y);
  for (std::size_t k = 1; k < horizon; ++k) {
    const Vector u = spec.control_set.project(policy(static_cast<long>(k) - 1, h));
    spec.transition_sample(x, u, rng, next);
    x = next;
    spec.observation_sample(x, rng, y);
    h.append(u, y);
    t.controls.push_back(u);
    t.states.push_back(x);
    t.observations.push_back(y);
  }
  return t;
}

TotalMseResult total_mse_monte_carlo(const ModelSpec& spec, const Policy& policy,
                                     const EstimatorFactory& estimator, std::size_t trials,
                                     std::size_t horizon, std::uint64_t seed) {
  std::vector<std::vector<double>> errors(trials);
  std::vector<char> ok(trials, 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < trials; ++t) {
    try {
      Rng traj_rng = make_stream(seed, {t, 0});
      const Trajectory traj = simulate(spec, policy, horizon, traj_rng);
      Estimator est = estimator(derive_seed(seed, {t, 1}));
      std::vector<double> e(horizon);
      for (std::size_t k = 0; k < horizon; ++k) {
        EstimationStep step;
        step.k = static_cast<long>(k);
        step.control = k > 0 ? &traj.controls[k - 1] : nullptr;
        step.observation = &traj.observations[k];
        step.truth = &traj.states[k];
        const Vector xhat = est(step);
        e[k] = spec.cost_estimation(traj.states[k], xhat);
        if (!std::isfinite(e[k])) throw OracleError("non-finite estimation error");
      }
      errors[t] = std::move(e);
      ok[t] = 1;
    } catch (const std::exception&) {
      ok[t] = 0;
    }
  }

  TotalMseResult out;
  for (std::size_t t = 0; t < trials; ++t) {
    if (ok[t]) {
      out.per_trial.push_back(std::move(errors[t]));
      out.kept_trials.push_back(t);
    } else {
      ++out.failed_trials;
    }
  }
  const auto n = static_cast<double>(out.per_trial.size());
  out.mean.assign(horizon, 0.0);
  out.std_error.assign(horizon, 0.0);
  if (out.per_trial.empty()) return out;
  for (std::size_t k = 0; k < horizon; ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& row : out.per_trial) {
      s += row[k];
      s2 += row[k] * row[k];
    }
    const double m = s / n;
    out.mean[k] = m;
    out.std_error[k] = n > 1 ? std::sqrt(std::max(0.0, (s2 - n * m * m) / (n - 1)) / n) : 0.0;
  }
  return out;
}

EstimatorFactory grid_estimator(const ModelSpec& spec, std::vector<GridAxis> axes, GridOptions options) {
  return [&spec, axes = std::move(axes), options](std::uint64_t) -> Estimator {
    auto tracker = std::make_shared<GridTracker>(spec, axes, options);
    return [tracker](const EstimationStep& s) -> Vector {
      const auto& step = s.k == 0 ? tracker->start(*s.observation) : tracker->advance(*s.control, *s.observation);
      return step.mse.mean;
    };
  };
}

EstimatorFactory particle_estimator(const ModelSpec& spec, FilterConfig cfg) {
  return [&spec, cfg](std::uint64_t seed) -> Estimator {
    auto state = std::make_shared<std::pair<Rng, ParticleSet>>(Rng(seed), ParticleSet{});
    return [&spec, cfg, state](const EstimationStep& s) -> Vector {
      auto& [rng, cloud] = *state;
      cloud = s.k == 0 ? filter_start(spec, *s.observation, cfg, rng).cloud
                       : filter_step(cloud, spec, *s.control, *s.observation, cfg, rng).cloud;
      return empirical_mean(cloud);
    };
  };
}

}  // namespace dualpf
