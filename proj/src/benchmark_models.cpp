#include "dualpf/benchmark_models.hpp"

#include <cmath>
#include <memory>

#include "dualpf/tan_model.hpp"

namespace dualpf {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * z * z / var);
}

}  // namespace

ModelSpec make_linear_gaussian_1d(const LinearGaussian1DParams& p) {
  if (!(p.q > 0.0) || !(p.r > 0.0) || !(p.p0 > 0.0)) throw ModelError("linear Gaussian: variances must be positive");
  ModelSpec s;
  s.name = "linear_gaussian_1d";
  s.state_dim = 1;
  s.control_dim = 1;
  s.obs_dim = 1;
  const double sq = std::sqrt(p.q), sr = std::sqrt(p.r), sp0 = std::sqrt(p.p0);
  s.transition_mean = [p](VectorView x, VectorView u, VectorSlot next) { next[0] = p.a * x[0] + p.b * u[0]; };
  s.transition_sample = [p, sq](VectorView x, VectorView u, Rng& rng, VectorSlot next) {
    next[0] = p.a * x[0] + p.b * u[0] + sq * standard_normal(rng);
  };
  s.transition_density = [p](VectorView next, VectorView x, VectorView u) {
    return normal_pdf(next[0], p.a * x[0] + p.b * u[0], p.q);
  };
  s.observation_mean = [p](VectorView x, VectorSlot y) { y[0] = p.c * x[0]; };
  s.observation_sample = [p, sr](VectorView x, Rng& rng, VectorSlot y) { y[0] = p.c * x[0] + sr * standard_normal(rng); };
  s.likelihood = [p](VectorView y, VectorView x) { return normal_pdf(y[0], p.c * x[0], p.r); };
  s.initial_sample = [p, sp0](Rng& rng, VectorSlot x) { x[0] = p.m0 + sp0 * standard_normal(rng); };
  s.initial_density = [p](VectorView x) { return normal_pdf(x[0], p.m0, p.p0); };
  s.cost_control = zero_control_cost();
  s.cost_estimation = squared_error;
  s.check();
  return s;
}

ModelSpec make_linear_gaussian_2d(const LinearGaussian2DParams& p) {
  const auto process = std::make_shared<const GaussianLaw>(Vector::Zero(2), Matrix(p.Q));
  const auto sensor = std::make_shared<const GaussianLaw>(Vector::Zero(2), Matrix(p.R));
  const auto prior = std::make_shared<const GaussianLaw>(Vector(p.m0), Matrix(p.P0));
  if (!process->has_density() || !sensor->has_density() || !prior->has_density())
    throw ModelError("linear Gaussian 2-D: covariances must be positive definite");
  const Eigen::Matrix2d A = p.A, C = p.C;
  const Eigen::Matrix<double, 2, 1> B = p.B;
  ModelSpec s;
  s.name = "linear_gaussian_2d";
  s.state_dim = 2;
  s.control_dim = 1;
  s.obs_dim = 2;
  s.transition_mean = [A, B](VectorView x, VectorView u, VectorSlot next) { next = A * x + B * u; };
  s.transition_sample = [A, B, process](VectorView x, VectorView u, Rng& rng, VectorSlot next) {
    process->sample(A * x + B * u, rng, next);
  };
  s.transition_density = [A, B, process](VectorView next, VectorView x, VectorView u) {
    return process->density(next, A * x + B * u);
  };
  s.observation_mean = [C](VectorView x, VectorSlot y) { y = C * x; };
  s.observation_sample = [C, sensor](VectorView x, Rng& rng, VectorSlot y) { sensor->sample(C * x, rng, y); };
  s.likelihood = [C, sensor](VectorView y, VectorView x) { return sensor->density(y, C * x); };
  s.initial_sample = [prior](Rng& rng, VectorSlot x) { prior->sample(Vector::Zero(2), rng, x); };
  s.initial_density = [prior](VectorView x) { return prior->density(x, Vector::Zero(2)); };
  s.cost_control = zero_control_cost();
  s.cost_estimation = squared_error;
  s.check();
  return s;
}

double wrap_symmetric(double v, double L) {
  const double w = 2.0 * L;
  double r = std::fmod(v + L, w);
  if (r < 0.0) r += w;
  if (r >= w) r -= w;
  return r - L;
}

ModelSpec make_bounded_clutter(const BoundedClutterParams& p) {
  if (!(p.L > 0.0) || !(p.sigma > 0.0)) throw ModelError("bounded clutter: L and sigma must be positive");
  if (!(p.support > 0.0) || !(p.support < p.L)) throw ModelError("bounded clutter: need 0 < support < L");
  if (!(p.clutter >= 0.0 && p.clutter <= 1.0)) throw ModelError("bounded clutter: clutter must lie in [0,1]");
  const double L = p.L;
  const double flat = 1.0 / (2.0 * L);
  const TruncatedGaussian eta(p.sigma, p.support / p.sigma);
  const double pc = p.clutter;
  auto uniform_on = [L](Rng& rng) { return -L + 2.0 * L * uniform01(rng); };
  auto inside = [L](double v) { return v >= -L && v < L; };

  ModelSpec s;
  s.name = "bounded_clutter";
  s.state_dim = 1;
  s.control_dim = 1;
  s.obs_dim = 1;
  s.transition_sample = [uniform_on](VectorView, VectorView, Rng& rng, VectorSlot next) { next[0] = uniform_on(rng); };
  s.transition_density = [flat, inside](VectorView next, VectorView, VectorView) {
    return inside(next[0]) ? flat : 0.0;
  };
  s.transition_mean = [](VectorView, VectorView, VectorSlot next) { next[0] = 0.0; };
  s.observation_mean = [](VectorView x, VectorSlot y) { y[0] = x[0]; };
  s.observation_sample = [pc, L, eta, uniform_on](VectorView x, Rng& rng, VectorSlot y) {
    if (uniform01(rng) < pc)
      y[0] = uniform_on(rng);
    else
      y[0] = wrap_symmetric(x[0] + eta.sample(rng), L);
  };
  s.likelihood = [pc, L, flat, eta, inside](VectorView y, VectorView x) {
    if (!inside(y[0]) || !inside(x[0])) return 0.0;
    return pc * flat + (1.0 - pc) * eta.density(wrap_symmetric(y[0] - x[0], L));
  };
  s.initial_sample = [uniform_on](Rng& rng, VectorSlot x) { x[0] = uniform_on(rng); };
  s.initial_density = [flat, inside](VectorView x) { return inside(x[0]) ? flat : 0.0; };
  s.cost_control = zero_control_cost();
  s.cost_estimation = squared_error;
  s.check();
  return s;
}

}  // namespace dualpf
