#include "dualpf/tan_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualpf {

namespace {

constexpr double kTwoPi = 6.283185307179586;

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

TruncatedGaussian::TruncatedGaussian(double sigma, double radius) : sigma_(sigma), radius_(radius) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ModelError("truncated Gaussian: sigma must be positive");
  if (!(radius > 0.0)) throw ModelError("truncated Gaussian: radius must be positive");
  const double mass = std::isinf(radius) ? 1.0 : std::erf(radius / std::sqrt(2.0));
  norm_ = 1.0 / (sigma * std::sqrt(kTwoPi) * mass);
}

double TruncatedGaussian::density(double e) const {
  const double z = e / sigma_;
  if (std::abs(z) > radius_) return 0.0;
  return norm_ * std::exp(-0.5 * z * z);
}

double TruncatedGaussian::sample(Rng& rng) const {
  if (radius_ >= 1.0) {
    for (;;) {
      const double z = standard_normal(rng);
      if (std::abs(z) <= radius_) return sigma_ * z;
    }
  }
  for (;;) {
    const double z = radius_ * (2.0 * uniform01(rng) - 1.0);
    if (uniform01(rng) < std::exp(-0.5 * z * z)) return sigma_ * z;
  }
}

void TanParams::validate() const {
  if (!(dt > 0.0)) throw ModelError("tan: dt must be positive");
  if (!(U_max > 0.0)) throw ModelError("tan: U_max must be positive");
  if (!Q.allFinite() || (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ModelError("tan: Q must be finite and symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(Q);
  if (eig.eigenvalues().minCoeff() < -1e-12) throw ModelError("tan: Q must be positive semidefinite");
  if (!((noise_sigma.array() > 0.0).all()) || !noise_sigma.allFinite())
    throw ModelError("tan: noise sigmas must be positive");
  if (!(noise_support_radius > 0.0)) throw ModelError("tan: noise support radius must be positive");
  if (!initial_mean.allFinite() || !initial_cov.allFinite()) throw ModelError("tan: non-finite initial law");
}

GaussianLaw::GaussianLaw(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const auto n = mean_.size();
  if (cov_.rows() != n || cov_.cols() != n) throw ModelError("Gaussian law: covariance size mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
  if (eig.info() != Eigen::Success) throw ModelError("Gaussian law: eigen decomposition failed");
  const Vector d = eig.eigenvalues();
  if (d.minCoeff() < -1e-12 * std::max(1.0, d.maxCoeff())) throw ModelError("Gaussian law: covariance not PSD");
  factor_ = eig.eigenvectors() * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  has_density_ = d.minCoeff() > 1e-14 * std::max(1.0, d.maxCoeff());
  if (has_density_) {
    Eigen::LLT<Matrix> llt(cov_);
    precision_ = llt.solve(Matrix::Identity(n, n));
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(Matrix(llt.matrixL())(i, i));
    log_norm_ = -0.5 * (static_cast<double>(n) * std::log(kTwoPi) + logdet);
  }
}

void GaussianLaw::sample(VectorView offset, Rng& rng, VectorSlot out) const {
  Vector z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  out = mean_ + offset + factor_ * z;
}

double GaussianLaw::density(VectorView x, VectorView center) const {
  if (!has_density_) throw ModelError("Gaussian law: singular covariance has no density");
  const Vector r = x - center - mean_;
  return std::exp(log_norm_ - 0.5 * r.dot(precision_ * r));
}

double GaussianLaw::peak() const {
  if (!has_density_) throw ModelError("Gaussian law: singular covariance has no density");
  return std::exp(log_norm_);
}

Eigen::Vector4d tan_observation_mean(const TerrainMap& terrain, VectorView x) {
  return {x[3], x[4], x[5], x[2] - terrain.height(Eigen::Vector2d(x[0], x[1]))};
}

TanModel build_tan_model(std::shared_ptr<const TerrainMap> terrain, const TanParams& params) {
  if (!terrain) throw ModelError("tan: terrain map required");
  params.validate();
  TanModel m;
  m.terrain = terrain;
  m.params = params;
  const double dt = params.dt;
  m.A.setIdentity();
  m.A.block<3, 3>(0, 3) = dt * Eigen::Matrix3d::Identity();
  m.B.setZero();
  if (params.position_coupling) m.B.block<3, 3>(0, 0) = 0.5 * dt * dt * Eigen::Matrix3d::Identity();
  m.B.block<3, 3>(3, 0) = dt * Eigen::Matrix3d::Identity();

  const Eigen::Matrix<double, 6, 6> A = m.A;
  const Eigen::Matrix<double, 6, 3> B = m.B;
  const ControlSet uset = ControlSet::ball(params.U_max);
  const auto process = std::make_shared<const GaussianLaw>(Vector::Zero(6), Matrix(params.Q));
  const auto prior = std::make_shared<const GaussianLaw>(Vector(params.initial_mean), Matrix(params.initial_cov));
  std::vector<TruncatedGaussian> channels;
  for (int c = 0; c < 4; ++c) channels.emplace_back(params.noise_sigma[c], params.noise_support_radius);
  const auto noise = std::make_shared<const std::vector<TruncatedGaussian>>(std::move(channels));
  const bool off_map_zero = params.zero_likelihood_off_map;

  ModelSpec& s = m.spec;
  s.name = "tan";
  s.state_dim = 6;
  s.control_dim = 3;
  s.obs_dim = 4;
  s.control_set = uset;
  s.transition_mean = [A, B, uset](VectorView x, VectorView u, VectorSlot next) {
    next = A * x + B * uset.project(u);
  };
  s.transition_sample = [A, B, uset, process](VectorView x, VectorView u, Rng& rng, VectorSlot next) {
    const Vector center = A * x + B * uset.project(u);
    process->sample(center, rng, next);
  };
  s.transition_density = [A, B, uset, process](VectorView next, VectorView x, VectorView u) {
    const Vector center = A * x + B * uset.project(u);
    return process->density(next, center);
  };
  s.observation_mean = [terrain](VectorView x, VectorSlot y) { y = tan_observation_mean(*terrain, x); };
  s.observation_sample = [terrain, noise](VectorView x, Rng& rng, VectorSlot y) {
    y = tan_observation_mean(*terrain, x);
    for (int c = 0; c < 4; ++c) y[c] += (*noise)[static_cast<std::size_t>(c)].sample(rng);
  };
  s.likelihood = [terrain, noise, off_map_zero](VectorView y, VectorView x) {
    const Eigen::Vector2d p(x[0], x[1]);
    if (off_map_zero && !terrain->contains(p)) return 0.0;
    const Eigen::Vector4d h = tan_observation_mean(*terrain, x);
    double r = 1.0;
    for (int c = 0; c < 4 && r > 0.0; ++c) r *= (*noise)[static_cast<std::size_t>(c)].density(y[c] - h[c]);
    return r;
  };
  s.initial_sample = [prior](Rng& rng, VectorSlot x) { prior->sample(Vector::Zero(6), rng, x); };
  s.initial_density = [prior](VectorView x) { return prior->density(x, Vector::Zero(6)); };
  s.cost_control = zero_control_cost();
  s.cost_estimation = squared_error;
  s.check();
  return m;
}

void TanSliceParams::validate() const {
  if (!(dt > 0.0) || !(U_max > 0.0) || !(process_sd > 0.0) || !(noise_sigma > 0.0) ||
      !(noise_support_radius > 0.0) || !(initial_sd > 0.0) || !(length > 0.0))
    throw ModelError("tan slice: parameters must be positive");
  if (!(direction.norm() > 0.0)) throw ModelError("tan slice: direction must be nonzero");
}

double TanSliceModel::profile(double s) const {
  return terrain->height(params.start + s * params.direction.normalized());
}

TanSliceModel build_tan_slice_model(std::shared_ptr<const TerrainMap> terrain, const TanSliceParams& params) {
  if (!terrain) throw ModelError("tan slice: terrain map required");
  params.validate();
  TanSliceModel m;
  m.terrain = terrain;
  m.params = params;
  const Eigen::Vector2d start = params.start;
  const Eigen::Vector2d dir = params.direction.normalized();
  const double len = params.length;
  const double alt = params.altitude;
  const double dt = params.dt;
  const double q = params.process_sd;
  const ControlSet uset = ControlSet::ball(params.U_max);
  const TruncatedGaussian eta(params.noise_sigma, params.noise_support_radius);
  const double m0 = params.initial_mean;
  const double s0 = params.initial_sd;
  auto h = [terrain, start, dir](double s) { return terrain->height(start + s * dir); };
  const double gauss_norm = 1.0 / std::sqrt(kTwoPi);

  ModelSpec& sp = m.spec;
  sp.name = "tan_slice";
  sp.state_dim = 1;
  sp.control_dim = 1;
  sp.obs_dim = 1;
  sp.control_set = uset;
  sp.transition_mean = [dt, uset](VectorView x, VectorView u, VectorSlot next) {
    next[0] = x[0] + dt * uset.project(u)[0];
  };
  sp.transition_sample = [dt, q, uset](VectorView x, VectorView u, Rng& rng, VectorSlot next) {
    next[0] = x[0] + dt * uset.project(u)[0] + q * standard_normal(rng);
  };
  sp.transition_density = [dt, q, uset, gauss_norm](VectorView next, VectorView x, VectorView u) {
    const double z = (next[0] - x[0] - dt * uset.project(u)[0]) / q;
    return gauss_norm / q * std::exp(-0.5 * z * z);
  };
  sp.observation_mean = [h, alt](VectorView x, VectorSlot y) { y[0] = alt - h(x[0]); };
  sp.observation_sample = [h, alt, eta](VectorView x, Rng& rng, VectorSlot y) {
    y[0] = alt - h(x[0]) + eta.sample(rng);
  };
  sp.likelihood = [h, alt, eta, len](VectorView y, VectorView x) {
    if (x[0] < 0.0 || x[0] > len) return 0.0;
    return eta.density(y[0] - (alt - h(x[0])));
  };
  sp.initial_sample = [m0, s0](Rng& rng, VectorSlot x) { x[0] = m0 + s0 * standard_normal(rng); };
  sp.initial_density = [m0, s0, gauss_norm](VectorView x) {
    const double z = (x[0] - m0) / s0;
    return gauss_norm / s0 * std::exp(-0.5 * z * z);
  };
  sp.cost_control = zero_control_cost();
  sp.cost_estimation = squared_error;
  sp.check();
  return m;
}

AssumptionReport verify_assumptions(const TanModel& model, const TanSweep& sweep) {
  const ModelSpec& spec = model.spec;
  const TerrainMap& map = *model.terrain;
  const TanParams& P = model.params;
  AssumptionReport out;
  out.norm_rho_phi2_inf = Vector::Zero(6);
  out.norm_rho_phi_inf = Vector::Zero(6);
  auto add = [&](std::string name, bool ok, double defect, std::string msg) {
    out.report.checks.push_back({std::move(name), defect, ok, std::move(msg)});
  };

  // Sweep states: horizontal grid (map plus margin) x altitudes x velocity combinations.
  const Eigen::Vector2d lo = map.origin() - Eigen::Vector2d::Constant(sweep.position_margin);
  const Eigen::Vector2d hi = map.upper_corner() + Eigen::Vector2d::Constant(sweep.position_margin);
  std::vector<Vector> states;
  const int n = std::max(sweep.position_nodes, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (double z : sweep.altitudes)
        for (double v1 : sweep.speeds)
          for (double v2 : sweep.speeds)
            for (double v3 : sweep.speeds) {
              Vector x(6);
              x << lo.x() + (hi.x() - lo.x()) * i / (n - 1), lo.y() + (hi.y() - lo.y()) * j / (n - 1), z, v1, v2, v3;
              states.push_back(x);
            }
  Rng rng(derive_seed(sweep.seed, {0x5e11ULL}));
  std::vector<Vector> observations;  // noisy observations of on-map states
  for (std::size_t r = 0; r < sweep.random_probes; ++r) {
    Vector x = states[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(states.size()))];
    x[0] = map.origin().x() + uniform01(rng) * (map.upper_corner().x() - map.origin().x());
    x[1] = map.origin().y() + uniform01(rng) * (map.upper_corner().y() - map.origin().y());
    Vector y(4);
    spec.observation_sample(x, rng, y);
    observations.push_back(y);
  }

  // (a) finiteness of rho and K
  std::size_t bad_rho = 0, bad_K = 0;
  std::string first_bad;
  Vector y(4), next(6);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Vector& x = states[i];
    const Vector& yo = observations[i % observations.size()];
    const double r = spec.likelihood(yo, x);
    if (!std::isfinite(r) || r < 0.0) {
      if (!bad_rho++) first_bad = "rho at state index " + std::to_string(i);
    }
  }
  add("rho finite", bad_rho == 0, static_cast<double>(bad_rho),
      bad_rho ? first_bad : "rho finite and nonnegative on " + std::to_string(states.size()) + " probes");

  const bool kernel_ok = [&] {
    try {
      spec.transition_mean(states.front(), Vector::Zero(3), next);
      (void)spec.transition_density(next, states.front(), Vector::Zero(3));
      return true;
    } catch (const ModelError&) {
      return false;
    }
  }();
  add("K has a density", kernel_ok, kernel_ok ? 0.0 : 1.0,
      kernel_ok ? "process covariance is positive definite" : "process covariance Q is singular; K is unbounded");

  // (b) sup-norms
  if (kernel_ok) {
    const Vector controls[] = {Vector::Zero(3), Vector::Constant(3, P.U_max), Vector::Constant(3, -0.5 * P.U_max)};
    for (std::size_t i = 0; i < states.size(); i += 7) {
      for (const auto& u : controls) {
        spec.transition_mean(states[i], u, next);
        const double k = spec.transition_density(next, states[i], u);
        if (!std::isfinite(k)) ++bad_K;
        out.norm_K_inf = std::max(out.norm_K_inf, k);
        spec.transition_sample(states[i], u, rng, next);
        const double k2 = spec.transition_density(next, states[i], u);
        if (!std::isfinite(k2)) ++bad_K;
        out.norm_K_inf = std::max(out.norm_K_inf, k2);
      }
    }
    add("K finite", bad_K == 0, static_cast<double>(bad_K), "transition density finite on probes");
    out.norm_K_analytic = 1.0 / (std::pow(kTwoPi, 3.0) * std::sqrt(P.Q.determinant()));
    const double rel = std::abs(out.norm_K_inf - out.norm_K_analytic) / out.norm_K_analytic;
    add("sup K matches Gaussian peak", rel < 1e-6, rel,
        "sup K = " + fmt(out.norm_K_inf) + ", analytic " + fmt(out.norm_K_analytic));
  }

  for (const auto& x : states) {
    spec.observation_mean(x, y);
    for (int pass = 0; pass < 2; ++pass) {
      const Vector& yy = pass == 0 ? y : observations[static_cast<std::size_t>(uniform01(rng) * observations.size())];
      const double r = spec.likelihood(yy, x);
      out.norm_rho_inf = std::max(out.norm_rho_inf, r);
      for (int j = 0; j < 6; ++j) {
        out.norm_rho_phi2_inf[j] = std::max(out.norm_rho_phi2_inf[j], x[j] * x[j] * r);
        out.norm_rho_phi_inf[j] = std::max(out.norm_rho_phi_inf[j], std::abs(x[j]) * r);
      }
    }
  }
  const bool norms_finite = std::isfinite(out.norm_rho_inf) && out.norm_rho_phi2_inf.allFinite() &&
                            out.norm_rho_phi_inf.allFinite() && (!kernel_ok || std::isfinite(out.norm_K_inf));
  add("sup-norms finite", norms_finite && kernel_ok, norms_finite ? 0.0 : 1.0,
      "||rho|| = " + fmt(out.norm_rho_inf) + ", max_j ||x_j^2 rho|| = " + fmt(out.norm_rho_phi2_inf.maxCoeff()));

  // (c) x_i^2 rho vanishes outside the noise support and off the map
  const bool truncated = std::isfinite(P.noise_support_radius);
  std::vector<double> radii;
  if (truncated)
    radii = {P.noise_support_radius + sweep.support_margin};
  else
    radii = sweep.untruncated_probe_radii;
  std::size_t nonzero = 0;
  std::string where;
  for (std::size_t r = 0; r < observations.size(); ++r) {
    const Vector& yo = observations[r];
    // a state with zero residual on every channel, on the map
    Vector x(6);
    x[0] = map.origin().x() + uniform01(rng) * (map.upper_corner().x() - map.origin().x());
    x[1] = map.origin().y() + uniform01(rng) * (map.upper_corner().y() - map.origin().y());
    x[3] = yo[0];
    x[4] = yo[1];
    x[5] = yo[2];
    x[2] = yo[3] + map.height(Eigen::Vector2d(x[0], x[1]));
    for (int c = 0; c < 4; ++c) {
      for (double rad : radii) {
        for (double sign : {-1.0, 1.0}) {
          Vector xp = x;
          const int coord = c < 3 ? 3 + c : 2;
          xp[coord] += sign * rad * P.noise_sigma[c];
          const double v = xp[coord] * xp[coord] * spec.likelihood(yo, xp);
          if (v != 0.0 && !nonzero++)
            where = "channel " + std::to_string(c) + " at residual " + fmt(sign * rad) + " sigma";
        }
      }
    }
  }
  add("x_i^2 rho vanishes outside noise support", nonzero == 0, static_cast<double>(nonzero),
      nonzero ? "nonzero " + where : "zero at " + fmt(radii.front()) + " sigma on all channels");

  std::size_t off_nonzero = 0;
  for (std::size_t r = 0; r < observations.size(); ++r) {
    const Vector& yo = observations[r];
    const double offsets[] = {-sweep.position_margin, sweep.position_margin};
    for (int axis = 0; axis < 2; ++axis) {
      for (double off : offsets) {
        Vector x(6);
        x[0] = 0.5 * (map.origin().x() + map.upper_corner().x());
        x[1] = 0.5 * (map.origin().y() + map.upper_corner().y());
        x[axis] = off < 0 ? map.origin()[axis] + off : map.upper_corner()[axis] + off;
        x[3] = yo[0];
        x[4] = yo[1];
        x[5] = yo[2];
        x[2] = yo[3] + map.height(Eigen::Vector2d(x[0], x[1]));
        if (x[axis] * x[axis] * spec.likelihood(yo, x) != 0.0) ++off_nonzero;
      }
    }
  }
  add("x_i^2 rho vanishes off the map", off_nonzero == 0, static_cast<double>(off_nonzero),
      off_nonzero ? "likelihood is positive beyond the map footprint" : "zero beyond the footprint");
  return out;
}

}  // namespace dualpf
