#include "dualpf/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dualpf {

const char* to_string(NormMode mode) { return mode == NormMode::conditional ? "conditional" : "uniform"; }

std::vector<Vector> grid_points(const std::vector<GridAxis>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.count;
  const GridDistribution g(axes, Vector::Zero(static_cast<Eigen::Index>(total)));
  std::vector<Vector> out;
  out.reserve(total);
  for (Eigen::Index i = 0; i < g.size(); ++i) out.push_back(g.node(i));
  return out;
}

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw BoundError(std::string("estimate_norms: non-finite ") + what);
  return v;
}

void require_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw BoundError("eps must lie in (0,1)");
}

}  // namespace

NormEstimates estimate_norms(const ModelSpec& spec, const SweepGrid& sweep, NormMode mode) {
  if (mode == NormMode::conditional && (sweep.observations.size() != 1 || sweep.controls.size() != 1))
    throw BoundError("estimate_norms: conditional mode needs exactly one observation and one control");
  if (sweep.states.empty() || sweep.observations.empty() || sweep.controls.empty())
    throw BoundError("estimate_norms: empty sweep");

  NormEstimates out;
  out.mode = mode;
  out.norm_rho_phi2 = Vector::Zero(spec.state_dim);
  out.norm_rho_phi = Vector::Zero(spec.state_dim);

  for (const auto& y : sweep.observations) {
    for (const auto& x : sweep.states) {
      const double r = checked(spec.likelihood(y, x), "likelihood");
      out.norm_rho = std::max(out.norm_rho, std::abs(r));
      for (int j = 0; j < spec.state_dim; ++j) {
        out.norm_rho_phi2[j] = std::max(out.norm_rho_phi2[j], checked(std::abs(x[j] * x[j] * r), "x_j^2 rho"));
        out.norm_rho_phi[j] = std::max(out.norm_rho_phi[j], checked(std::abs(x[j] * r), "x_j rho"));
      }
    }
  }

  Vector mean(spec.state_dim);
  for (const auto& u : sweep.controls) {
    const Vector up = spec.control_set.project(u);
    for (const auto& x : sweep.states) {
      for (const auto& xn : sweep.successors)
        out.norm_K = std::max(out.norm_K, checked(spec.transition_density(xn, x, up), "transition density"));
      if (spec.transition_mean) {
        spec.transition_mean(x, up, mean);
        out.norm_K = std::max(out.norm_K, checked(spec.transition_density(mean, x, up), "transition density"));
      }
    }
  }
  return out;
}

BoundConstants initial_constants(int state_dim, double C_tilde, NormMode mode) {
  if (!(C_tilde > 0.0)) throw BoundError("C_tilde must be positive");
  BoundConstants c;
  c.k = 0;
  c.M = Vector::Constant(state_dim, 3.0);
  c.C = Vector::Constant(state_dim, 8.0 * C_tilde);
  c.alpha = Vector::Zero(state_dim);
  c.beta = Vector::Zero(state_dim);
  c.C_tilde = C_tilde;
  c.phi_norm_k2 = Vector::Ones(state_dim);
  c.mode = mode;
  return c;
}

BoundConstants recurse_constants(const BoundConstants& prev, const NormEstimates& norms, double gamma, double eps,
                                 double C_tilde, double mean_pred_likelihood, double rho_k2) {
  require_eps(eps);
  if (!(gamma > 0.0)) throw BoundError("gamma must be positive");
  if (!(C_tilde > 0.0)) throw BoundError("C_tilde must be positive");
  const auto n = prev.C.size();
  if (prev.M.size() != n || norms.norm_rho_phi2.size() != n || norms.norm_rho_phi.size() != n)
    throw BoundError("recurse_constants: dimension mismatch");

  const bool uniform = norms.mode == NormMode::uniform;
  const double half = 0.5 * gamma;
  double ab_denominator;  // shared denominator of alpha and beta
  double gap;             // |gamma/2 - <mu_{k|k-1}, rho>| or gamma/2
  double rho_term;        // ||rho||_{k,2} or ||rho||_inf
  if (uniform) {
    ab_denominator = gamma * gamma / 2.0;
    gap = half;
    rho_term = norms.norm_rho;
  } else {
    if (!(mean_pred_likelihood > gamma))
      throw BoundError("recurse_constants: <mu_{k|k-1}, rho> = " + std::to_string(mean_pred_likelihood) +
                       " does not exceed gamma = " + std::to_string(gamma));
    ab_denominator = half * mean_pred_likelihood;
    gap = std::abs(half - mean_pred_likelihood);
    rho_term = rho_k2;
  }
  if (!(ab_denominator > 0.0) || !(gap > 0.0)) throw BoundError("recurse_constants: zero denominator");

  BoundConstants c;
  c.k = prev.k + 1;
  c.gamma = gamma;
  c.eps = eps;
  c.C_tilde = C_tilde;
  c.mode = norms.mode;
  c.rho_k2 = uniform ? norms.norm_rho : rho_k2;
  c.mean_pred_likelihood = uniform ? gamma : mean_pred_likelihood;
  c.phi_norm_k2 = prev.phi_norm_k2;
  c.C.resize(n);
  c.M.resize(n);
  c.alpha.resize(n);
  c.beta.resize(n);

  const double K = norms.norm_K;
  const double theta = (4.0 - eps) / (1.0 - eps) + 1.0;
  const double s = std::pow(2.0, 1.5) * std::sqrt(C_tilde);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double beta = norms.norm_rho * (norms.norm_rho_phi[j] + half) / ab_denominator;
    const double alpha = K * K * norms.norm_rho * (norms.norm_rho_phi2[j] + half) / ab_denominator;
    const double M = 2.0 + alpha * (1.0 + theta * prev.M[j]);
    const double sqrt_prev_M = std::sqrt(prev.M[j]);
    const double sqrt_prev_C = std::sqrt(prev.C[j]);
    const double sqrt_C = s * std::sqrt(M) + s * beta / std::sqrt(1.0 - eps) * sqrt_prev_M +
                          std::pow(K, 1.5) * rho_term * beta / ((1.0 - eps) * gap) * sqrt_prev_M * sqrt_prev_C +
                          K * beta * sqrt_prev_C;
    c.alpha[j] = alpha;
    c.beta[j] = beta;
    c.M[j] = M;
    c.C[j] = sqrt_C * sqrt_C;
  }
  c.n_threshold = threshold_value(prev.C, norms, gamma, eps, mean_pred_likelihood, rho_k2, norms.mode);
  return c;
}

double threshold_value(const Vector& prev_C, const NormEstimates& norms, double gamma, double eps,
                       double mean_pred_likelihood, double rho_k2, NormMode mode) {
  require_eps(eps);
  if (!(gamma > 0.0)) throw BoundError("gamma must be positive");
  if (prev_C.size() == 0) throw BoundError("threshold_N: empty constant vector");
  const double half = 0.5 * gamma;
  const double gap = mode == NormMode::uniform ? half : std::abs(half - mean_pred_likelihood);
  const double rho = mode == NormMode::uniform ? norms.norm_rho : rho_k2;
  if (!(gap > 0.0)) throw BoundError("threshold_N: zero denominator");
  return rho * rho * norms.norm_K * norms.norm_K * prev_C.maxCoeff() / (gap * gap * eps);
}

std::uint64_t threshold_N(const Vector& prev_C, const NormEstimates& norms, double gamma, double eps,
                          double mean_pred_likelihood, double rho_k2, NormMode mode) {
  const double v = threshold_value(prev_C, norms, gamma, eps, mean_pred_likelihood, rho_k2, mode);
  if (!std::isfinite(v) || v > 1.8e19) throw BoundError("threshold_N: threshold exceeds 64-bit range");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(v)));
}

double conditional_upper(double e_star, const BoundConstants& consts, double N, double eps_bound) {
  if (!(eps_bound > 0.0)) throw BoundError("eps_bound must be positive");
  double filter_term = 0.0;
  for (Eigen::Index j = 0; j < consts.C.size(); ++j)
    filter_term += consts.C[j] * consts.phi_norm_k2[j] * consts.phi_norm_k2[j];
  return (1.0 + eps_bound) * e_star + (1.0 + 1.0 / eps_bound) * filter_term / N;
}

BoundInterval conditional_bound(double e_star, const BoundConstants& consts, std::uint64_t N, double eps_bound) {
  if (N == 0 || static_cast<double>(N) < consts.n_threshold)
    throw BoundError("conditional_bound: N = " + std::to_string(N) + " is below the threshold " +
                     std::to_string(consts.n_threshold) + "; more particles are required");
  return {e_star, conditional_upper(e_star, consts, static_cast<double>(N), eps_bound)};
}

BoundInterval total_bound(double e_star_tot, const BoundConstants& consts_uniform, const Vector& expected_phi_norms,
                          std::uint64_t N, double q) {
  if (!(q > 0.0 && q < 1.0)) throw BoundError("total_bound: q must lie in (0,1)");
  if (consts_uniform.mode != NormMode::uniform) throw BoundError("total_bound: constants must be in uniform mode");
  if (expected_phi_norms.size() != consts_uniform.C.size()) throw BoundError("total_bound: dimension mismatch");
  if (N == 0 || static_cast<double>(N) < consts_uniform.n_threshold)
    throw BoundError("total_bound: N = " + std::to_string(N) + " is below the threshold " +
                     std::to_string(consts_uniform.n_threshold));
  const double n = static_cast<double>(N);
  const double nq = std::pow(n, q);
  const double filter_term = consts_uniform.C.dot(expected_phi_norms);
  return {e_star_tot, (1.0 + 1.0 / nq) * e_star_tot + (1.0 + nq) * filter_term / n};
}

bool verify_dominance(const BoundConstants& conditional, const BoundConstants& uniform) {
  if (conditional.C.size() != uniform.C.size() || conditional.M.size() != uniform.M.size() ||
      conditional.C.size() != conditional.M.size())
    throw BoundError("verify_dominance: dimension mismatch");
  return (conditional.C.array() <= uniform.C.array()).all() && (conditional.M.array() <= uniform.M.array()).all();
}

double BoundSettings::gamma_at(long k) const {
  if (gamma.empty()) throw BoundError("BoundSettings: no gamma configured");
  return gamma.size() == 1 ? gamma.front() : gamma.at(static_cast<std::size_t>(k));
}

std::vector<Vector> phi_norms_k2(const std::vector<GridTracker::Step>& steps) {
  std::vector<Vector> out;
  Vector running;
  for (const auto& s : steps) {
    const Vector root = s.second_moments.cwiseSqrt();
    running = running.size() == 0 ? Vector(root.cwiseMax(1.0)) : Vector(running.cwiseMax(root));
    out.push_back(running);
  }
  return out;
}

std::vector<BoundConstants> conditional_schedule(const ModelSpec& spec, const SweepGrid& base, const History& history,
                                                 const std::vector<GridTracker::Step>& steps,
                                                 const BoundSettings& settings) {
  if (!history.valid() || static_cast<std::size_t>(history.length() + 1) != steps.size())
    throw BoundError("conditional_schedule: history and oracle trace lengths differ");
  const auto phi = phi_norms_k2(steps);
  std::vector<BoundConstants> out;
  out.push_back(initial_constants(spec.state_dim, settings.C_tilde, NormMode::conditional));
  out.back().eps = settings.eps;
  out.back().gamma = settings.gamma_at(0);
  out.back().phi_norm_k2 = phi[0];
  out.back().rho_k2 = steps[0].posterior_likelihood;
  out.back().mean_pred_likelihood = steps[0].predicted_likelihood;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    SweepGrid sweep = base;
    sweep.observations = {history.observations[k]};
    sweep.controls = {history.controls[k - 1]};
    const NormEstimates norms = estimate_norms(spec, sweep, NormMode::conditional);
    BoundConstants c = recurse_constants(out.back(), norms, settings.gamma_at(static_cast<long>(k)), settings.eps,
                                         settings.C_tilde, steps[k].predicted_likelihood,
                                         steps[k].posterior_likelihood);
    c.phi_norm_k2 = phi[k];
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<BoundConstants> uniform_schedule(const NormEstimates& uniform_norms, int state_dim, std::size_t horizon,
                                             const BoundSettings& settings) {
  if (uniform_norms.mode != NormMode::uniform) throw BoundError("uniform_schedule: norms must be in uniform mode");
  std::vector<BoundConstants> out;
  if (horizon == 0) return out;
  out.push_back(initial_constants(state_dim, settings.C_tilde, NormMode::uniform));
  out.back().eps = settings.eps;
  out.back().gamma = settings.gamma_at(0);
  out.back().rho_k2 = uniform_norms.norm_rho;
  for (std::size_t k = 1; k < horizon; ++k) {
    const double g = settings.gamma_at(static_cast<long>(k));
    out.push_back(recurse_constants(out.back(), uniform_norms, g, settings.eps, settings.C_tilde, g,
                                    uniform_norms.norm_rho));
  }
  return out;
}

}  // namespace dualpf
