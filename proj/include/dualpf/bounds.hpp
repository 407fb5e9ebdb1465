#pragma once

// Constants, particle-count thresholds and MSE sandwiches for the particle
// filter with selection step.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dualpf/model.hpp"
#include "dualpf/oracle.hpp"

namespace dualpf {

class BoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NormMode { conditional, uniform };

const char* to_string(NormMode mode);

struct NormEstimates {
  double norm_K = 0.0;
  double norm_rho = 0.0;
  Vector norm_rho_phi2;  // per coordinate, sup |x_j^2 rho|
  Vector norm_rho_phi;   // per coordinate, sup |x_j rho|
  NormMode mode = NormMode::conditional;
};

/// Points over which sup-norms are taken.
/// `successors` are the x' probed for K(x'|x,u); the noise-free successor
/// transition_mean(x,u) is always probed as well when the model provides it.
/// In conditional mode `observations` and `controls` hold exactly one entry each.
struct SweepGrid {
  std::vector<Vector> states;
  std::vector<Vector> successors;
  std::vector<Vector> observations;
  std::vector<Vector> controls;
};

/// All nodes of a 1-D or 2-D regular grid as points.
std::vector<Vector> grid_points(const std::vector<GridAxis>& axes);

NormEstimates estimate_norms(const ModelSpec& spec, const SweepGrid& sweep, NormMode mode);

struct BoundConstants {
  long k = 0;
  Vector C;
  Vector M;
  Vector alpha;
  Vector beta;
  double gamma = 0.0;
  double eps = 0.0;
  double C_tilde = 1.0;
  double rho_k2 = 0.0;
  double mean_pred_likelihood = 0.0;
  Vector phi_norm_k2;
  NormMode mode = NormMode::conditional;
  /// Particle count required at time k (1 at k = 0).
  double n_threshold = 1.0;
};

/// Time-0 constants: M = 3, C = 8 C_tilde.
BoundConstants initial_constants(int state_dim, double C_tilde, NormMode mode);

/// One step of the M/C recursion. In uniform mode `mean_pred_likelihood` and
/// `rho_k2` are ignored (gamma and ||rho||_inf take their place).
BoundConstants recurse_constants(const BoundConstants& prev, const NormEstimates& norms, double gamma,
                                 double eps, double C_tilde, double mean_pred_likelihood, double rho_k2);

/// Unrounded threshold expression.
double threshold_value(const Vector& prev_C, const NormEstimates& norms, double gamma, double eps,
                       double mean_pred_likelihood, double rho_k2, NormMode mode);
/// Ceiling of threshold_value.
std::uint64_t threshold_N(const Vector& prev_C, const NormEstimates& norms, double gamma, double eps,
                          double mean_pred_likelihood, double rho_k2, NormMode mode);

struct BoundInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// lower = e*, upper = (1+eps) e* + (1+1/eps) sum_j C_j ||phi_j||_{k,2}^2 / N.
BoundInterval conditional_bound(double e_star, const BoundConstants& consts, std::uint64_t N, double eps_bound);

/// Same right-hand side without the threshold check.
double conditional_upper(double e_star, const BoundConstants& consts, double N, double eps_bound);

/// lower = e*_tot, upper = (1+N^-q) e*_tot + (1+N^q) sum_j C'_j E||phi_j||^2 / N.
BoundInterval total_bound(double e_star_tot, const BoundConstants& consts_uniform, const Vector& expected_phi_norms,
                          std::uint64_t N, double q);

/// C <= C' and M <= M' coordinatewise.
bool verify_dominance(const BoundConstants& conditional, const BoundConstants& uniform);

struct BoundSettings {
  /// gamma_k per time step; a single entry is broadcast.
  std::vector<double> gamma;
  double eps = 0.1;
  double C_tilde = 1.0;

  double gamma_at(long k) const;
};

/// Conditional constants along one information vector, from the grid oracle trace.
/// `base` supplies states and successors; the observation and control are set per k.
std::vector<BoundConstants> conditional_schedule(const ModelSpec& spec, const SweepGrid& base, const History& history,
                                                 const std::vector<GridTracker::Step>& steps,
                                                 const BoundSettings& settings);

/// Uniform (primed) constants for k = 0..horizon-1.
std::vector<BoundConstants> uniform_schedule(const NormEstimates& uniform_norms, int state_dim, std::size_t horizon,
                                             const BoundSettings& settings);

/// Running max(1, <mu_0,phi_j^2>^(1/2), ..., <mu_k,phi_j^2>^(1/2)) from a grid trace.
std::vector<Vector> phi_norms_k2(const std::vector<GridTracker::Step>& steps);

}  // namespace dualpf
