#pragma once

// Scenario-based open-loop MPC whose stage cost adds an information-loss term
// to the control cost, plus the certainty-equivalent baseline.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dualpf/model.hpp"
#include "dualpf/particle_filter.hpp"
#include "dualpf/terrain.hpp"

namespace dualpf {

class PlannerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Optimizer { random_shooting, cross_entropy };

struct DualMpcConfig {
  std::size_t horizon = 5;
  /// Discount alpha in (0, 1].
  double discount = 1.0;
  std::size_t scenario_count = 4;
  std::size_t candidate_count = 32;
  /// lambda; 0 gives the non-dual controller.
  double info_weight = 0.0;
  Optimizer optimizer = Optimizer::random_shooting;
  std::size_t ce_iterations = 3;
  double ce_elite_fraction = 0.2;
  /// Rollouts propagate with process noise when set, with transition_mean otherwise.
  bool scenario_noise = true;
  /// Particles kept (by stride) from the belief cloud for rollouts; 0 keeps all.
  std::size_t planning_particles = 200;
  /// Candidate scale for unconstrained control sets.
  double control_scale = 1.0;

  void validate() const;
};

enum class InfoKind { none, posterior_trace, terrain_gradient_deficit };

struct InfoCostSpec {
  InfoKind kind = InfoKind::none;
  /// Floor eps_g in 1 / (eps_g + |grad h|^2).
  double gradient_floor = 0.1;
  /// State coordinates treated as position (trace) or as horizontal position
  /// (first two entries, for the terrain gradient).
  std::vector<int> position_coords{0, 1};
};

struct InfoCostStats {
  std::size_t clamped_queries = 0;
};

/// g^info on a weighted cloud; nonnegative.
double info_cost(const ParticleSet& cloud, const InfoCostSpec& info, const TerrainMap* terrain,
                 InfoCostStats* stats = nullptr);

/// Controls u_0..u_{H-1}.
using ControlPlan = std::vector<Vector>;

/// Mean over scenarios of sum_t alpha^t (<cloud_t, g^c(., u_t)> + lambda info(cloud_t)),
/// cloud_{t+1} = predict(cloud_t, u_t), with no observation updates inside the horizon.
/// Scenario s draws its noise from derive_seed(scenario_seed, {s}).
double evaluate_plan(const ParticleSet& cloud, const ControlPlan& plan, const ModelSpec& spec,
                     const DualMpcConfig& cfg, const InfoCostSpec& info, const TerrainMap* terrain,
                     std::uint64_t scenario_seed);

struct PlannerDiagnostics {
  double best_cost = 0.0;
  /// Costs of the candidates of the final optimizer iteration, in candidate order.
  std::vector<double> candidate_costs;
  std::size_t best_index = 0;
  std::size_t evaluations = 0;
};

struct PlanResult {
  Vector control;
  ControlPlan plan;
  PlannerDiagnostics diagnostics;
};

/// Receding-horizon dual controller. `warm_start` seeds the cross-entropy mean.
PlanResult plan(const ParticleSet& cloud, const ModelSpec& spec, const DualMpcConfig& cfg, const InfoCostSpec& info,
                const TerrainMap* terrain, Rng& rng, const ControlPlan* warm_start = nullptr);

/// Same optimizer on a Dirac belief at `estimate`, lambda = 0, no scenario noise.
/// Consumes `rng` exactly as plan() does.
PlanResult certainty_equivalent_plan(VectorView estimate, const ModelSpec& spec, const DualMpcConfig& cfg, Rng& rng,
                                     const ControlPlan* warm_start = nullptr);

/// Optimizes over a fixed candidate set; ties go to the lowest index.
PlanResult plan_from_candidates(const ParticleSet& cloud, const std::vector<ControlPlan>& candidates,
                                const ModelSpec& spec, const DualMpcConfig& cfg, const InfoCostSpec& info,
                                const TerrainMap* terrain, std::uint64_t scenario_seed);

/// Uniform draw from the control set (Gaussian with sd control_scale when unconstrained).
Vector sample_control(const ControlSet& set, int dim, double scale, Rng& rng);

/// g^c(x, u) = (x - goal)' diag(state_weights) (x - goal) + control_weight |u|^2.
ControlCost quadratic_goal_cost(Vector goal, Vector state_weights, double control_weight);

/// Shifts a plan one step forward, repeating the last control.
ControlPlan shift_plan(const ControlPlan& plan);

}  // namespace dualpf
