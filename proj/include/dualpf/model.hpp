#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualpf/rng.hpp"

namespace dualpf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorView = Eigen::Ref<const Eigen::VectorXd>;
using VectorSlot = Eigen::Ref<Eigen::VectorXd>;

/// Thrown for contract violations on model inputs (bad dimensions, non-finite values).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Admissible control set: all of R^{n_u}, or the Euclidean ball of radius `radius`.
struct ControlSet {
  enum class Kind { unconstrained, ball };
  Kind kind = Kind::unconstrained;
  double radius = 0.0;

  static ControlSet unconstrained() { return {}; }
  static ControlSet ball(double radius) { return {Kind::ball, radius}; }

  bool contains(VectorView u, double tol = 1e-12) const;
  /// Radial projection onto the ball; identity when unconstrained.
  Vector project(VectorView u) const;
};

using TransitionSampler = std::function<void(VectorView state, VectorView control, Rng& rng, VectorSlot next)>;
using TransitionDensity = std::function<double(VectorView next, VectorView state, VectorView control)>;
using TransitionMean = std::function<void(VectorView state, VectorView control, VectorSlot next)>;
using ObservationSampler = std::function<void(VectorView state, Rng& rng, VectorSlot obs)>;
using Likelihood = std::function<double(VectorView obs, VectorView state)>;
using ObservationMean = std::function<void(VectorView state, VectorSlot obs)>;
using InitialSampler = std::function<void(Rng& rng, VectorSlot state)>;
using InitialDensity = std::function<double(VectorView state)>;
using ControlCost = std::function<double(VectorView state, VectorView control)>;
using EstimationCost = std::function<double(VectorView state, VectorView estimate)>;

/// Controlled hidden Markov model.
///
/// All procedures must be pure with respect to the model: randomness flows only
/// through the `Rng&` argument, so a single ModelSpec can be shared by many
/// workers. `transition_mean` and `observation_mean` are the noise-free maps
/// f(x,u,0) and h(x,0); they are optional and only used for deterministic
/// rollouts and for centering quadrature/sweep grids.
struct ModelSpec {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  int obs_dim = 0;

  TransitionSampler transition_sample;
  TransitionDensity transition_density;
  TransitionMean transition_mean;
  ObservationSampler observation_sample;
  Likelihood likelihood;
  ObservationMean observation_mean;
  InitialSampler initial_sample;
  InitialDensity initial_density;
  ControlSet control_set;
  ControlCost cost_control;
  EstimationCost cost_estimation;

  Vector zero_control() const { return Vector::Zero(control_dim); }
  /// Throws ModelError if a required procedure is missing or a dimension is not positive.
  void check() const;
};

/// Squared Euclidean estimation cost, the default g^e.
double squared_error(VectorView state, VectorView estimate);

/// Control cost that is identically zero.
ControlCost zero_control_cost();

/// Information vector I_k = (Y_0, U_0, ..., Y_{k-1}, U_{k-1}, Y_k).
struct History {
  std::vector<Vector> observations;
  std::vector<Vector> controls;

  /// k, the index of the latest observation; -1 when empty.
  long length() const { return static_cast<long>(observations.size()) - 1; }
  bool valid() const {
    return observations.empty() ? controls.empty() : controls.size() + 1 == observations.size();
  }
  void start(const Vector& y0);
  void append(const Vector& control, const Vector& observation);
};

/// One axis of a 1-D quadrature rule (composite Simpson, odd node count).
/// When `centered` is set, [lower, upper] is an offset around the noise-free
/// map (transition_mean / observation_mean) of the point being checked.
struct QuadratureAxis {
  double lower = -10.0;
  double upper = 10.0;
  std::size_t nodes = 2001;
  bool centered = false;
};

struct QuadratureGrid {
  QuadratureAxis next_state;
  QuadratureAxis observation;
  std::vector<Vector> test_states;
  std::vector<Vector> test_controls;
};

struct ValidationCheck {
  std::string name;
  double defect = 0.0;
  bool passed = false;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed() const;
};

/// Checks that the transition kernel and the likelihood integrate to one on
/// the given grid (1-D state and observation spaces only).
ValidationReport validate_model(const ModelSpec& spec, const QuadratureGrid& grid,
                                double tolerance = 1e-6);

}  // namespace dualpf
