#include "dualpf/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dualpf {

bool ControlSet::contains(VectorView u, double tol) const {
  if (kind == Kind::unconstrained) return true;
  return u.norm() <= radius + tol;
}

Vector ControlSet::project(VectorView u) const {
  Vector out = u;
  if (kind == Kind::ball) {
    const double n = out.norm();
    if (n > radius && n > 0.0) out *= radius / n;
  }
  return out;
}

void ModelSpec::check() const {
  if (state_dim <= 0 || control_dim <= 0 || obs_dim <= 0)
    throw ModelError("model '" + name + "': dimensions must be positive");
  if (!transition_sample || !transition_density || !observation_sample || !likelihood ||
      !initial_sample || !initial_density || !cost_control || !cost_estimation)
    throw ModelError("model '" + name + "': missing required procedure");
  if (control_set.kind == ControlSet::Kind::ball && !(control_set.radius > 0.0))
    throw ModelError("model '" + name + "': control ball radius must be positive");
}

double squared_error(VectorView state, VectorView estimate) {
  return (state - estimate).squaredNorm();
}

ControlCost zero_control_cost() {
  return [](VectorView, VectorView) { return 0.0; };
}

void History::start(const Vector& y0) {
  observations.assign(1, y0);
  controls.clear();
}

void History::append(const Vector& control, const Vector& observation) {
  if (observations.empty()) throw ModelError("History::append before start");
  controls.push_back(control);
  observations.push_back(observation);
}

bool ValidationReport::passed() const {
  if (checks.empty()) return false;
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

namespace {

std::vector<double> simpson_weights(std::size_t n, double h) {
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || i + 1 == n) w[i] = h / 3.0;
    else w[i] = (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
  }
  return w;
}

std::string fmt_vec(VectorView v) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ')';
  return os.str();
}

// Integrates f over the axis; fails on the first non-finite value.
struct AxisIntegral {
  double value = 0.0;
  bool finite = true;
  double bad_node = 0.0;
};

template <class F>
AxisIntegral integrate_axis(const QuadratureAxis& axis, double center, F&& f) {
  std::size_t n = axis.nodes;
  if (n < 3) n = 3;
  if (n % 2 == 0) ++n;
  const double lo = axis.lower + (axis.centered ? center : 0.0);
  const double hi = axis.upper + (axis.centered ? center : 0.0);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  const auto w = simpson_weights(n, h);
  AxisIntegral out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double v = f(x);
    if (!std::isfinite(v)) {
      out.finite = false;
      out.bad_node = x;
      return out;
    }
    out.value += w[i] * v;
  }
  return out;
}

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, const QuadratureGrid& grid, double tolerance) {
  if (spec.state_dim != 1 || spec.obs_dim != 1)
    throw ModelError("validate_model: quadrature checks need 1-D state and observation spaces");
  ValidationReport report;
  std::vector<Vector> controls = grid.test_controls;
  if (controls.empty()) controls.push_back(spec.zero_control());

  Vector z(1), y(1), center(1);
  for (const auto& x : grid.test_states) {
    for (const auto& u : controls) {
      double c = 0.0;
      if (grid.next_state.centered && spec.transition_mean) {
        spec.transition_mean(x, u, center);
        c = center[0];
      }
      const auto integral = integrate_axis(grid.next_state, c, [&](double zz) {
        z[0] = zz;
        return spec.transition_density(z, x, u);
      });
      ValidationCheck check;
      check.name = "transition_density x=" + fmt_vec(x) + " u=" + fmt_vec(u);
      if (!integral.finite) {
        check.defect = std::numeric_limits<double>::infinity();
        check.message = "non-finite density at node z=" + std::to_string(integral.bad_node);
      } else {
        check.defect = std::abs(integral.value - 1.0);
        check.passed = check.defect < tolerance;
      }
      report.checks.push_back(std::move(check));
    }
  }

  for (const auto& x : grid.test_states) {
    double c = 0.0;
    if (grid.observation.centered && spec.observation_mean) {
      spec.observation_mean(x, center);
      c = center[0];
    }
    const auto integral = integrate_axis(grid.observation, c, [&](double yy) {
      y[0] = yy;
      return spec.likelihood(y, x);
    });
    ValidationCheck check;
    check.name = "likelihood x=" + fmt_vec(x);
    if (!integral.finite) {
      check.defect = std::numeric_limits<double>::infinity();
      check.message = "non-finite likelihood at node y=" + std::to_string(integral.bad_node);
    } else {
      check.defect = std::abs(integral.value - 1.0);
      check.passed = check.defect < tolerance;
    }
    report.checks.push_back(std::move(check));
  }
  return report;
}

}  // namespace dualpf
