#include <doctest.h>

#include <cmath>
#include <limits>

#include "dualpf/tan_model.hpp"
#include "dualpf/terrain.hpp"

using namespace dualpf;

namespace {

std::shared_ptr<const TerrainMap> flat() { return std::make_shared<TerrainMap>(make_flat_terrain(TerrainFootprint{})); }
std::shared_ptr<const TerrainMap> hills() {
  return std::make_shared<TerrainMap>(make_two_hill_terrain(TerrainFootprint{}, TwoHillSpec{}));
}

Vector state(double x1, double x2, double x3, double v1, double v2, double v3) {
  Vector x(6);
  x << x1, x2, x3, v1, v2, v3;
  return x;
}

}  // namespace

TEST_CASE("truncated Gaussian") {
  const TruncatedGaussian t(2.0, 3.0);
  CHECK(t.density(6.5) == 0.0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += t.density(-6.0 + 12.0 * (i + 0.5) / n);
  CHECK(sum * 12.0 / n == doctest::Approx(1.0).epsilon(1e-6));
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) CHECK(std::abs(t.sample(rng)) <= 6.0);
  const TruncatedGaussian g(2.0, std::numeric_limits<double>::infinity());
  CHECK(g.peak() == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0 * M_PI))));
}

TEST_CASE("double integrator without noise") {
  TanParams p;
  p.Q.setZero();
  const TanModel m = build_tan_model(flat(), p);
  Rng rng(1);
  Vector next(6);
  m.spec.transition_sample(state(0, 0, 0, 1, 0, 0), Vector::Zero(3), rng, next);
  CHECK(next.head(3).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(next.tail(3).isApprox(Eigen::Vector3d(1, 0, 0)));
}

TEST_CASE("controls beyond U_max are projected") {
  TanParams p;
  p.Q.setZero();
  p.U_max = 1.0;
  const TanModel m = build_tan_model(flat(), p);
  Rng rng(1);
  Vector a(6), b(6);
  Vector u(3);
  u << 2.0, 0.0, 0.0;
  m.spec.transition_sample(state(0, 0, 0, 0, 0, 0), u, rng, a);
  m.spec.transition_sample(state(0, 0, 0, 0, 0, 0), u / 2.0, rng, b);
  CHECK(a.isApprox(b));
  CHECK(a[3] == doctest::Approx(1.0));
  CHECK(a[0] == doctest::Approx(0.5));
}

TEST_CASE("height observation on flat terrain") {
  const TanModel m = build_tan_model(flat(), TanParams{});
  const Eigen::Vector4d y = tan_observation_mean(*m.terrain, state(1, 2, 5, 0.1, 0.2, 0.3));
  CHECK(y[3] == 5.0);
  CHECK(y[0] == 0.1);
}

TEST_CASE("likelihood is zero off the map and outside the noise support") {
  const TanModel m = build_tan_model(hills(), TanParams{});
  const Vector x = state(10, 10, 150, 0, 0, 0);
  Vector y(4);
  m.spec.observation_mean(x, y);
  CHECK(m.spec.likelihood(y, x) > 0.0);
  CHECK(m.spec.likelihood(y, state(900, 10, 150, 0, 0, 0)) == 0.0);
  Vector y2 = y;
  y2[3] += 3.01;
  CHECK(m.spec.likelihood(y2, x) == 0.0);
}

TEST_CASE("Gaussian law density needs a positive definite covariance") {
  Matrix cov = Matrix::Identity(2, 2);
  cov(1, 1) = 0.0;
  const GaussianLaw sing(Vector::Zero(2), cov);
  CHECK_FALSE(sing.has_density());
  CHECK_THROWS_AS(sing.density(Vector::Zero(2), Vector::Zero(2)), ModelError);
  Rng rng(1);
  Vector out(2);
  sing.sample(Vector::Zero(2), rng, out);
  CHECK(out[1] == 0.0);
  const GaussianLaw g(Vector::Zero(2), Matrix::Identity(2, 2) * 4.0);
  CHECK(g.peak() == doctest::Approx(1.0 / (2.0 * M_PI * 4.0)));
}

TEST_CASE("verify_assumptions on the default model") {
  const TanModel m = build_tan_model(hills(), TanParams{});
  const AssumptionReport r = verify_assumptions(m);
  for (const auto& c : r.report.checks) {
    INFO(c.name << ": " << c.message);
    CHECK(c.passed);
  }
  const double analytic = 1.0 / (std::pow(2.0 * M_PI, 3.0) * std::sqrt(m.params.Q.determinant()));
  CHECK(std::abs(r.norm_K_inf - analytic) / analytic < 1e-6);
  CHECK(std::isfinite(r.norm_rho_inf));
}

TEST_CASE("verify_assumptions fails without truncation") {
  TanParams p;
  p.noise_support_radius = std::numeric_limits<double>::infinity();
  const AssumptionReport r = verify_assumptions(build_tan_model(hills(), p));
  CHECK_FALSE(r.passed());
  bool vanishing_failed = false;
  for (const auto& c : r.report.checks)
    if (c.name.find("noise support") != std::string::npos) vanishing_failed = !c.passed;
  CHECK(vanishing_failed);
}

TEST_CASE("verify_assumptions flags a singular process covariance") {
  TanParams p;
  p.Q(5, 5) = 0.0;
  const AssumptionReport r = verify_assumptions(build_tan_model(hills(), p));
  CHECK_FALSE(r.passed());
}

TEST_CASE("TAN slice follows the transect profile") {
  TanSliceParams p;
  p.start = {-500.0, 0.0};
  const TanSliceModel m = build_tan_slice_model(hills(), p);
  CHECK(m.profile(200.0) == doctest::Approx(100.0).epsilon(1e-3));
  Vector y(1);
  m.spec.observation_mean(Vector::Constant(1, 200.0), y);
  CHECK(y[0] == doctest::Approx(p.altitude - m.profile(200.0)));
  CHECK(m.spec.likelihood(y, Vector::Constant(1, -1.0)) == 0.0);
  CHECK(m.spec.likelihood(y, Vector::Constant(1, 200.0)) > 0.0);
}
