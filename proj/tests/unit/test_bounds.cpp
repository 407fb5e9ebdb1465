#include <doctest.h>

#include <cmath>

#include "dualpf/bounds.hpp"
#include "dualpf/sim.hpp"
#include "support/models.hpp"

using namespace dualpf;

namespace {

NormEstimates norms_1d(double K, double rho, double rho_phi2, double rho_phi, NormMode mode) {
  NormEstimates n;
  n.norm_K = K;
  n.norm_rho = rho;
  n.norm_rho_phi2 = Vector::Constant(1, rho_phi2);
  n.norm_rho_phi = Vector::Constant(1, rho_phi);
  n.mode = mode;
  return n;
}

BoundConstants with_C(double C, double phi, double n_threshold, NormMode mode) {
  BoundConstants c = initial_constants(1, 1.0, mode);
  c.C = Vector::Constant(1, C);
  c.phi_norm_k2 = Vector::Constant(1, phi);
  c.n_threshold = n_threshold;
  return c;
}

}  // namespace

TEST_CASE("initial constants") {
  for (double Ct : {1.0, 0.25, 3.0}) {
    const auto c = initial_constants(3, Ct, NormMode::conditional);
    for (Eigen::Index j = 0; j < 3; ++j) {
      CHECK(c.M[j] == 3.0);
      CHECK(c.C[j] == 8.0 * Ct);
    }
    CHECK(c.n_threshold == 1.0);
  }
}

TEST_CASE("alpha = 0 gives M = 2") {
  const auto c0 = initial_constants(1, 1.0, NormMode::uniform);
  const auto c1 = recurse_constants(c0, norms_1d(0.0, 1.0, 4.0, 2.0, NormMode::uniform), 1.0, 0.1, 1.0, 1.0, 1.0);
  CHECK(c1.alpha[0] == 0.0);
  CHECK(c1.M[0] == 2.0);
}

TEST_CASE("M recursion hand case: eps = 0.5, alpha = 1, M_prev = 3 gives 27") {
  // K = rho = 1, gamma = 2, <mu_{k|k-1}, rho> = 3, ||x^2 rho|| = 2: alpha = (2 + 1) / (1 * 3) = 1
  const auto c0 = initial_constants(1, 1.0, NormMode::conditional);
  const auto c1 = recurse_constants(c0, norms_1d(1.0, 1.0, 2.0, 1.0, NormMode::conditional), 2.0, 0.5, 1.0, 3.0, 1.0);
  CHECK(c1.alpha[0] == doctest::Approx(1.0));
  CHECK(c1.M[0] == doctest::Approx(27.0));
  CHECK(c1.k == 1);
}

TEST_CASE("C recursion matches an independent evaluation") {
  const double K = 0.7, rho = 1.3, rp2 = 2.1, rp = 0.9, gamma = 0.8, eps = 0.2, Ct = 1.5, mp = 1.1, rk2 = 1.2;
  BoundConstants c0 = initial_constants(1, Ct, NormMode::conditional);
  c0.M[0] = 4.0;
  c0.C[0] = 20.0;
  const auto c1 = recurse_constants(c0, norms_1d(K, rho, rp2, rp, NormMode::conditional), gamma, eps, Ct, mp, rk2);
  const double h = gamma / 2.0;
  const double beta = rho * (rp + h) / (h * mp);
  const double alpha = K * K * rho * (rp2 + h) / (h * mp);
  const double M = 2.0 + alpha * (1.0 + ((4.0 - eps) / (1.0 - eps) + 1.0) * 4.0);
  const double s = std::sqrt(8.0 * Ct);
  const double rc = s * std::sqrt(M) + s * beta / std::sqrt(1.0 - eps) * 2.0 +
                    std::pow(K, 1.5) * rk2 * beta / ((1.0 - eps) * (mp - h)) * 2.0 * std::sqrt(20.0) +
                    K * beta * std::sqrt(20.0);
  CHECK(c1.beta[0] == doctest::Approx(beta));
  CHECK(c1.alpha[0] == doctest::Approx(alpha));
  CHECK(c1.M[0] == doctest::Approx(M));
  CHECK(c1.C[0] == doctest::Approx(rc * rc));
}

TEST_CASE("conditional recursion requires <mu, rho> > gamma") {
  const auto c0 = initial_constants(1, 1.0, NormMode::conditional);
  CHECK_THROWS_AS(recurse_constants(c0, norms_1d(1, 1, 1, 1, NormMode::conditional), 1.0, 0.1, 1.0, 0.9, 1.0),
                  BoundError);
}

TEST_CASE("threshold hand case and scaling") {
  const auto n = norms_1d(1.0, 1.0, 1.0, 1.0, NormMode::uniform);
  const Vector C = Vector::Ones(1);
  CHECK(threshold_N(C, n, 1.0, 0.5, 0.0, 0.0, NormMode::uniform) == 8);
  CHECK_THROWS_AS(threshold_N(C, n, 1.0, 1.0, 0.0, 0.0, NormMode::uniform), BoundError);
  CHECK_THROWS_AS(threshold_N(C, n, 1.0, 0.0, 0.0, 0.0, NormMode::uniform), BoundError);
  const double t1 = threshold_value(C, n, 0.7, 0.3, 0.0, 0.0, NormMode::uniform);
  const double t2 = threshold_value(2.0 * C, n, 0.7, 0.3, 0.0, 0.0, NormMode::uniform);
  CHECK(t2 == doctest::Approx(2.0 * t1));
}

TEST_CASE("conditional sandwich") {
  CHECK(conditional_bound(1.0, with_C(10.0, 1.0, 1.0, NormMode::conditional), 1000, 0.1).upper ==
        doctest::Approx(1.21));
  CHECK(conditional_bound(0.7, with_C(0.0, 1.0, 1.0, NormMode::conditional), 10, 0.1).upper ==
        doctest::Approx(1.1 * 0.7));
  CHECK(conditional_bound(0.7, with_C(3.0, 1.0, 1.0, NormMode::conditional), 10, 0.1).lower == 0.7);
  CHECK_THROWS_AS(conditional_bound(1.0, with_C(1.0, 1.0, 500.0, NormMode::conditional), 499, 0.1), BoundError);
  const auto c = with_C(5.0, 2.0, 1.0, NormMode::conditional);
  double prev = conditional_bound(1.0, c, 1, 0.2).upper;
  for (std::uint64_t N = 2; N < 5000; N = N * 3 / 2 + 1) {
    const double u = conditional_bound(1.0, c, N, 0.2).upper;
    CHECK(u <= prev);
    prev = u;
  }
}

TEST_CASE("total sandwich") {
  const auto c = with_C(10.0, 1.0, 1.0, NormMode::uniform);
  const Vector ephi = Vector::Ones(1);
  CHECK(total_bound(1.0, c, ephi, 10000, 0.5).upper == doctest::Approx(1.111));
  CHECK(total_bound(1.0, c, ephi, 10000000000000ULL, 0.5).upper == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_THROWS_AS(total_bound(1.0, c, ephi, 100, 1.0), BoundError);
  CHECK_THROWS_AS(total_bound(1.0, with_C(10.0, 1.0, 1.0, NormMode::conditional), ephi, 100, 0.5), BoundError);
  CHECK_THROWS_AS(total_bound(1.0, with_C(10.0, 1.0, 200.0, NormMode::uniform), ephi, 100, 0.5), BoundError);
}

TEST_CASE("estimate_norms on known suprema") {
  ModelSpec s = testsupport::random_walk(0.5);
  s.likelihood = [](VectorView y, VectorView x) { return std::abs(x[0] - y[0]) < 1.0 ? 1.0 : 0.0; };
  SweepGrid g;
  for (int i = -40; i <= 40; ++i) g.states.push_back(Vector::Constant(1, 0.25 * i));
  g.successors = g.states;
  g.observations = {Vector::Constant(1, 0.0)};
  g.controls = {Vector::Constant(1, 0.3)};
  const auto n = estimate_norms(s, g, NormMode::conditional);
  CHECK(n.norm_rho == 1.0);
  CHECK(n.norm_K == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI * 0.5)));
  CHECK(n.norm_rho_phi2[0] == doctest::Approx(0.75 * 0.75));
  g.observations.push_back(Vector::Zero(1));
  CHECK_THROWS_AS(estimate_norms(s, g, NormMode::conditional), BoundError);
}

TEST_CASE("verify_dominance") {
  const auto a = initial_constants(2, 1.0, NormMode::conditional);
  const auto b = initial_constants(2, 1.0, NormMode::uniform);
  CHECK(verify_dominance(a, b));
  auto shrunk = b;
  shrunk.C *= 0.5;
  CHECK_FALSE(verify_dominance(a, shrunk));
}

namespace {

/// Runs both schedules along one simulated information vector; gamma below the
/// smallest predicted likelihood.
bool dominance_along_path(Config cfg, std::size_t horizon, std::size_t sweep_nodes) {
  cfg.campaign.horizon = horizon;
  const Scenario sc = build_scenario(cfg);
  Rng rng = make_stream(cfg.campaign.seed, {0, kTruthStream});
  const Trajectory t = simulate(sc.spec, constant_policy(sc.spec.zero_control()), horizon, rng);
  History h;
  h.start(t.observations[0]);
  GridTracker tr(sc.spec, *sc.oracle_axes, sc.oracle_options);
  tr.start(t.observations[0]);
  for (std::size_t k = 1; k < horizon; ++k) {
    h.append(t.controls[k - 1], t.observations[k]);
    tr.advance(t.controls[k - 1], t.observations[k]);
  }
  double mp = std::numeric_limits<double>::infinity();
  for (const auto& s : tr.steps()) mp = std::min(mp, s.predicted_likelihood);
  const double gamma = cfg.gamma.mode == "value" ? cfg.gamma.value : 0.5 * mp;
  const BoundSettings bs{{gamma}, 0.1, 1.0};
  SweepGrid base;
  std::vector<GridAxis> axes;
  for (const auto& a : *sc.oracle_axes) axes.push_back(GridAxis::spanning(a.lower, a.upper(), sweep_nodes));
  base.states = grid_points(axes);
  base.successors = base.states;
  const auto cond = conditional_schedule(sc.spec, base, h, tr.steps(), bs);
  const auto uni = uniform_schedule(uniform_norms_on_grid(sc, sweep_nodes), sc.spec.state_dim, horizon, bs);
  for (std::size_t k = 0; k < horizon; ++k)
    if (!verify_dominance(cond[k], uni[k])) return false;
  return true;
}

}  // namespace

TEST_CASE("dominance of conditional by uniform constants along simulated paths") {
  Config lin;
  CHECK(dominance_along_path(lin, 11, 201));

  Config slice;
  slice.model.type = "tan_slice";
  slice.terrain.source = "two_hill";
  slice.model.slice.start = {-500.0, 0.0};
  slice.campaign.oracle_nodes = 1201;
  CHECK(dominance_along_path(slice, 6, 301));
  CHECK(dominance_along_path(slice, 11, 301));

  Config clutter;
  clutter.model.type = "bounded_clutter";
  clutter.campaign.oracle_nodes = 400;
  clutter.gamma.mode = "value";
  clutter.gamma.value = 0.99 / 1000.0;
  CHECK(dominance_along_path(clutter, 11, 400));

  Config lin2;
  lin2.model.type = "linear_gaussian_2d";
  lin2.campaign.oracle_nodes = 61;
  CHECK(dominance_along_path(lin2, 11, 31));
}
