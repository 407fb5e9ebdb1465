#include <doctest.h>

#include <cmath>

#include "dualpf/dual_control.hpp"
#include "dualpf/tan_model.hpp"
#include "dualpf/terrain.hpp"
#include "support/models.hpp"

using namespace dualpf;

namespace {

ParticleSet points(std::initializer_list<double> xs) {
  Matrix m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return ParticleSet::uniform(m, Stage::corrected);
}

DualMpcConfig noiseless(std::size_t H, double discount = 1.0) {
  DualMpcConfig c;
  c.horizon = H;
  c.discount = discount;
  c.scenario_noise = false;
  return c;
}

TanModel tan_model(TerrainMap map, double q = 0.01) {
  TanParams p;
  p.Q *= q;
  return build_tan_model(std::make_shared<TerrainMap>(std::move(map)), p);
}

ParticleSet tan_cloud(const Vector& center, double spread, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(6, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    m.col(i) = center;
    m(0, i) += spread * standard_normal(rng);
    m(1, i) += spread * standard_normal(rng);
  }
  return ParticleSet::uniform(m, Stage::corrected);
}

Vector tan_state(double x1, double x2) {
  Vector x = Vector::Zero(6);
  x[0] = x1;
  x[1] = x2;
  x[2] = 100.0;
  return x;
}

}  // namespace

TEST_CASE("info cost on hand clouds") {
  InfoCostSpec tr;
  tr.kind = InfoKind::posterior_trace;
  tr.position_coords = {0};
  CHECK(info_cost(points({2.0, 2.0}), tr, nullptr) == 0.0);
  CHECK(info_cost(points({-1.0, 1.0}), tr, nullptr) == doctest::Approx(1.0));

  const TerrainMap flat = make_flat_terrain(TerrainFootprint{});
  InfoCostSpec gd;
  gd.kind = InfoKind::terrain_gradient_deficit;
  gd.gradient_floor = 0.1;
  const ParticleSet c = tan_cloud(tan_state(0, 0), 50.0, 20, 1);
  CHECK(info_cost(c, gd, &flat) == doctest::Approx(10.0));
  CHECK_THROWS_AS(info_cost(c, gd, nullptr), PlannerError);
}

TEST_CASE("evaluate_plan: constant stage cost") {
  ModelSpec s = testsupport::random_walk();
  s.cost_control = [](VectorView, VectorView) { return 1.0; };
  const ControlPlan p(3, Vector::Zero(1));
  CHECK(evaluate_plan(points({0.0}), p, s, noiseless(3), {}, nullptr, 1) == doctest::Approx(3.0));
  CHECK(evaluate_plan(points({0.0}), p, s, noiseless(3, 0.5), {}, nullptr, 1) == doctest::Approx(1.75));
  DualMpcConfig noisy = noiseless(3);
  noisy.scenario_noise = true;
  CHECK(evaluate_plan(points({0.0}), p, s, noisy, {}, nullptr, 1) == doctest::Approx(3.0));
}

TEST_CASE("evaluate_plan: deterministic quadratic rollout") {
  ModelSpec s = testsupport::random_walk();
  s.cost_control = quadratic_goal_cost(Vector::Zero(1), Vector::Ones(1), 0.5);
  const ControlPlan p{Vector::Constant(1, 0.5), Vector::Constant(1, -2.0)};
  // x: 1 -> 1.5; stages (1 + 0.125) + (2.25 + 2)
  CHECK(evaluate_plan(points({1.0}), p, s, noiseless(2), {}, nullptr, 9) == doctest::Approx(5.375));
  CHECK_THROWS_AS(evaluate_plan(points({1.0}), p, s, noiseless(3), {}, nullptr, 9), PlannerError);
}

TEST_CASE("plan_from_candidates: single candidate and ties") {
  ModelSpec s = testsupport::random_walk();
  s.cost_control = [](VectorView, VectorView) { return 1.0; };
  const ControlPlan a(2, Vector::Constant(1, 0.7)), b(2, Vector::Constant(1, -0.3));
  auto r = plan_from_candidates(points({0.0}), {a}, s, noiseless(2), {}, nullptr, 1);
  CHECK(r.control[0] == doctest::Approx(0.7));
  r = plan_from_candidates(points({0.0}), {b, a}, s, noiseless(2), {}, nullptr, 1);
  CHECK(r.diagnostics.best_index == 0);
  CHECK(r.diagnostics.candidate_costs.size() == 2);
}

TEST_CASE("large lambda steers toward the rough zone") {
  const TanModel m = tan_model(make_two_zone_terrain(TerrainFootprint{}, TwoZoneSpec{}));
  const TerrainMap& terrain = *m.terrain;
  InfoCostSpec info;
  info.kind = InfoKind::terrain_gradient_deficit;
  DualMpcConfig cfg;
  cfg.horizon = 6;
  cfg.info_weight = 100.0;
  const ParticleSet cloud = tan_cloud(tan_state(0.0, 0.0), 60.0, 300, 4);
  Vector east = Vector::Zero(3), west = Vector::Zero(3);
  east[0] = 1.0;
  west[0] = -1.0;
  const ControlPlan pe(6, east), pw(6, west);
  const double ce = evaluate_plan(cloud, pe, m.spec, cfg, info, &terrain, 3);
  const double cw = evaluate_plan(cloud, pw, m.spec, cfg, info, &terrain, 3);
  CHECK(ce < cw);
  const auto r = plan_from_candidates(cloud, {pw, pe}, m.spec, cfg, info, &terrain, 3);
  CHECK(r.control[0] == doctest::Approx(1.0));
}

namespace {

PlanResult goal_plan(const Vector& start, const Vector& goal, double control_weight, Optimizer opt, std::uint64_t seed) {
  TanModel m = tan_model(make_flat_terrain(TerrainFootprint{}));
  Vector w = Vector::Zero(6);
  w.head(3).setOnes();
  w.tail(3).setConstant(4.0);
  m.spec.cost_control = quadratic_goal_cost(goal, w, control_weight);
  DualMpcConfig cfg;
  cfg.horizon = 5;
  cfg.candidate_count = 64;
  cfg.optimizer = opt;
  cfg.ce_iterations = 4;
  cfg.scenario_noise = false;
  Rng rng(seed);
  return plan(ParticleSet::uniform(start, Stage::corrected), m.spec, cfg, {}, nullptr, rng);
}

}  // namespace

TEST_CASE("lambda = 0, quadratic goal: control points toward the goal") {
  const Vector start = tan_state(0.0, 0.0);
  Vector goal = start;
  goal[0] = 300.0;
  goal[1] = 150.0;
  for (auto opt : {Optimizer::random_shooting, Optimizer::cross_entropy}) {
    const auto r = goal_plan(start, goal, 0.0, opt, 5);
    const Vector dir = (goal - start).head(3);
    CHECK(r.control.dot(dir) > 0.0);
    // far goal saturates the control
    CHECK(r.control.norm() > 0.8);
  }
}

TEST_CASE("at the goal with zero velocity the control is near zero") {
  const Vector start = tan_state(10.0, 10.0);
  const auto r = goal_plan(start, start, 1.0, Optimizer::cross_entropy, 6);
  CHECK(r.control.norm() < 0.2);
}

TEST_CASE("planning is deterministic given the stream") {
  const Vector start = tan_state(0.0, 0.0);
  Vector goal = start;
  goal[0] = 50.0;
  const auto a = goal_plan(start, goal, 0.1, Optimizer::cross_entropy, 8);
  const auto b = goal_plan(start, goal, 0.1, Optimizer::cross_entropy, 8);
  CHECK(a.control == b.control);
  CHECK(a.diagnostics.candidate_costs == b.diagnostics.candidate_costs);
}

TEST_CASE("certainty-equivalent planning consumes the stream like plan()") {
  const TanModel m = tan_model(make_flat_terrain(TerrainFootprint{}));
  DualMpcConfig cfg;
  cfg.optimizer = Optimizer::cross_entropy;
  const ParticleSet cloud = tan_cloud(tan_state(0, 0), 10.0, 50, 2);
  Rng a(3), b(3);
  plan(cloud, m.spec, cfg, {}, nullptr, a);
  certainty_equivalent_plan(empirical_mean(cloud), m.spec, cfg, b);
  CHECK(a() == b());
}

TEST_CASE("sample_control and shift_plan") {
  Rng rng(1);
  const ControlSet ball = ControlSet::ball(2.0);
  for (int i = 0; i < 1000; ++i) CHECK(sample_control(ball, 3, 1.0, rng).norm() <= 2.0 + 1e-12);
  const ControlPlan p{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0), Vector::Constant(1, 3.0)};
  const ControlPlan s = shift_plan(p);
  CHECK(s.size() == 3);
  CHECK(s[0][0] == 2.0);
  CHECK(s[2][0] == 3.0);
}

TEST_CASE("config validation") {
  DualMpcConfig c;
  c.discount = 0.0;
  CHECK_THROWS_AS(c.validate(), PlannerError);
  c.discount = 1.0;
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), PlannerError);
}
