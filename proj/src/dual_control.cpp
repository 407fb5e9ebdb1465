#include "dualpf/dual_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dualpf/kernels.hpp"

namespace dualpf {

void DualMpcConfig::validate() const {
  if (horizon < 1) throw PlannerError("mpc: horizon must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw PlannerError("mpc: discount must lie in (0, 1]");
  if (scenario_count < 1) throw PlannerError("mpc: scenario_count must be >= 1");
  if (candidate_count < 1) throw PlannerError("mpc: candidate_count must be >= 1");
  if (!(info_weight >= 0.0)) throw PlannerError("mpc: info_weight must be nonnegative");
  if (optimizer == Optimizer::cross_entropy &&
      (ce_iterations < 1 || !(ce_elite_fraction > 0.0 && ce_elite_fraction <= 1.0)))
    throw PlannerError("mpc: invalid cross-entropy settings");
}

double info_cost(const ParticleSet& cloud, const InfoCostSpec& info, const TerrainMap* terrain,
                 InfoCostStats* stats) {
  switch (info.kind) {
    case InfoKind::none:
      return 0.0;
    case InfoKind::posterior_trace: {
      double total = 0.0;
      for (int c : info.position_coords) {
        if (c < 0 || c >= cloud.dim()) throw PlannerError("info_cost: position coordinate out of range");
        const auto row = cloud.positions.row(c);
        const double m = row.dot(cloud.weights);
        total += (row.array() - m).square().matrix().dot(cloud.weights);
      }
      return std::max(total, 0.0);
    }
    case InfoKind::terrain_gradient_deficit: {
      if (!terrain) throw PlannerError("info_cost: terrain_gradient_deficit needs a terrain map");
      if (info.position_coords.size() < 2) throw PlannerError("info_cost: need two horizontal coordinates");
      if (!(info.gradient_floor > 0.0)) throw PlannerError("info_cost: gradient floor must be positive");
      const int cx = info.position_coords[0], cy = info.position_coords[1];
      double total = 0.0;
      for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        bool clamped = false;
        const Eigen::Vector2d g =
            terrain->gradient(Eigen::Vector2d(cloud.positions(cx, i), cloud.positions(cy, i)), &clamped);
        if (clamped && stats) ++stats->clamped_queries;
        total += cloud.weights[i] / (info.gradient_floor + g.squaredNorm());
      }
      return total;
    }
  }
  return 0.0;
}

namespace {

ParticleSet planning_cloud(const ParticleSet& cloud, std::size_t keep) {
  const auto n = static_cast<std::size_t>(cloud.size());
  if (keep == 0 || keep >= n) return cloud;
  ParticleSet out;
  out.positions.resize(cloud.positions.rows(), static_cast<Eigen::Index>(keep));
  out.weights.resize(static_cast<Eigen::Index>(keep));
  const double stride = static_cast<double>(n) / static_cast<double>(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto src = static_cast<Eigen::Index>(static_cast<double>(i) * stride);
    out.positions.col(static_cast<Eigen::Index>(i)) = cloud.positions.col(src);
    out.weights[static_cast<Eigen::Index>(i)] = cloud.weights[src];
  }
  out.weights /= out.weights.sum();
  out.stage = cloud.stage;
  return out;
}

double rollout_cost(const ParticleSet& start, const ControlPlan& plan, const ModelSpec& spec,
                    const DualMpcConfig& cfg, const InfoCostSpec& info, const TerrainMap* terrain,
                    std::uint64_t seed, std::size_t scenario) {
  Matrix positions = start.positions;
  Matrix next;
  double total = 0.0;
  double discount = 1.0;
  ParticleSet view;
  view.weights = start.weights;
  view.stage = Stage::predicted;
  for (std::size_t t = 0; t < plan.size(); ++t) {
    const Vector u = spec.control_set.project(plan[t]);
    double stage = 0.0;
    for (Eigen::Index i = 0; i < positions.cols(); ++i)
      stage += start.weights[i] * spec.cost_control(positions.col(i), u);
    if (cfg.info_weight > 0.0 && info.kind != InfoKind::none) {
      view.positions = positions;
      stage += cfg.info_weight * info_cost(view, info, terrain);
    }
    if (!std::isfinite(stage))
      throw PlannerError("evaluate_plan: non-finite cost in scenario " + std::to_string(scenario) + " at step " +
                         std::to_string(t));
    total += discount * stage;
    discount *= cfg.discount;
    if (t + 1 == plan.size()) break;
    if (cfg.scenario_noise)
      kernels::propagate_serial(spec, positions, u, derive_seed(seed, {t}), next);
    else
      kernels::propagate_mean_serial(spec, positions, u, next);
    positions.swap(next);
  }
  return total;
}

}  // namespace

double evaluate_plan(const ParticleSet& cloud, const ControlPlan& plan, const ModelSpec& spec,
                     const DualMpcConfig& cfg, const InfoCostSpec& info, const TerrainMap* terrain,
                     std::uint64_t scenario_seed) {
  if (plan.size() != cfg.horizon) throw PlannerError("evaluate_plan: plan length differs from the horizon");
  if (!cfg.scenario_noise && !spec.transition_mean)
    throw PlannerError("evaluate_plan: noise-free rollouts need transition_mean");
  const std::size_t scenarios = cfg.scenario_noise ? cfg.scenario_count : 1;
  double sum = 0.0;
  for (std::size_t s = 0; s < scenarios; ++s)
    sum += rollout_cost(cloud, plan, spec, cfg, info, terrain, derive_seed(scenario_seed, {s}), s);
  return sum / static_cast<double>(scenarios);
}

Vector sample_control(const ControlSet& set, int dim, double scale, Rng& rng) {
  Vector u(dim);
  for (int i = 0; i < dim; ++i) u[i] = standard_normal(rng);
  if (set.kind == ControlSet::Kind::unconstrained) return scale * u;
  const double n = u.norm();
  if (n == 0.0) return Vector::Zero(dim);
  const double r = set.radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(dim));
  return u * (r / n);
}

PlanResult plan_from_candidates(const ParticleSet& cloud, const std::vector<ControlPlan>& candidates,
                                const ModelSpec& spec, const DualMpcConfig& cfg, const InfoCostSpec& info,
                                const TerrainMap* terrain, std::uint64_t scenario_seed) {
  if (candidates.empty()) throw PlannerError("plan: no candidates");
  std::vector<double> costs(candidates.size());
  std::vector<std::string> errors(candidates.size());
#pragma omp parallel for schedule(dynamic) if (candidates.size() > 1)
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    try {
      costs[c] = evaluate_plan(cloud, candidates[c], spec, cfg, info, terrain, scenario_seed);
    } catch (const std::exception& e) {
      costs[c] = std::numeric_limits<double>::quiet_NaN();
      errors[c] = e.what();
    }
  }
  std::size_t best = candidates.size();
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (std::isfinite(costs[c]) && (best == candidates.size() || costs[c] < costs[best])) best = c;
  if (best == candidates.size())
    throw PlannerError("plan: every candidate has a non-finite cost" + (errors[0].empty() ? "" : ": " + errors[0]));
  PlanResult out;
  out.plan = candidates[best];
  out.control = spec.control_set.project(out.plan.front());
  out.diagnostics.best_cost = costs[best];
  out.diagnostics.best_index = best;
  out.diagnostics.candidate_costs = std::move(costs);
  out.diagnostics.evaluations = candidates.size();
  return out;
}

namespace {

PlanResult optimize(const ParticleSet& cloud, const ModelSpec& spec, const DualMpcConfig& cfg,
                    const InfoCostSpec& info, const TerrainMap* terrain, Rng& rng, const ControlPlan* warm_start) {
  cfg.validate();
  const std::uint64_t scenario_seed = draw_seed(rng);
  const ParticleSet belief = planning_cloud(cloud, cfg.planning_particles);
  const int du = spec.control_dim;
  const double scale = spec.control_set.kind == ControlSet::Kind::ball ? spec.control_set.radius : cfg.control_scale;

  if (cfg.optimizer == Optimizer::random_shooting) {
    std::vector<ControlPlan> candidates(cfg.candidate_count);
    for (auto& p : candidates) {
      p.resize(cfg.horizon);
      for (auto& u : p) u = sample_control(spec.control_set, du, cfg.control_scale, rng);
    }
    if (warm_start && warm_start->size() == cfg.horizon && cfg.candidate_count > 1) candidates.back() = *warm_start;
    return plan_from_candidates(belief, candidates, spec, cfg, info, terrain, scenario_seed);
  }

  // cross-entropy over the stacked H * du plan vector
  const auto dim = static_cast<Eigen::Index>(cfg.horizon) * du;
  Vector mean = Vector::Zero(dim);
  if (warm_start && warm_start->size() == cfg.horizon)
    for (std::size_t t = 0; t < cfg.horizon; ++t) mean.segment(static_cast<Eigen::Index>(t) * du, du) = (*warm_start)[t];
  Vector sd = Vector::Constant(dim, 0.5 * scale);
  const auto elites =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.ce_elite_fraction * cfg.candidate_count)));

  auto to_plan = [&](const Vector& z) {
    ControlPlan p(cfg.horizon);
    for (std::size_t t = 0; t < cfg.horizon; ++t)
      p[t] = spec.control_set.project(z.segment(static_cast<Eigen::Index>(t) * du, du));
    return p;
  };

  PlanResult best;
  bool have_best = false;
  std::size_t evaluations = 0;
  for (std::size_t it = 0; it < cfg.ce_iterations; ++it) {
    std::vector<ControlPlan> candidates(cfg.candidate_count);
    std::vector<Vector> raw(cfg.candidate_count);
    for (std::size_t c = 0; c < cfg.candidate_count; ++c) {
      Vector z(dim);
      for (Eigen::Index i = 0; i < dim; ++i) z[i] = mean[i] + sd[i] * standard_normal(rng);
      if (c == 0) z = mean;
      candidates[c] = to_plan(z);
      raw[c].resize(dim);
      for (std::size_t t = 0; t < cfg.horizon; ++t) raw[c].segment(static_cast<Eigen::Index>(t) * du, du) = candidates[c][t];
    }
    PlanResult r = plan_from_candidates(belief, candidates, spec, cfg, info, terrain, scenario_seed);
    evaluations += r.diagnostics.evaluations;
    if (!have_best || r.diagnostics.best_cost < best.diagnostics.best_cost) {
      best = r;
      have_best = true;
    } else {
      best.diagnostics.candidate_costs = r.diagnostics.candidate_costs;
    }
    std::vector<std::size_t> order(cfg.candidate_count);
    std::iota(order.begin(), order.end(), 0);
    const auto& costs = r.diagnostics.candidate_costs;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const bool fa = std::isfinite(costs[a]), fb = std::isfinite(costs[b]);
      if (fa != fb) return fa;
      return fa && costs[a] < costs[b];
    });
    Vector m = Vector::Zero(dim), v = Vector::Zero(dim);
    for (std::size_t e = 0; e < elites; ++e) m += raw[order[e]];
    m /= static_cast<double>(elites);
    for (std::size_t e = 0; e < elites; ++e) v += (raw[order[e]] - m).array().square().matrix();
    v /= static_cast<double>(elites);
    mean = m;
    sd = v.cwiseSqrt().cwiseMax(1e-3 * scale);
  }
  best.diagnostics.evaluations = evaluations;
  return best;
}

}  // namespace

PlanResult plan(const ParticleSet& cloud, const ModelSpec& spec, const DualMpcConfig& cfg, const InfoCostSpec& info,
                const TerrainMap* terrain, Rng& rng, const ControlPlan* warm_start) {
  return optimize(cloud, spec, cfg, info, terrain, rng, warm_start);
}

PlanResult certainty_equivalent_plan(VectorView estimate, const ModelSpec& spec, const DualMpcConfig& cfg, Rng& rng,
                                     const ControlPlan* warm_start) {
  DualMpcConfig ce = cfg;
  ce.info_weight = 0.0;
  ce.scenario_noise = false;
  Matrix point = estimate;
  const ParticleSet dirac = ParticleSet::uniform(std::move(point), Stage::corrected);
  return optimize(dirac, spec, ce, InfoCostSpec{}, nullptr, rng, warm_start);
}

ControlCost quadratic_goal_cost(Vector goal, Vector state_weights, double control_weight) {
  if (goal.size() != state_weights.size()) throw PlannerError("quadratic cost: goal/weight size mismatch");
  if ((state_weights.array() < 0.0).any() || control_weight < 0.0)
    throw PlannerError("quadratic cost: weights must be nonnegative");
  return [goal = std::move(goal), w = std::move(state_weights), control_weight](VectorView x, VectorView u) {
    return (x - goal).cwiseAbs2().dot(w) + control_weight * u.squaredNorm();
  };
}

ControlPlan shift_plan(const ControlPlan& plan) {
  if (plan.empty()) return plan;
  ControlPlan out(plan.begin() + 1, plan.end());
  out.push_back(plan.back());
  return out;
}

}  // namespace dualpf
