#include "dualpf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <sstream>

namespace dualpf {

namespace {

Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector json_vec(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[i].get<double>();
  return v;
}

Vector control_for_constant(const Config& cfg, const ModelSpec& spec) {
  const Vector& c = cfg.controller.constant_control;
  if (c.size() == 0) return spec.zero_control();
  if (c.size() != spec.control_dim) throw ConfigError("controller.constant_control has the wrong dimension");
  return c;
}

Policy open_loop_policy(const Config& cfg, const ModelSpec& spec) {
  return constant_policy(control_for_constant(cfg, spec));
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats mean_se(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (n - 1) / n);
  }
  return s;
}

std::vector<GridAxis> resample_axes(const std::vector<GridAxis>& axes, std::size_t nodes) {
  std::vector<GridAxis> out;
  for (const auto& a : axes) out.push_back(GridAxis::spanning(a.lower, a.upper(), std::max<std::size_t>(nodes, 2)));
  return out;
}

}  // namespace

double resolve_gamma(const Config& cfg, const Scenario& scenario) {
  if (cfg.gamma.mode == "none") return 0.0;
  if (cfg.gamma.mode == "value") {
    if (!(cfg.gamma.value >= 0.0)) throw ConfigError("filter.gamma.value must be nonnegative");
    return cfg.gamma.value;
  }
  // pilot: smallest predicted mean likelihood seen by threshold-free filters
  const std::size_t runs = std::max<std::size_t>(cfg.gamma.pilot_runs, 1);
  std::vector<double> minima(runs, std::numeric_limits<double>::infinity());
  FilterConfig fc = cfg.filter;
  fc.gamma_threshold = 0.0;
  const Policy policy = open_loop_policy(cfg, scenario.spec);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < runs; ++r) {
    try {
      Rng truth = make_stream(cfg.campaign.seed, {r, kPilotStream, kTruthStream});
      Rng frng = make_stream(cfg.campaign.seed, {r, kPilotStream, kFilterStream});
      const Trajectory traj = simulate(scenario.spec, policy, cfg.campaign.horizon, truth);
      auto step = filter_start(scenario.spec, traj.observations[0], fc, frng);
      double m = step.diagnostics.mean_predicted_likelihood;
      for (std::size_t k = 1; k < cfg.campaign.horizon; ++k) {
        step = filter_step(step.cloud, scenario.spec, traj.controls[k - 1], traj.observations[k], fc, frng);
        m = std::min(m, step.diagnostics.mean_predicted_likelihood);
      }
      minima[r] = m;
    } catch (const std::exception&) {
    }
  }
  const double m = *std::min_element(minima.begin(), minima.end());
  if (!std::isfinite(m)) throw ConfigError("gamma pilot: every pilot run failed");
  return cfg.gamma.fraction * m;
}

RunRecord run_closed_loop(const Config& cfg, std::size_t trial, std::optional<double> gamma) {
  const Scenario scenario = build_scenario(cfg);
  const double g = gamma ? *gamma : resolve_gamma(cfg, scenario);
  return run_closed_loop(cfg, scenario, trial, g);
}

RunRecord run_closed_loop(const Config& cfg, const Scenario& scenario, std::size_t trial, double gamma) {
  const ModelSpec& spec = scenario.spec;
  RunRecord rec;
  rec.seed = cfg.campaign.seed;
  rec.trial = trial;
  rec.config = to_json(cfg);

  FilterConfig fc = cfg.filter;
  fc.gamma_threshold = 0.5 * gamma;
  Rng truth_rng = make_stream(cfg.campaign.seed, {trial, kTruthStream});
  Rng filter_rng = make_stream(cfg.campaign.seed, {trial, kFilterStream});
  Rng planner_rng = make_stream(cfg.campaign.seed, {trial, kPlannerStream});

  Vector x(spec.state_dim);
  if (cfg.controller.truth_initial.size() > 0) {
    if (cfg.controller.truth_initial.size() != spec.state_dim)
      throw ConfigError("controller.truth_initial has the wrong dimension");
    x = cfg.controller.truth_initial;
  } else {
    spec.initial_sample(truth_rng, x);
  }

  std::optional<GridTracker> oracle;
  if (cfg.campaign.oracle_in_runs && scenario.oracle_axes)
    oracle.emplace(spec, *scenario.oracle_axes, scenario.oracle_options);
  const TerrainMap* terrain = scenario.terrain.get();
  const Vector constant_u = control_for_constant(cfg, spec);

  ParticleSet cloud;
  Vector y(spec.obs_dim), next(spec.state_dim);
  Vector u_prev;
  ControlPlan warm;
  try {
    for (std::size_t k = 0; k < cfg.campaign.horizon; ++k) {
      spec.observation_sample(x, truth_rng, y);
      StepRecord s;
      s.k = static_cast<long>(k);
      s.truth = x;
      s.observation = y;
      FilterStepResult fr = k == 0 ? filter_start(spec, y, fc, filter_rng)
                                   : filter_step(cloud, spec, u_prev, y, fc, filter_rng);
      cloud = std::move(fr.cloud);
      s.filter = fr.diagnostics;
      s.estimate = empirical_mean(cloud);
      s.squared_error = spec.cost_estimation(x, s.estimate);
      if (oracle) {
        const auto& st = k == 0 ? oracle->start(y) : oracle->advance(u_prev, y);
        s.oracle_estimate = st.mse.mean;
        s.oracle_squared_error = spec.cost_estimation(x, st.mse.mean);
      }

      const ControlPlan* ws = warm.empty() ? nullptr : &warm;
      if (cfg.controller.kind == "dual") {
        PlanResult p = plan(cloud, spec, cfg.mpc, cfg.info, terrain, planner_rng, ws);
        s.control = p.control;
        s.planner = p.diagnostics;
        warm = shift_plan(p.plan);
      } else if (cfg.controller.kind == "certainty_equivalent") {
        PlanResult p = certainty_equivalent_plan(s.estimate, spec, cfg.mpc, planner_rng, ws);
        s.control = p.control;
        s.planner = p.diagnostics;
        warm = shift_plan(p.plan);
      } else {
        s.control = spec.control_set.project(constant_u);
      }
      u_prev = s.control;
      rec.steps.push_back(std::move(s));
      if (k + 1 < cfg.campaign.horizon) {
        spec.transition_sample(x, u_prev, truth_rng, next);
        x = next;
      }
    }
  } catch (const FilterDivergence& e) {
    rec.failed = true;
    rec.failure = std::string("filter divergence: ") + e.what();
  } catch (const ParticleError& e) {
    rec.failed = true;
    rec.failure = std::string("particle error: ") + e.what();
  } catch (const OracleError& e) {
    rec.failed = true;
    rec.failure = std::string("oracle error: ") + e.what();
  }
  return rec;
}

void write_run_record(std::ostream& out, const RunRecord& rec) {
  Json h = {{"type", "header"}, {"seed", rec.seed}, {"trial", rec.trial}, {"config", rec.config}};
  out << h.dump() << "\n";
  for (const auto& s : rec.steps) {
    Json j = {{"type", "step"},
              {"k", s.k},
              {"truth", vec_json(s.truth)},
              {"observation", vec_json(s.observation)},
              {"control", vec_json(s.control)},
              {"estimate", vec_json(s.estimate)},
              {"squared_error", s.squared_error}};
    if (s.oracle_estimate) {
      j["oracle_estimate"] = vec_json(*s.oracle_estimate);
      j["oracle_squared_error"] = *s.oracle_squared_error;
    }
    j["filter"] = {{"mean_predicted_likelihood", s.filter.mean_predicted_likelihood},
                   {"redraw_count", s.filter.redraw_count},
                   {"selection_accepted", s.filter.selection_accepted},
                   {"ess_before_resampling", s.filter.ess_before_resampling},
                   {"effective_sample_size", s.filter.effective_sample_size}};
    if (s.planner) {
      Json costs = Json::array();
      for (double c : s.planner->candidate_costs) costs.push_back(c);
      j["planner"] = {{"best_cost", s.planner->best_cost},
                      {"best_index", s.planner->best_index},
                      {"evaluations", s.planner->evaluations},
                      {"candidate_costs", costs}};
    }
    out << j.dump() << "\n";
  }
  Json e = {{"type", "end"}, {"failed", rec.failed}, {"failure", rec.failure}, {"steps", rec.steps.size()}};
  out << e.dump() << "\n";
}

std::string serialize_run_record(const RunRecord& rec) {
  std::ostringstream s;
  write_run_record(s, rec);
  return s.str();
}

RunRecord read_run_record(std::istream& in) {
  RunRecord rec;
  std::string line;
  bool header = false, end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "header") {
      rec.seed = j.at("seed").get<std::uint64_t>();
      rec.trial = j.at("trial").get<std::size_t>();
      rec.config = j.at("config");
      header = true;
    } else if (type == "step") {
      StepRecord s;
      s.k = j.at("k").get<long>();
      s.truth = json_vec(j.at("truth"));
      s.observation = json_vec(j.at("observation"));
      s.control = json_vec(j.at("control"));
      s.estimate = json_vec(j.at("estimate"));
      s.squared_error = j.at("squared_error").get<double>();
      if (j.contains("oracle_estimate")) {
        s.oracle_estimate = json_vec(j.at("oracle_estimate"));
        s.oracle_squared_error = j.at("oracle_squared_error").get<double>();
      }
      const Json& f = j.at("filter");
      s.filter.mean_predicted_likelihood = f.at("mean_predicted_likelihood").get<double>();
      s.filter.redraw_count = f.at("redraw_count").get<std::size_t>();
      s.filter.selection_accepted = f.at("selection_accepted").get<bool>();
      s.filter.ess_before_resampling = f.at("ess_before_resampling").get<double>();
      s.filter.effective_sample_size = f.at("effective_sample_size").get<double>();
      if (j.contains("planner")) {
        const Json& p = j.at("planner");
        PlannerDiagnostics d;
        d.best_cost = p.at("best_cost").get<double>();
        d.best_index = p.at("best_index").get<std::size_t>();
        d.evaluations = p.at("evaluations").get<std::size_t>();
        const Vector c = json_vec(p.at("candidate_costs"));
        d.candidate_costs.assign(c.data(), c.data() + c.size());
        s.planner = d;
      }
      rec.steps.push_back(std::move(s));
    } else if (type == "end") {
      rec.failed = j.at("failed").get<bool>();
      rec.failure = j.at("failure").get<std::string>();
      end = true;
    }
  }
  if (!header || !end) throw std::runtime_error("run record: missing header or end line");
  return rec;
}

bool replay_matches(const RunRecord& rec) {
  Config cfg = config_from_json(rec.config);
  cfg.campaign.seed = rec.seed;
  const RunRecord again = run_closed_loop(cfg, rec.trial);
  return serialize_run_record(again) == serialize_run_record(rec);
}

CampaignSummary run_campaign(const Config& cfg, const std::string& out_dir) {
  const Scenario scenario = build_scenario(cfg);
  CampaignSummary out;
  out.gamma = resolve_gamma(cfg, scenario);
  out.runs.resize(cfg.campaign.trials);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < cfg.campaign.trials; ++t) out.runs[t] = run_closed_loop(cfg, scenario, t, out.gamma);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream summary(std::filesystem::path(out_dir) / "summary.csv");
    summary << "trial,steps,failed,mean_squared_error,terminal_squared_error\n" << std::setprecision(10);
    for (const auto& r : out.runs) {
      std::ostringstream name;
      name << "run_" << std::setw(4) << std::setfill('0') << r.trial << ".jsonl";
      std::ofstream f(std::filesystem::path(out_dir) / name.str());
      write_run_record(f, r);
      double m = 0.0;
      for (const auto& s : r.steps) m += s.squared_error;
      if (!r.steps.empty()) m /= static_cast<double>(r.steps.size());
      summary << r.trial << "," << r.steps.size() << "," << (r.failed ? 1 : 0) << "," << m << ","
              << (r.steps.empty() ? 0.0 : r.steps.back().squared_error) << "\n";
    }
  }
  return out;
}

MseSweepResult mse_sweep(const Config& cfg) {
  const Scenario scenario = build_scenario(cfg);
  const ModelSpec& spec = scenario.spec;
  const std::size_t H = cfg.campaign.horizon;
  const double gamma = resolve_gamma(cfg, scenario);
  MseSweepResult out;

  Rng truth = make_stream(cfg.campaign.seed, {0, kTruthStream});
  out.trajectory = simulate(spec, open_loop_policy(cfg, spec), H, truth);
  const Trajectory& traj = out.trajectory;
  History history;
  history.start(traj.observations[0]);
  for (std::size_t k = 1; k < H; ++k) history.append(traj.controls[k - 1], traj.observations[k]);

  std::vector<GridDistribution> posteriors;
  if (scenario.oracle_axes) {
    GridTracker tracker(spec, *scenario.oracle_axes, scenario.oracle_options);
    tracker.start(traj.observations[0]);
    posteriors.push_back(tracker.posterior());
    for (std::size_t k = 1; k < H; ++k) {
      tracker.advance(traj.controls[k - 1], traj.observations[k]);
      posteriors.push_back(tracker.posterior());
    }
    out.oracle = tracker.steps();
    if (gamma > 0.0) {
      SweepGrid base;
      base.states = grid_points(resample_axes(*scenario.oracle_axes, cfg.bounds.sweep_nodes));
      base.successors = base.states;
      BoundSettings bs{{gamma}, cfg.bounds.eps, cfg.bounds.C_tilde};
      try {
        out.constants = conditional_schedule(spec, base, history, out.oracle, bs);
      } catch (const BoundError& e) {
        out.notices.push_back(std::string("conditional constants unavailable: ") + e.what());
      }
    } else {
      out.notices.push_back("gamma is 0; bound columns omitted");
    }
  } else {
    out.notices.push_back("no grid oracle for this model; e_star and bound columns omitted");
  }

  FilterConfig fc = cfg.filter;
  fc.gamma_threshold = 0.5 * gamma;
  const std::size_t R = cfg.campaign.repetitions;
  for (std::size_t N : cfg.campaign.n_sweep) {
    fc.particle_count = N;
    std::vector<std::vector<double>> err(R), err_sampled(R);
    std::vector<char> ok(R, 0);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t r = 0; r < R; ++r) {
      try {
        Rng frng = make_stream(cfg.campaign.seed, {N, r, kFilterStream});
        Rng trng = make_stream(cfg.campaign.seed, {N, r, kTruthStream});
        std::vector<double> e(H), es(H);
        FilterStepResult step;
        for (std::size_t k = 0; k < H; ++k) {
          step = k == 0 ? filter_start(spec, traj.observations[0], fc, frng)
                        : filter_step(step.cloud, spec, traj.controls[k - 1], traj.observations[k], fc, frng);
          const Vector xhat = empirical_mean(step.cloud);
          if (posteriors.empty()) {
            e[k] = es[k] = spec.cost_estimation(traj.states[k], xhat);
          } else {
            e[k] = expected_squared_distance(posteriors[k], xhat);
            es[k] = (sample_node(posteriors[k], trng) - xhat).squaredNorm();
          }
        }
        err[r] = std::move(e);
        err_sampled[r] = std::move(es);
        ok[r] = 1;
      } catch (const FilterDivergence&) {
      } catch (const ParticleError&) {
      }
    }
    const auto failed = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
    if (failed) out.notices.push_back("N=" + std::to_string(N) + ": " + std::to_string(failed) + " repetitions diverged");
    for (std::size_t k = 0; k < H; ++k) {
      std::vector<double> col, col_sampled;
      for (std::size_t r = 0; r < R; ++r)
        if (ok[r]) {
          col.push_back(err[r][k]);
          col_sampled.push_back(err_sampled[r][k]);
        }
      const Stats st = mean_se(col), ss = mean_se(col_sampled);
      MseRow row;
      row.k = static_cast<long>(k);
      row.N = N;
      row.e_N_mean = st.mean;
      row.e_N_se = st.se;
      row.e_N_sampled_mean = ss.mean;
      row.e_N_sampled_se = ss.se;
      if (!out.oracle.empty()) {
        row.e_star = out.oracle[k].mse.e_star;
        row.bound_lower = row.e_star;
      }
      if (k < out.constants.size()) {
        row.n_threshold = out.constants[k].n_threshold;
        try {
          row.bound_upper = conditional_bound(*row.e_star, out.constants[k], N, cfg.bounds.eps_bound).upper;
        } catch (const BoundError&) {
        }
      }
      out.rows.push_back(row);
    }
  }
  return out;
}

void write_mse_csv(std::ostream& out, const std::vector<MseRow>& rows) {
  out << "k,N,e_N_mean,e_N_se,e_N_sampled_mean,e_N_sampled_se,e_star,bound_lower,bound_upper,N_threshold\n"
      << std::setprecision(12);
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : rows) {
    out << r.k << "," << r.N << "," << r.e_N_mean << "," << r.e_N_se << "," << r.e_N_sampled_mean << ","
        << r.e_N_sampled_se << ",";
    opt(r.e_star);
    out << ",";
    opt(r.bound_lower);
    out << ",";
    opt(r.bound_upper);
    out << "," << r.n_threshold << "\n";
  }
}

NormEstimates uniform_norms_on_grid(const Scenario& scenario, std::size_t nodes_per_axis) {
  if (!scenario.oracle_axes) throw BoundError("uniform norms need a grid-oracle scenario");
  const ModelSpec& spec = scenario.spec;
  SweepGrid sweep;
  sweep.states = grid_points(resample_axes(*scenario.oracle_axes, nodes_per_axis));
  sweep.successors = sweep.states;
  sweep.controls = {spec.zero_control()};
  if (!spec.observation_mean) throw BoundError("uniform norms need observation_mean");
  Vector y(spec.obs_dim);
  for (const auto& x : sweep.states) {
    spec.observation_mean(x, y);
    sweep.observations.push_back(y);
  }
  return estimate_norms(spec, sweep, NormMode::uniform);
}

TotalMseTable total_mse_sweep(const Config& cfg, std::size_t N, std::size_t trials, std::size_t horizon) {
  const Scenario scenario = build_scenario(cfg);
  if (!scenario.oracle_axes) throw BoundError("total_mse_sweep needs a grid-oracle scenario");
  const ModelSpec& spec = scenario.spec;
  const double gamma = resolve_gamma(cfg, scenario);
  if (!(gamma > 0.0)) throw BoundError("total_mse_sweep needs gamma > 0");
  TotalMseTable out;
  out.norms = uniform_norms_on_grid(scenario, cfg.bounds.sweep_nodes);
  out.constants = uniform_schedule(out.norms, spec.state_dim, horizon, {{gamma}, cfg.bounds.eps, cfg.bounds.C_tilde});

  FilterConfig fc = cfg.filter;
  fc.particle_count = N;
  fc.gamma_threshold = 0.5 * gamma;
  const Policy policy = open_loop_policy(cfg, spec);
  std::vector<std::vector<double>> eN(trials), estar(trials);
  std::vector<std::vector<Vector>> phi(trials);
  std::vector<char> ok(trials, 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < trials; ++t) {
    try {
      Rng truth = make_stream(cfg.campaign.seed, {t, kTruthStream});
      Rng frng = make_stream(cfg.campaign.seed, {t, kFilterStream});
      const Trajectory traj = simulate(spec, policy, horizon, truth);
      GridTracker tracker(spec, *scenario.oracle_axes, scenario.oracle_options);
      FilterStepResult step;
      std::vector<double> a(horizon), b(horizon);
      for (std::size_t k = 0; k < horizon; ++k) {
        const auto& st = k == 0 ? tracker.start(traj.observations[0])
                                : tracker.advance(traj.controls[k - 1], traj.observations[k]);
        b[k] = st.mse.e_star;
        step = k == 0 ? filter_start(spec, traj.observations[0], fc, frng)
                      : filter_step(step.cloud, spec, traj.controls[k - 1], traj.observations[k], fc, frng);
        a[k] = spec.cost_estimation(traj.states[k], empirical_mean(step.cloud));
      }
      auto norms = phi_norms_k2(tracker.steps());
      for (auto& v : norms) v = v.cwiseAbs2();
      eN[t] = std::move(a);
      estar[t] = std::move(b);
      phi[t] = std::move(norms);
      ok[t] = 1;
    } catch (const FilterDivergence&) {
    } catch (const ParticleError&) {
    }
  }
  out.failed_trials = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  for (std::size_t k = 0; k < horizon; ++k) {
    std::vector<double> a, b;
    Vector ephi = Vector::Zero(spec.state_dim);
    for (std::size_t t = 0; t < trials; ++t) {
      if (!ok[t]) continue;
      a.push_back(eN[t][k]);
      b.push_back(estar[t][k]);
      ephi += phi[t][k];
    }
    TotalMseRow row;
    row.k = static_cast<long>(k);
    row.N = N;
    const Stats sa = mean_se(a), sb = mean_se(b);
    row.e_N_mean = sa.mean;
    row.e_N_se = sa.se;
    row.e_star_mean = sb.mean;
    row.e_star_se = sb.se;
    row.expected_phi_norms = a.empty() ? ephi : Vector(ephi / static_cast<double>(a.size()));
    row.n_bar = out.constants[k].n_threshold;
    try {
      row.bound_upper = total_bound(sb.mean, out.constants[k], row.expected_phi_norms, N, cfg.bounds.q).upper;
    } catch (const BoundError&) {
    }
    out.rows.push_back(row);
  }
  return out;
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundConstants>& constants) {
  out << "k,j,C,M,alpha,beta,N_threshold,mode\n" << std::setprecision(12);
  for (const auto& c : constants)
    for (Eigen::Index j = 0; j < c.C.size(); ++j)
      out << c.k << "," << j << "," << c.C[j] << "," << c.M[j] << "," << c.alpha[j] << "," << c.beta[j] << ","
          << c.n_threshold << "," << to_string(c.mode) << "\n";
}

}  // namespace dualpf
