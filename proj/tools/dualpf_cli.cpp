#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dualpf/sim.hpp"

using namespace dualpf;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> particles;
};

Config resolve(const Globals& g) {
  Config c = g.config.empty() ? Config{} : load_config(g.config);
  if (g.seed) c.campaign.seed = *g.seed;
  if (g.out) c.campaign.output = *g.out;
  if (g.trials) c.campaign.trials = *g.trials;
  if (g.particles) c.filter.particle_count = *g.particles;
  return c;
}

std::filesystem::path out_dir(const Config& c) {
  std::filesystem::path p(c.campaign.output);
  std::filesystem::create_directories(p);
  return p;
}

Trajectory reference_trajectory(const Config& cfg, const Scenario& sc) {
  Vector u = cfg.controller.constant_control.size() ? cfg.controller.constant_control : sc.spec.zero_control();
  Rng rng = make_stream(cfg.campaign.seed, {0, kTruthStream});
  return simulate(sc.spec, constant_policy(u), cfg.campaign.horizon, rng);
}

int cmd_run(const Config& cfg, std::size_t trial) {
  const RunRecord rec = run_closed_loop(cfg, trial);
  const auto path = out_dir(cfg) / ("run_" + std::to_string(trial) + ".jsonl");
  std::ofstream f(path);
  write_run_record(f, rec);
  double sum = 0.0;
  for (const auto& s : rec.steps) sum += s.squared_error;
  std::cout << "steps " << rec.steps.size() << "  mean squared error "
            << (rec.steps.empty() ? 0.0 : sum / static_cast<double>(rec.steps.size())) << "\n";
  if (rec.failed) std::cout << "failed: " << rec.failure << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return rec.failed ? 2 : 0;
}

int cmd_replay(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  const RunRecord rec = read_run_record(f);
  const bool ok = replay_matches(rec);
  std::cout << (ok ? "replay matches" : "replay differs") << "\n";
  return ok ? 0 : 1;
}

int cmd_campaign(const Config& cfg) {
  const auto dir = out_dir(cfg);
  const CampaignSummary s = run_campaign(cfg, dir.string());
  std::size_t failed = 0;
  for (const auto& r : s.runs) failed += r.failed ? 1 : 0;
  std::cout << "trials " << s.runs.size() << "  failed " << failed << "  gamma " << s.gamma << "\n";
  std::cout << "wrote " << (dir / "summary.csv").string() << "\n";
  return 0;
}

int cmd_mse_sweep(const Config& cfg) {
  const MseSweepResult r = mse_sweep(cfg);
  for (const auto& n : r.notices) std::cerr << "notice: " << n << "\n";
  const auto path = out_dir(cfg) / "mse_sweep.csv";
  std::ofstream f(path);
  write_mse_csv(f, r.rows);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_bounds(const Config& cfg, const std::string& mode) {
  const Scenario sc = build_scenario(cfg);
  const double gamma = resolve_gamma(cfg, sc);
  if (!(gamma > 0.0)) throw BoundError("bounds need gamma > 0 (set filter.gamma)");
  const BoundSettings bs{{gamma}, cfg.bounds.eps, cfg.bounds.C_tilde};
  std::vector<BoundConstants> table;
  if (mode == "uniform") {
    const NormEstimates norms = uniform_norms_on_grid(sc, cfg.bounds.sweep_nodes);
    table = uniform_schedule(norms, sc.spec.state_dim, cfg.campaign.horizon, bs);
  } else {
    if (!sc.oracle_axes) throw BoundError("conditional bounds need a grid-oracle model");
    const Trajectory traj = reference_trajectory(cfg, sc);
    History h;
    h.start(traj.observations[0]);
    GridTracker tracker(sc.spec, *sc.oracle_axes, sc.oracle_options);
    tracker.start(traj.observations[0]);
    for (std::size_t k = 1; k < traj.observations.size(); ++k) {
      h.append(traj.controls[k - 1], traj.observations[k]);
      tracker.advance(traj.controls[k - 1], traj.observations[k]);
    }
    SweepGrid base;
    std::vector<GridAxis> axes;
    for (const auto& a : *sc.oracle_axes) axes.push_back(GridAxis::spanning(a.lower, a.upper(), cfg.bounds.sweep_nodes));
    base.states = grid_points(axes);
    base.successors = base.states;
    table = conditional_schedule(sc.spec, base, h, tracker.steps(), bs);
  }
  const auto path = out_dir(cfg) / ("bounds_" + mode + ".csv");
  std::ofstream f(path);
  write_bounds_csv(f, table);
  write_bounds_csv(std::cout, table);
  return 0;
}

int cmd_oracle(const Config& cfg) {
  const Scenario sc = build_scenario(cfg);
  if (!sc.oracle_axes) throw OracleError("model '" + cfg.model.type + "' has no grid oracle");
  const Trajectory traj = reference_trajectory(cfg, sc);
  GridTracker tracker(sc.spec, *sc.oracle_axes, sc.oracle_options);
  const auto path = out_dir(cfg) / "oracle.csv";
  std::ofstream f(path);
  f << "k";
  for (int d = 0; d < sc.spec.state_dim; ++d) f << ",x" << d;
  f << ",mass\n" << std::setprecision(12);
  for (std::size_t k = 0; k < traj.observations.size(); ++k) {
    const auto& st = k == 0 ? tracker.start(traj.observations[0])
                            : tracker.advance(traj.controls[k - 1], traj.observations[k]);
    const GridDistribution& post = tracker.posterior();
    for (Eigen::Index i = 0; i < post.size(); ++i) {
      const Vector x = post.node(i);
      f << k;
      for (Eigen::Index d = 0; d < x.size(); ++d) f << "," << x[d];
      f << "," << post.masses()[i] << "\n";
    }
    std::cout << "k " << k << "  mean " << st.mse.mean.transpose() << "  e* " << st.mse.e_star << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_terrain_gen(const Config& cfg, const std::string& kind, const std::string& file) {
  TerrainConfig t = cfg.terrain;
  t.source = kind;
  t.zones.seed = cfg.campaign.seed;
  const auto map = build_terrain(t);
  const std::string path = file.empty() ? (out_dir(cfg) / (kind + ".asc")).string() : file;
  save_ascii_grid(path, *map);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_config(const Config& cfg) {
  std::cout << to_json(cfg).dump(2) << "\n";
  return 0;
}

int cmd_verify(const Config& cfg, bool disable_truncation) {
  TanParams p = cfg.model.tan;
  if (disable_truncation) p.noise_support_radius = std::numeric_limits<double>::infinity();
  const TanModel model = build_tan_model(build_terrain(cfg.terrain), p);
  const AssumptionReport r = verify_assumptions(model);
  for (const auto& c : r.report.checks)
    std::cout << (c.passed ? "ok    " : "FAIL  ") << c.name << "  defect " << c.defect
              << (c.message.empty() ? "" : "  " + c.message) << "\n";
  std::cout << "sup K " << r.norm_K_inf << " (Gaussian peak " << r.norm_K_analytic << ")  sup rho "
            << r.norm_rho_inf << "\n";
  std::cout << (r.passed() ? "assumptions hold" : "assumptions violated") << "\n";
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualpf: selection particle filter, MSE bounds and dual MPC"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "campaign seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--trials", g.trials, "number of trials");
  app.add_option("--particles", g.particles, "particle count");

  auto* run = app.add_subcommand("run", "single closed-loop run");
  std::size_t trial = 0;
  run->add_option("--trial", trial, "trial index");
  auto* replay = app.add_subcommand("replay", "re-run a RunRecord and compare");
  std::string record;
  replay->add_option("record", record, "run_<trial>.jsonl")->required();
  auto* campaign = app.add_subcommand("campaign", "Monte Carlo campaign");
  auto* sweep = app.add_subcommand("mse-sweep", "conditional MSE against the grid oracle");
  auto* bounds = app.add_subcommand("bounds", "bound constants as CSV");
  std::string mode = "conditional";
  bounds->add_option("--mode", mode, "conditional | uniform")->check(CLI::IsMember({"conditional", "uniform"}));
  auto* oracle = app.add_subcommand("oracle", "grid posteriors as CSV");
  auto* terrain = app.add_subcommand("terrain", "terrain maps");
  terrain->require_subcommand(1);
  auto* gen = terrain->add_subcommand("gen", "write a synthetic ESRI ASCII grid");
  std::string kind = "two_hill", file;
  gen->add_option("--kind", kind, "flat | ramp | two_hill | two_zone")
      ->check(CLI::IsMember({"flat", "ramp", "two_hill", "two_zone"}));
  gen->add_option("--file", file, "output file");
  auto* show = app.add_subcommand("config", "print the resolved configuration as JSON");
  auto* verify = app.add_subcommand("verify-assumptions", "check the TAN model assumptions");
  bool no_trunc = false;
  verify->add_flag("--disable-truncation", no_trunc, "use untruncated Gaussian noise");

  CLI11_PARSE(app, argc, argv);
  try {
    const Config cfg = resolve(g);
    if (*run) return cmd_run(cfg, trial);
    if (*replay) return cmd_replay(record);
    if (*campaign) return cmd_campaign(cfg);
    if (*sweep) return cmd_mse_sweep(cfg);
    if (*bounds) return cmd_bounds(cfg, mode);
    if (*oracle) return cmd_oracle(cfg);
    if (*gen) return cmd_terrain_gen(cfg, kind, file);
    if (*verify) return cmd_verify(cfg, no_trunc);
    if (*show) return cmd_config(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
