#pragma once

// Closed-loop runs, Monte Carlo campaigns, MSE sweeps and their persistence.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dualpf/bounds.hpp"
#include "dualpf/config.hpp"

namespace dualpf {

/// Stream tags combined with (trial) in derive_seed.
enum StreamTag : std::uint64_t { kTruthStream = 0, kFilterStream = 1, kPlannerStream = 2, kPilotStream = 3 };

struct StepRecord {
  long k = 0;
  Vector truth;
  Vector observation;
  Vector control;
  Vector estimate;
  std::optional<Vector> oracle_estimate;
  double squared_error = 0.0;
  std::optional<double> oracle_squared_error;
  FilterDiagnostics filter;
  std::optional<PlannerDiagnostics> planner;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  Json config;
  std::vector<StepRecord> steps;
  bool failed = false;
  std::string failure;
};

/// gamma_k used by the selection step (threshold gamma / 2); 0 when disabled.
double resolve_gamma(const Config& cfg, const Scenario& scenario);

/// One closed-loop run: observe, filter, estimate, plan, actuate. Streams are
/// derive_seed(cfg.campaign.seed, {trial, tag}). `gamma` overrides resolve_gamma.
RunRecord run_closed_loop(const Config& cfg, std::size_t trial, std::optional<double> gamma = std::nullopt);
RunRecord run_closed_loop(const Config& cfg, const Scenario& scenario, std::size_t trial, double gamma);

/// Line-delimited JSON: a header line, one line per step, an end line.
void write_run_record(std::ostream& out, const RunRecord& rec);
std::string serialize_run_record(const RunRecord& rec);
RunRecord read_run_record(std::istream& in);

/// Re-runs the record's (config, seed, trial) and compares serializations.
bool replay_matches(const RunRecord& rec);

struct CampaignSummary {
  std::vector<RunRecord> runs;
  double gamma = 0.0;
};

/// Independent trials in parallel; writes run_<trial>.jsonl and summary.csv into `out_dir` when non-empty.
CampaignSummary run_campaign(const Config& cfg, const std::string& out_dir = "");

struct MseRow {
  long k = 0;
  std::size_t N = 0;
  /// Per repetition sum over the oracle grid of mass * |x - Xhat^N|^2 (exact in X_k).
  double e_N_mean = 0.0;
  double e_N_se = 0.0;
  /// Per repetition |X - Xhat^N|^2 with X drawn from the oracle posterior.
  double e_N_sampled_mean = 0.0;
  double e_N_sampled_se = 0.0;
  std::optional<double> e_star;
  std::optional<double> bound_lower;
  std::optional<double> bound_upper;
  double n_threshold = 0.0;
};

struct MseSweepResult {
  std::vector<MseRow> rows;
  std::vector<std::string> notices;
  /// The fixed information vector and its oracle trace.
  Trajectory trajectory;
  std::vector<GridTracker::Step> oracle;
  std::vector<BoundConstants> constants;
};

/// Conditional MSE of the particle filter along one fixed information vector,
/// for every N of the sweep, with the oracle e* and the conditional sandwich.
/// Without an oracle both e_N columns hold |x_k - Xhat^N|^2 for the simulated truth.
MseSweepResult mse_sweep(const Config& cfg);

void write_mse_csv(std::ostream& out, const std::vector<MseRow>& rows);

struct TotalMseRow {
  long k = 0;
  std::size_t N = 0;
  double e_N_mean = 0.0;
  double e_N_se = 0.0;
  /// Mean over trajectories of the oracle conditional e*.
  double e_star_mean = 0.0;
  double e_star_se = 0.0;
  double n_bar = 0.0;
  Vector expected_phi_norms;
  std::optional<double> bound_upper;
};

struct TotalMseTable {
  std::vector<TotalMseRow> rows;
  std::vector<BoundConstants> constants;
  NormEstimates norms;
  std::size_t failed_trials = 0;
};

/// Total MSE over independent trajectories for a single particle count N,
/// alongside the oracle e*_tot and the uniform-mode sandwich.
TotalMseTable total_mse_sweep(const Config& cfg, std::size_t N, std::size_t trials, std::size_t horizon);

/// Uniform-mode norms from the oracle grid of a 1-D/2-D scenario.
NormEstimates uniform_norms_on_grid(const Scenario& scenario, std::size_t nodes_per_axis);

/// CSV k, j, C, M, alpha, beta, N_threshold, mode.
void write_bounds_csv(std::ostream& out, const std::vector<BoundConstants>& constants);

}  // namespace dualpf
