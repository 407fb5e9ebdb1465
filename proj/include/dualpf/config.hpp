#pragma once

// JSON run configuration. Every field has a default; to_json writes the full
// resolved configuration, which is what RunRecords store for replay.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualpf/benchmark_models.hpp"
#include "dualpf/dual_control.hpp"
#include "dualpf/oracle.hpp"
#include "dualpf/particle_filter.hpp"
#include "dualpf/tan_model.hpp"
#include "dualpf/terrain.hpp"

namespace dualpf {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  /// linear_gaussian_1d | linear_gaussian_2d | bounded_clutter | tan | tan_slice
  std::string type = "linear_gaussian_1d";
  LinearGaussian1DParams linear_1d;
  LinearGaussian2DParams linear_2d;
  BoundedClutterParams clutter;
  TanParams tan;
  TanSliceParams slice;
};

struct TerrainConfig {
  /// flat | ramp | two_hill | two_zone | file
  std::string source = "flat";
  std::string path;
  TerrainFootprint footprint;
  double flat_height = 0.0;
  Eigen::Vector2d slope{0.1, 0.0};
  TwoHillSpec hills;
  TwoZoneSpec zones;
};

struct GammaConfig {
  /// none (threshold 0) | value | pilot
  std::string mode = "none";
  double value = 0.0;
  /// pilot: gamma = fraction * min over pilot runs of <mu^N_{k|k-1}, rho>.
  double fraction = 0.5;
  std::size_t pilot_runs = 20;
};

struct CostConfig {
  /// Empty goal means g^c = 0.
  Vector goal;
  Vector state_weights;
  double control_weight = 0.0;
};

struct ControllerConfig {
  /// dual | certainty_equivalent | constant
  std::string kind = "constant";
  Vector constant_control;
  /// Fixed true initial state; drawn from the prior when empty.
  Vector truth_initial;
};

struct CampaignConfig {
  std::size_t trials = 10;
  std::size_t horizon = 20;
  std::uint64_t seed = 1;
  std::vector<std::size_t> n_sweep{50, 200, 800, 3200};
  /// Filter repetitions per N for mse-sweep.
  std::size_t repetitions = 200;
  std::string output = "out";
  /// Grid oracle nodes per axis (1-D/2-D models).
  std::size_t oracle_nodes = 801;
  /// Half-width of the oracle grid in prior standard deviations (Gaussian models).
  double oracle_span = 8.0;
  bool oracle_auto_expand = true;
  /// Record the grid-oracle estimate in RunRecords when available.
  bool oracle_in_runs = false;
};

struct BoundsConfig {
  double C_tilde = 1.0;
  double eps = 0.1;
  double q = 0.5;
  /// epsilon used in the conditional sandwich.
  double eps_bound = 0.1;
  std::size_t sweep_nodes = 201;
};

struct Config {
  ModelConfig model;
  TerrainConfig terrain;
  FilterConfig filter;
  GammaConfig gamma;
  DualMpcConfig mpc;
  InfoCostSpec info;
  CostConfig cost;
  ControllerConfig controller;
  CampaignConfig campaign;
  BoundsConfig bounds;
};

Config config_from_json(const Json& j);
Json to_json(const Config& c);
Config load_config(const std::string& path);

/// Model built from a configuration, with what the harness needs around it.
struct Scenario {
  ModelSpec spec;
  std::shared_ptr<const TerrainMap> terrain;
  /// Present for models with state_dim <= 2.
  std::optional<std::vector<GridAxis>> oracle_axes;
  GridOptions oracle_options;
};

std::shared_ptr<const TerrainMap> build_terrain(const TerrainConfig& t);
Scenario build_scenario(const Config& c);

const char* to_string(Optimizer o);
const char* to_string(InfoKind k);
const char* to_string(ResamplingScheme s);

}  // namespace dualpf
