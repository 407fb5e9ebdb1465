#include "dualpf/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace dualpf {

const char* to_string(Optimizer o) { return o == Optimizer::random_shooting ? "random_shooting" : "cross_entropy"; }

const char* to_string(InfoKind k) {
  switch (k) {
    case InfoKind::none:
      return "none";
    case InfoKind::posterior_trace:
      return "posterior_trace";
    case InfoKind::terrain_gradient_deficit:
      return "terrain_gradient_deficit";
  }
  return "none";
}

const char* to_string(ResamplingScheme s) { return s == ResamplingScheme::systematic ? "systematic" : "multinomial"; }

namespace {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

Vector to_vector(const Json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string("config: '") + key + "' must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

template <class V>
void read_vec(const Json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  const Vector v = to_vector(j.at(key), key);
  if constexpr (V::SizeAtCompileTime != Eigen::Dynamic) {
    if (v.size() != V::SizeAtCompileTime)
      throw ConfigError(std::string("config: '") + key + "' must have " + std::to_string(V::SizeAtCompileTime) +
                        " entries");
  }
  out = v;
}

template <class M>
void read_mat(const Json& j, const char* key, M& out) {
  if (!j.contains(key)) return;
  const Json& m = j.at(key);
  const auto n = out.rows();
  if (m.is_object() && m.contains("diag")) {
    const Vector d = to_vector(m.at("diag"), key);
    if (d.size() != n) throw ConfigError(std::string("config: '") + key + ".diag' has the wrong size");
    out.setZero();
    out.diagonal() = d;
    return;
  }
  if (!m.is_array() || static_cast<Eigen::Index>(m.size()) != n)
    throw ConfigError(std::string("config: '") + key + "' must be a square array of rows or {\"diag\": [...]}");
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vector row = to_vector(m[static_cast<std::size_t>(r)], key);
    if (row.size() != out.cols()) throw ConfigError(std::string("config: '") + key + "' row has the wrong size");
    out.row(r) = row.transpose();
  }
}

Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class M>
Json mat_json(const M& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config: section '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace

Config config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  Config c;

  const Json& m = section(j, "model");
  read(m, "type", c.model.type);
  {
    const Json& s = section(m, "linear_1d");
    auto& p = c.model.linear_1d;
    read(s, "a", p.a), read(s, "b", p.b), read(s, "q", p.q), read(s, "c", p.c), read(s, "r", p.r);
    read(s, "m0", p.m0), read(s, "p0", p.p0);
  }
  {
    const Json& s = section(m, "linear_2d");
    auto& p = c.model.linear_2d;
    read_mat(s, "A", p.A), read_mat(s, "Q", p.Q), read_mat(s, "C", p.C), read_mat(s, "R", p.R);
    read_mat(s, "P0", p.P0);
    read_vec(s, "B", p.B), read_vec(s, "m0", p.m0);
  }
  {
    const Json& s = section(m, "clutter");
    auto& p = c.model.clutter;
    read(s, "L", p.L), read(s, "sigma", p.sigma), read(s, "support", p.support), read(s, "clutter", p.clutter);
  }
  {
    const Json& s = section(m, "tan");
    auto& p = c.model.tan;
    read(s, "dt", p.dt), read(s, "U_max", p.U_max);
    read_mat(s, "Q", p.Q);
    read_vec(s, "noise_sigma", p.noise_sigma);
    if (s.contains("noise_support_radius") && s.at("noise_support_radius").is_null())
      p.noise_support_radius = std::numeric_limits<double>::infinity();
    else
      read(s, "noise_support_radius", p.noise_support_radius);
    read(s, "position_coupling", p.position_coupling);
    read(s, "zero_likelihood_off_map", p.zero_likelihood_off_map);
    read_vec(s, "initial_mean", p.initial_mean);
    read_mat(s, "initial_cov", p.initial_cov);
  }
  {
    const Json& s = section(m, "tan_slice");
    auto& p = c.model.slice;
    read_vec(s, "start", p.start), read_vec(s, "direction", p.direction);
    read(s, "length", p.length), read(s, "altitude", p.altitude), read(s, "dt", p.dt), read(s, "U_max", p.U_max);
    read(s, "process_sd", p.process_sd), read(s, "noise_sigma", p.noise_sigma);
    read(s, "noise_support_radius", p.noise_support_radius);
    read(s, "initial_mean", p.initial_mean), read(s, "initial_sd", p.initial_sd);
  }

  const Json& t = section(j, "terrain");
  read(t, "source", c.terrain.source);
  read(t, "path", c.terrain.path);
  {
    const Json& f = section(t, "footprint");
    read_vec(f, "origin", c.terrain.footprint.origin);
    read(f, "cell_size", c.terrain.footprint.cell_size);
    read(f, "cols", c.terrain.footprint.cols);
    read(f, "rows", c.terrain.footprint.rows);
  }
  read(t, "flat_height", c.terrain.flat_height);
  read_vec(t, "slope", c.terrain.slope);
  {
    const Json& h = section(t, "two_hill");
    read_vec(h, "center_a", c.terrain.hills.center_a), read_vec(h, "center_b", c.terrain.hills.center_b);
    read(h, "amplitude", c.terrain.hills.amplitude), read(h, "width", c.terrain.hills.width);
    read(h, "base", c.terrain.hills.base);
  }
  {
    const Json& z = section(t, "two_zone");
    read(z, "boundary", c.terrain.zones.boundary), read(z, "flat_height", c.terrain.zones.flat_height);
    read(z, "rough_amplitude", c.terrain.zones.rough_amplitude);
    read(z, "rough_wavelength", c.terrain.zones.rough_wavelength), read(z, "seed", c.terrain.zones.seed);
  }

  const Json& f = section(j, "filter");
  read(f, "particles", c.filter.particle_count);
  read(f, "max_redraws", c.filter.max_redraws);
  if (f.contains("resampling")) {
    const auto s = f.at("resampling").get<std::string>();
    if (s == "systematic")
      c.filter.resampling = ResamplingScheme::systematic;
    else if (s == "multinomial")
      c.filter.resampling = ResamplingScheme::multinomial;
    else
      throw ConfigError("config: filter.resampling must be systematic or multinomial");
  }
  {
    const Json& g = section(f, "gamma");
    read(g, "mode", c.gamma.mode), read(g, "value", c.gamma.value), read(g, "fraction", c.gamma.fraction);
    read(g, "pilot_runs", c.gamma.pilot_runs);
    if (c.gamma.mode != "none" && c.gamma.mode != "value" && c.gamma.mode != "pilot")
      throw ConfigError("config: filter.gamma.mode must be none, value or pilot");
  }

  const Json& p = section(j, "mpc");
  read(p, "horizon", c.mpc.horizon), read(p, "discount", c.mpc.discount);
  read(p, "scenario_count", c.mpc.scenario_count), read(p, "candidate_count", c.mpc.candidate_count);
  read(p, "info_weight", c.mpc.info_weight), read(p, "ce_iterations", c.mpc.ce_iterations);
  read(p, "ce_elite_fraction", c.mpc.ce_elite_fraction), read(p, "scenario_noise", c.mpc.scenario_noise);
  read(p, "planning_particles", c.mpc.planning_particles), read(p, "control_scale", c.mpc.control_scale);
  if (p.contains("optimizer")) {
    const auto s = p.at("optimizer").get<std::string>();
    if (s == "random_shooting")
      c.mpc.optimizer = Optimizer::random_shooting;
    else if (s == "cross_entropy")
      c.mpc.optimizer = Optimizer::cross_entropy;
    else
      throw ConfigError("config: mpc.optimizer must be random_shooting or cross_entropy");
  }

  const Json& ic = section(j, "info_cost");
  if (ic.contains("kind")) {
    const auto s = ic.at("kind").get<std::string>();
    if (s == "none")
      c.info.kind = InfoKind::none;
    else if (s == "posterior_trace")
      c.info.kind = InfoKind::posterior_trace;
    else if (s == "terrain_gradient_deficit")
      c.info.kind = InfoKind::terrain_gradient_deficit;
    else
      throw ConfigError("config: info_cost.kind must be none, posterior_trace or terrain_gradient_deficit");
  }
  read(ic, "gradient_floor", c.info.gradient_floor);
  read(ic, "position_coords", c.info.position_coords);

  const Json& cc = section(j, "cost");
  read_vec(cc, "goal", c.cost.goal), read_vec(cc, "state_weights", c.cost.state_weights);
  read(cc, "control_weight", c.cost.control_weight);

  const Json& ct = section(j, "controller");
  read(ct, "kind", c.controller.kind);
  read_vec(ct, "constant_control", c.controller.constant_control);
  read_vec(ct, "truth_initial", c.controller.truth_initial);
  if (c.controller.kind != "dual" && c.controller.kind != "certainty_equivalent" && c.controller.kind != "constant")
    throw ConfigError("config: controller.kind must be dual, certainty_equivalent or constant");

  const Json& cp = section(j, "campaign");
  read(cp, "trials", c.campaign.trials), read(cp, "horizon", c.campaign.horizon), read(cp, "seed", c.campaign.seed);
  read(cp, "n_sweep", c.campaign.n_sweep), read(cp, "repetitions", c.campaign.repetitions);
  read(cp, "output", c.campaign.output), read(cp, "oracle_nodes", c.campaign.oracle_nodes);
  read(cp, "oracle_span", c.campaign.oracle_span), read(cp, "oracle_auto_expand", c.campaign.oracle_auto_expand);
  read(cp, "oracle_in_runs", c.campaign.oracle_in_runs);
  if (c.campaign.trials < 1) throw ConfigError("config: campaign.trials must be >= 1");
  if (c.campaign.horizon < 1) throw ConfigError("config: campaign.horizon must be >= 1");
  for (std::size_t i = 1; i < c.campaign.n_sweep.size(); ++i)
    if (c.campaign.n_sweep[i] <= c.campaign.n_sweep[i - 1])
      throw ConfigError("config: campaign.n_sweep must be strictly increasing");

  const Json& b = section(j, "bounds");
  read(b, "C_tilde", c.bounds.C_tilde), read(b, "eps", c.bounds.eps), read(b, "q", c.bounds.q);
  read(b, "eps_bound", c.bounds.eps_bound), read(b, "sweep_nodes", c.bounds.sweep_nodes);

  c.mpc.validate();
  return c;
}

Json to_json(const Config& c) {
  Json j;
  const auto& l1 = c.model.linear_1d;
  const auto& l2 = c.model.linear_2d;
  const auto& cl = c.model.clutter;
  const auto& tn = c.model.tan;
  const auto& sl = c.model.slice;
  Json tan = {{"dt", tn.dt},
              {"U_max", tn.U_max},
              {"Q", mat_json(tn.Q)},
              {"noise_sigma", vec_json(tn.noise_sigma)},
              {"noise_support_radius", nullptr},
              {"position_coupling", tn.position_coupling},
              {"zero_likelihood_off_map", tn.zero_likelihood_off_map},
              {"initial_mean", vec_json(tn.initial_mean)},
              {"initial_cov", mat_json(tn.initial_cov)}};
  if (std::isfinite(tn.noise_support_radius)) tan["noise_support_radius"] = tn.noise_support_radius;
  j["model"] = {
      {"type", c.model.type},
      {"linear_1d", {{"a", l1.a}, {"b", l1.b}, {"q", l1.q}, {"c", l1.c}, {"r", l1.r}, {"m0", l1.m0}, {"p0", l1.p0}}},
      {"linear_2d",
       {{"A", mat_json(l2.A)},
        {"B", vec_json(l2.B)},
        {"Q", mat_json(l2.Q)},
        {"C", mat_json(l2.C)},
        {"R", mat_json(l2.R)},
        {"m0", vec_json(l2.m0)},
        {"P0", mat_json(l2.P0)}}},
      {"clutter", {{"L", cl.L}, {"sigma", cl.sigma}, {"support", cl.support}, {"clutter", cl.clutter}}},
      {"tan", tan},
      {"tan_slice",
       {{"start", vec_json(sl.start)},
        {"direction", vec_json(sl.direction)},
        {"length", sl.length},
        {"altitude", sl.altitude},
        {"dt", sl.dt},
        {"U_max", sl.U_max},
        {"process_sd", sl.process_sd},
        {"noise_sigma", sl.noise_sigma},
        {"noise_support_radius", sl.noise_support_radius},
        {"initial_mean", sl.initial_mean},
        {"initial_sd", sl.initial_sd}}}};
  const auto& t = c.terrain;
  j["terrain"] = {{"source", t.source},
                  {"path", t.path},
                  {"footprint",
                   {{"origin", vec_json(t.footprint.origin)},
                    {"cell_size", t.footprint.cell_size},
                    {"cols", t.footprint.cols},
                    {"rows", t.footprint.rows}}},
                  {"flat_height", t.flat_height},
                  {"slope", vec_json(t.slope)},
                  {"two_hill",
                   {{"center_a", vec_json(t.hills.center_a)},
                    {"center_b", vec_json(t.hills.center_b)},
                    {"amplitude", t.hills.amplitude},
                    {"width", t.hills.width},
                    {"base", t.hills.base}}},
                  {"two_zone",
                   {{"boundary", t.zones.boundary},
                    {"flat_height", t.zones.flat_height},
                    {"rough_amplitude", t.zones.rough_amplitude},
                    {"rough_wavelength", t.zones.rough_wavelength},
                    {"seed", t.zones.seed}}}};
  j["filter"] = {{"particles", c.filter.particle_count},
                 {"max_redraws", c.filter.max_redraws},
                 {"resampling", to_string(c.filter.resampling)},
                 {"gamma",
                  {{"mode", c.gamma.mode},
                   {"value", c.gamma.value},
                   {"fraction", c.gamma.fraction},
                   {"pilot_runs", c.gamma.pilot_runs}}}};
  j["mpc"] = {{"horizon", c.mpc.horizon},
              {"discount", c.mpc.discount},
              {"scenario_count", c.mpc.scenario_count},
              {"candidate_count", c.mpc.candidate_count},
              {"info_weight", c.mpc.info_weight},
              {"optimizer", to_string(c.mpc.optimizer)},
              {"ce_iterations", c.mpc.ce_iterations},
              {"ce_elite_fraction", c.mpc.ce_elite_fraction},
              {"scenario_noise", c.mpc.scenario_noise},
              {"planning_particles", c.mpc.planning_particles},
              {"control_scale", c.mpc.control_scale}};
  j["info_cost"] = {{"kind", to_string(c.info.kind)},
                    {"gradient_floor", c.info.gradient_floor},
                    {"position_coords", c.info.position_coords}};
  j["cost"] = {{"goal", vec_json(c.cost.goal)},
               {"state_weights", vec_json(c.cost.state_weights)},
               {"control_weight", c.cost.control_weight}};
  j["controller"] = {{"kind", c.controller.kind},
                     {"constant_control", vec_json(c.controller.constant_control)},
                     {"truth_initial", vec_json(c.controller.truth_initial)}};
  j["campaign"] = {{"trials", c.campaign.trials},
                   {"horizon", c.campaign.horizon},
                   {"seed", c.campaign.seed},
                   {"n_sweep", c.campaign.n_sweep},
                   {"repetitions", c.campaign.repetitions},
                   {"output", c.campaign.output},
                   {"oracle_nodes", c.campaign.oracle_nodes},
                   {"oracle_span", c.campaign.oracle_span},
                   {"oracle_auto_expand", c.campaign.oracle_auto_expand},
                   {"oracle_in_runs", c.campaign.oracle_in_runs}};
  j["bounds"] = {{"C_tilde", c.bounds.C_tilde},
                 {"eps", c.bounds.eps},
                 {"q", c.bounds.q},
                 {"eps_bound", c.bounds.eps_bound},
                 {"sweep_nodes", c.bounds.sweep_nodes}};
  return j;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::shared_ptr<const TerrainMap> build_terrain(const TerrainConfig& t) {
  if (t.source == "flat") return std::make_shared<const TerrainMap>(make_flat_terrain(t.footprint, t.flat_height));
  if (t.source == "ramp") return std::make_shared<const TerrainMap>(make_ramp_terrain(t.footprint, t.slope));
  if (t.source == "two_hill") return std::make_shared<const TerrainMap>(make_two_hill_terrain(t.footprint, t.hills));
  if (t.source == "two_zone") return std::make_shared<const TerrainMap>(make_two_zone_terrain(t.footprint, t.zones));
  if (t.source == "file") {
    if (t.path.empty()) throw ConfigError("config: terrain.path required for source 'file'");
    return std::make_shared<const TerrainMap>(load_ascii_grid(t.path));
  }
  throw ConfigError("config: unknown terrain.source '" + t.source + "'");
}

Scenario build_scenario(const Config& c) {
  Scenario s;
  const auto nodes = c.campaign.oracle_nodes;
  const double span = c.campaign.oracle_span;
  s.oracle_options.auto_expand = c.campaign.oracle_auto_expand;
  const std::string& type = c.model.type;
  if (type == "linear_gaussian_1d") {
    const auto& p = c.model.linear_1d;
    s.spec = make_linear_gaussian_1d(p);
    const double h = span * std::sqrt(p.p0);
    s.oracle_axes = std::vector<GridAxis>{GridAxis::spanning(p.m0 - h, p.m0 + h, nodes)};
  } else if (type == "linear_gaussian_2d") {
    const auto& p = c.model.linear_2d;
    s.spec = make_linear_gaussian_2d(p);
    std::vector<GridAxis> axes;
    for (int i = 0; i < 2; ++i) {
      const double h = span * std::sqrt(p.P0(i, i));
      axes.push_back(GridAxis::spanning(p.m0[i] - h, p.m0[i] + h, nodes));
    }
    s.oracle_axes = axes;
  } else if (type == "bounded_clutter") {
    const auto& p = c.model.clutter;
    s.spec = make_bounded_clutter(p);
    const double step = 2.0 * p.L / static_cast<double>(nodes);
    s.oracle_axes = std::vector<GridAxis>{GridAxis{-p.L + 0.5 * step, step, nodes}};
    s.oracle_options.auto_expand = false;
  } else if (type == "tan_slice") {
    s.terrain = build_terrain(c.terrain);
    const auto m = build_tan_slice_model(s.terrain, c.model.slice);
    s.spec = m.spec;
    const auto& p = c.model.slice;
    const double margin = 6.0 * p.process_sd + p.dt * p.U_max;
    s.oracle_axes = std::vector<GridAxis>{GridAxis::spanning(-margin, p.length + margin, nodes)};
    s.oracle_options.auto_expand = false;
  } else if (type == "tan") {
    s.terrain = build_terrain(c.terrain);
    s.spec = build_tan_model(s.terrain, c.model.tan).spec;
  } else {
    throw ConfigError("config: unknown model.type '" + type + "'");
  }
  if (c.cost.goal.size() > 0) {
    if (c.cost.goal.size() != s.spec.state_dim) throw ConfigError("config: cost.goal has the wrong dimension");
    const Vector w = c.cost.state_weights.size() ? c.cost.state_weights : Vector::Ones(s.spec.state_dim);
    s.spec.cost_control = quadratic_goal_cost(c.cost.goal, w, c.cost.control_weight);
  }
  return s;
}

}  // namespace dualpf
