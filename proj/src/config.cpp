#include "cloakopt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

double to_double(const Entry& e) {
  double x = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw ParseError(e.line, "expected a number, got '" + e.value + "'");
  return x;
}

long long to_integer(const Entry& e) {
  long long x = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw ParseError(e.line, "expected an integer, got '" + e.value + "'");
  return x;
}

int to_int(const Entry& e) {
  const long long x = to_integer(e);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ParseError(e.line, "integer out of range: " + e.value);
  }
  return static_cast<int>(x);
}

bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ParseError(e.line, "expected true or false, got '" + e.value + "'");
}

std::vector<double> to_list(const Entry& e) {
  std::vector<double> out;
  std::istringstream in(e.value);
  std::string tok;
  while (in >> tok) {
    if (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (tok.empty()) continue;
    out.push_back(to_double(Entry{tok, e.line}));
  }
  return out;
}

Point to_point(const Entry& e) {
  const auto v = to_list(e);
  if (v.size() != 2) throw ParseError(e.line, "expected two coordinates");
  return {v[0], v[1]};
}

template <class Enum>
Enum to_choice(const Entry& e, const std::map<std::string, Enum>& choices) {
  const auto it = choices.find(e.value);
  if (it != choices.end()) return it->second;
  std::string allowed;
  for (const auto& [k, unused] : choices) allowed += (allowed.empty() ? "" : ", ") + k;
  throw ParseError(e.line, "'" + e.value + "' is not one of: " + allowed);
}

}  // namespace

ProblemData ScenarioConfig::default_data() {
  ProblemData d;
  d.source.center = {1.5, 0.0};
  d.source.radius = 0.15;
  return d;
}

OptimizeOptions ScenarioConfig::default_optimizer() {
  OptimizeOptions o;
  o.max_inner_iterations = 3000;
  // Starting at 1e-2 the first stage drives the design into a region the
  // later stages cannot leave; 1e-3 ends at a ten times lower cost.
  o.barrier_initial = 1e-3;
  return o;
}

void validate(const ScenarioConfig& cfg) {
  cfg.data.validate();
  if (cfg.mesh_source == MeshSource::generate) {
    if (!(cfg.side > 0.0)) throw ConfigError("side must be positive");
    if (!(cfg.h_max > 0.0)) throw ConfigError("h_max must be positive");
  } else if (!std::filesystem::exists(cfg.mesh_path)) {
    throw ConfigError("mesh file not found: " + cfg.mesh_path.string());
  }
  if (cfg.regions == RegionSource::mesh && cfg.mesh_source != MeshSource::file) {
    throw ConfigError("regions = mesh needs mesh = file");
  }
  if (!(cfg.geometry.cloak_thickness > 0.0)) throw ConfigError("cloak_thickness must be positive");
  if (!(cfg.geometry.observation_gap >= 0.0)) throw ConfigError("observation_gap must be non-negative");
  if (const auto* disk = std::get_if<DiskShape>(&cfg.geometry.obstacle)) {
    if (!(disk->radius > 0.0)) throw ConfigError("obstacle_radius must be positive");
  } else if (std::get<PolygonShape>(cfg.geometry.obstacle).vertices.size() < 3) {
    throw ConfigError("an obstacle polygon needs at least three vertices");
  }
  if (cfg.regime == Regime::transient) cfg.grid.validate();
  if (!(cfg.grid.theta >= 0.0 && cfg.grid.theta <= 1.0)) throw ConfigError("theta must lie in [0, 1]");
  cfg.optimizer.validate();
  if (cfg.audit_coordinates < 1) throw ConfigError("audit_coordinates must be positive");
  if (!(cfg.audit_step > 0.0)) throw ConfigError("audit_step must be positive");
  if (!(cfg.audit_tolerance > 0.0)) throw ConfigError("audit_tolerance must be positive");
  if (cfg.transfer_levels < 1) throw ConfigError("transfer_levels must be at least 1");
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
}

ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::map<std::string, Entry> entries;
  {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find('#');
      const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) throw ParseError(line, "missing key before '='");
      if (value.empty()) throw ParseError(line, "missing value for '" + key + "'");
      if (!entries.emplace(key, Entry{value, line}).second) throw ParseError(line, "duplicate key '" + key + "'");
    }
  }

  ScenarioConfig cfg;
  auto& d = cfg.data;
  auto& o = cfg.optimizer;
  DiskShape disk = std::get<DiskShape>(cfg.geometry.obstacle);
  std::vector<Point> polygon;
  bool use_polygon = false;
  int obstacle_line = 0;

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  using Setter = std::function<void(const Entry&)>;
  const std::map<std::string, Setter> setters{
      {"mesh", [&](const Entry& e) {
         cfg.mesh_source = to_choice<MeshSource>(e, {{"generate", MeshSource::generate}, {"file", MeshSource::file}});
       }},
      {"mesh_path", [&](const Entry& e) {
         cfg.mesh_path = resolve(e.value);
         if (!std::filesystem::exists(cfg.mesh_path)) throw ParseError(e.line, "file not found: " + cfg.mesh_path.string());
       }},
      {"side", [&](const Entry& e) { cfg.side = to_double(e); }},
      {"h_max", [&](const Entry& e) { cfg.h_max = to_double(e); }},
      {"regions", [&](const Entry& e) {
         cfg.regions = to_choice<RegionSource>(e, {{"geometry", RegionSource::geometry}, {"mesh", RegionSource::mesh}});
       }},
      {"obstacle", [&](const Entry& e) {
         use_polygon = to_choice<bool>(e, {{"disk", false}, {"polygon", true}});
         obstacle_line = e.line;
       }},
      {"obstacle_center", [&](const Entry& e) { disk.center = to_point(e); }},
      {"obstacle_radius", [&](const Entry& e) { disk.radius = to_double(e); }},
      {"obstacle_vertices", [&](const Entry& e) {
         const auto v = to_list(e);
         if (v.size() % 2 != 0) throw ParseError(e.line, "obstacle_vertices needs x y pairs");
         polygon.clear();
         for (std::size_t i = 0; i < v.size(); i += 2) polygon.push_back({v[i], v[i + 1]});
       }},
      {"cloak_thickness", [&](const Entry& e) { cfg.geometry.cloak_thickness = to_double(e); }},
      {"observation_gap", [&](const Entry& e) { cfg.geometry.observation_gap = to_double(e); }},
      {"source_center", [&](const Entry& e) { d.source.center = to_point(e); }},
      {"source_radius", [&](const Entry& e) { d.source.radius = to_double(e); }},
      {"source_whole_domain", [&](const Entry& e) { d.source.whole_domain = to_bool(e); }},
      {"s", [&](const Entry& e) { d.source.magnitude = to_double(e); }},
      {"mu", [&](const Entry& e) { d.mu = to_double(e); }},
      {"alpha", [&](const Entry& e) { d.alpha = to_double(e); }},
      {"T_o", [&](const Entry& e) { d.T_o = to_double(e); }},
      {"epsilon", [&](const Entry& e) { d.epsilon = to_double(e); }},
      {"beta", [&](const Entry& e) { d.beta = to_double(e); }},
      {"beta_g", [&](const Entry& e) { d.beta_g = to_double(e); }},
      {"xi", [&](const Entry& e) { d.xi = to_double(e); }},
      {"xi_g", [&](const Entry& e) { d.xi_g = to_double(e); }},
      {"gamma", [&](const Entry& e) { d.gamma = to_double(e); }},
      {"gamma_g", [&](const Entry& e) { d.gamma_g = to_double(e); }},
      {"robin_sign", [&](const Entry& e) { d.robin_sign = to_int(e); }},
      {"regime", [&](const Entry& e) {
         cfg.regime = to_choice<Regime>(e, {{"steady", Regime::steady}, {"transient", Regime::transient}});
       }},
      {"T", [&](const Entry& e) { cfg.grid.final_time = to_double(e); }},
      {"N", [&](const Entry& e) { cfg.grid.steps = to_int(e); }},
      {"theta", [&](const Entry& e) { cfg.grid.theta = to_double(e); }},
      {"include_final", [&](const Entry& e) { cfg.grid.include_final = to_bool(e); }},
      {"max_outer_iterations", [&](const Entry& e) { o.max_outer_iterations = to_int(e); }},
      {"max_inner_iterations", [&](const Entry& e) { o.max_inner_iterations = to_int(e); }},
      {"barrier_initial", [&](const Entry& e) { o.barrier_initial = to_double(e); }},
      {"barrier_shrink", [&](const Entry& e) { o.barrier_shrink = to_double(e); }},
      {"barrier_final", [&](const Entry& e) { o.barrier_final = to_double(e); }},
      {"gradient_tolerance", [&](const Entry& e) { o.gradient_tolerance = to_double(e); }},
      {"stall_tolerance", [&](const Entry& e) { o.stall_tolerance = to_double(e); }},
      {"stall_iterations", [&](const Entry& e) { o.stall_iterations = to_int(e); }},
      {"armijo_c1", [&](const Entry& e) { o.armijo_c1 = to_double(e); }},
      {"backtrack_factor", [&](const Entry& e) { o.backtrack_factor = to_double(e); }},
      {"max_backtracks", [&](const Entry& e) { o.max_backtracks = to_int(e); }},
      {"initial_step_fraction", [&](const Entry& e) { o.initial_step_fraction = to_double(e); }},
      {"direction", [&](const Entry& e) {
         o.direction = to_choice<SearchDirection>(
             e, {{"lbfgs", SearchDirection::lbfgs}, {"steepest_descent", SearchDirection::steepest_descent}});
       }},
      {"barrier", [&](const Entry& e) {
         o.barrier = to_choice<BarrierKind>(e, {{"log", BarrierKind::log}, {"bounded", BarrierKind::bounded}});
       }},
      {"lbfgs_memory", [&](const Entry& e) { o.lbfgs_memory = to_int(e); }},
      {"init_u", [&](const Entry& e) { cfg.init_u = to_double(e); }},
      {"init_f", [&](const Entry& e) { cfg.init_f = to_double(e); }},
      {"init_v", [&](const Entry& e) { cfg.init_v = to_double(e); }},
      {"audit_coordinates", [&](const Entry& e) { cfg.audit_coordinates = to_int(e); }},
      {"audit_step", [&](const Entry& e) { cfg.audit_step = to_double(e); }},
      {"audit_tolerance", [&](const Entry& e) { cfg.audit_tolerance = to_double(e); }},
      {"transfer_levels", [&](const Entry& e) { cfg.transfer_levels = to_int(e); }},
      {"transfer_reoptimize", [&](const Entry& e) { cfg.transfer_reoptimize = to_bool(e); }},
      {"output", [&](const Entry& e) { cfg.output_dir = resolve(e.value); }},
      {"seed", [&](const Entry& e) {
         const long long s = to_integer(e);
         if (s < 0) throw ParseError(e.line, "seed must be non-negative");
         cfg.seed = static_cast<std::uint64_t>(s);
       }},
      {"threads", [&](const Entry& e) { cfg.threads = to_int(e); }},
  };

  for (const auto& [key, entry] : entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ParseError(entry.line, "unknown key '" + key + "'");
    it->second(entry);
  }

  if (cfg.mesh_source == MeshSource::file && !entries.count("mesh_path")) {
    throw ParseError(entries.at("mesh").line, "mesh = file requires mesh_path");
  }
  if (use_polygon) {
    if (!entries.count("obstacle_vertices")) throw ParseError(obstacle_line, "obstacle = polygon requires obstacle_vertices");
    cfg.geometry.obstacle = PolygonShape{polygon};
  } else {
    cfg.geometry.obstacle = disk;
  }

  // Range checks are reported against the line of the key involved.
  try {
    validate(cfg);
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& err) {
    static const std::vector<std::pair<std::string, std::string>> hints{
        {"theta", "theta"}, {"final time", "T"}, {"time steps", "N"}, {"mu ", "mu"},
        {"epsilon", "epsilon"}, {"h_max", "h_max"}, {"side", "side"}, {"robin_sign", "robin_sign"}};
    for (const auto& [needle, key] : hints) {
      const std::string msg = err.what();
      if (msg.find(needle) != std::string::npos && entries.count(key)) throw ParseError(entries.at(key).line, msg);
    }
    throw;
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace cloakopt
