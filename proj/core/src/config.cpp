#include "bowlsim/config.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "bowlsim/error.hpp"

namespace bowlsim {

namespace {

namespace pt = boost::property_tree;

template <typename T>
using Field = std::pair<const char*, double T::*>;

constexpr std::array<Field<SimParams>, 15> kSimFields{{
    {"pendulum_length", &SimParams::pendulum_length},
    {"gravity", &SimParams::gravity},
    {"ball_mass", &SimParams::ball_mass},
    {"angular_damping", &SimParams::angular_damping},
    {"rim_angle", &SimParams::rim_angle},
    {"reentry_angle", &SimParams::reentry_angle},
    {"virtual_mass", &SimParams::virtual_mass},
    {"virtual_damping", &SimParams::virtual_damping},
    {"table_height", &SimParams::table_height},
    {"table_stiffness", &SimParams::table_stiffness},
    {"table_damping", &SimParams::table_damping},
    {"contact_tolerance", &SimParams::contact_tolerance},
    {"loading_force", &SimParams::loading_force},
    {"physics_dt", &SimParams::physics_dt},
    {"record_rate", &SimParams::record_rate},
}};

constexpr std::array<Field<ControllerParams>, 16> kControllerFields{{
    {"onset_delay", &ControllerParams::onset_delay},
    {"bandwidth", &ControllerParams::bandwidth},
    {"max_force", &ControllerParams::max_force},
    {"load_bandwidth_slope", &ControllerParams::load_bandwidth_slope},
    {"noise_std", &ControllerParams::noise_std},
    {"attract_gain", &ControllerParams::attract_gain},
    {"attract_limit", &ControllerParams::attract_limit},
    {"velocity_gain", &ControllerParams::velocity_gain},
    {"motion_lead", &ControllerParams::motion_lead},
    {"ball_damping_gain", &ControllerParams::ball_damping_gain},
    {"cancel_gain", &ControllerParams::cancel_gain},
    {"swirl_force", &ControllerParams::swirl_force},
    {"swirl_frequency", &ControllerParams::swirl_frequency},
    {"lift_height", &ControllerParams::lift_height},
    {"lift_gain", &ControllerParams::lift_gain},
    {"lift_damping", &ControllerParams::lift_damping},
}};

double to_double(const std::string& section, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("[{}] {}: '{}' is not a number", section, key, text));
  }
}

std::uint64_t to_u64(const std::string& section, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("[{}] {}: '{}' is not an unsigned integer", section, key, text));
  }
}

bool to_bool(const std::string& section, const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(fmt::format("[{}] {}: '{}' is not a boolean", section, key, text));
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
  throw ConfigError(fmt::format("unknown key '{}' in section [{}]", key, section));
}

template <typename T, std::size_t N>
bool set_field(T& target, const std::array<Field<T>, N>& fields, const std::string& section, const std::string& key,
               const std::string& value) {
  for (const auto& [name, member] : fields) {
    if (key == name) {
      target.*member = to_double(section, key, value);
      return true;
    }
  }
  return false;
}

void apply_profile(ControllerParams& cp, const std::string& section, const pt::ptree& tree) {
  for (const auto& [key, node] : tree) {
    const std::string value = node.get_value<std::string>();
    if (key == "strategy") {
      cp.strategy = strategy_from_string(value);
    } else if (key == "rng_seed") {
      cp.rng_seed = to_u64(section, key, value);
    } else if (key == "base") {
      // handled by the caller
    } else if (!set_field(cp, kControllerFields, section, key, value)) {
      unknown_key(section, key);
    }
  }
}

void apply_section(SessionConfig& c, const std::string& section, const pt::ptree& tree) {
  if (section.rfind("profile.", 0) == 0) {
    const std::string name = section.substr(8);
    if (name.empty() || name == "human") throw ConfigError(fmt::format("invalid profile section [{}]", section));
    ControllerParams base;
    if (const auto from = tree.get_optional<std::string>("base")) {
      base = c.profile(*from);
    } else if (auto it = c.profiles.find(name); it != c.profiles.end()) {
      base = it->second;
    }
    apply_profile(base, section, tree);
    c.profiles[name] = base;
    return;
  }

  for (const auto& [key, node] : tree) {
    const std::string value = node.get_value<std::string>();
    if (section == "subject") {
      if (key == "id") c.subject.id = value;
      else if (key == "group") c.subject.group = value;
      else if (key == "max_sabd_force") c.max_sabd_force = to_double(section, key, value);
      else unknown_key(section, key);
    } else if (section == "protocol") {
      if (key == "seed") c.protocol_seed = to_u64(section, key, value);
      else unknown_key(section, key);
    } else if (section == "controller") {
      if (key == "profile") c.controller = value;
      else unknown_key(section, key);
    } else if (section == "workspace") {
      if (key == "x_min") c.workspace.x_min = to_double(section, key, value);
      else if (key == "x_max") c.workspace.x_max = to_double(section, key, value);
      else if (key == "y_min") c.workspace.y_min = to_double(section, key, value);
      else if (key == "y_max") c.workspace.y_max = to_double(section, key, value);
      else unknown_key(section, key);
    } else if (section == "task") {
      if (key == "collection_tolerance") c.task.collection_tolerance = to_double(section, key, value);
      else if (key == "trial_duration") c.task.trial_duration = to_double(section, key, value);
      else unknown_key(section, key);
    } else if (section == "sim") {
      if (key == "resonance_hz") c.sim.pendulum_length = resonant_length(to_double(section, key, value), c.sim.gravity);
      else if (!set_field(c.sim, kSimFields, section, key, value)) unknown_key(section, key);
    } else if (section == "cohort") {
      if (key == "jitter") c.cohort.jitter = to_double(section, key, value);
      else if (key.rfind("max_sabd.", 0) == 0 && key.size() > 9) c.cohort.max_sabd_force[key.substr(9)] = to_double(section, key, value);
      else unknown_key(section, key);
    } else if (section == "server") {
      if (key == "snapshot_rate") c.server.snapshot_rate = to_double(section, key, value);
      else if (key == "coupling_stiffness") c.server.coupling_stiffness = to_double(section, key, value);
      else if (key == "lift_height") c.server.lift_height = to_double(section, key, value);
      else if (key == "log_dir") c.server.log_dir = value;
      else unknown_key(section, key);
    } else if (section == "analysis") {
      if (key == "per_trial_spectra") c.per_trial_spectra = to_bool(section, key, value);
      else unknown_key(section, key);
    } else {
      throw ConfigError(fmt::format("unknown section [{}]", section));
    }
  }
}

}  // namespace

void SessionConfig::validate() const {
  if (subject.id.empty()) throw ConfigError("subject id must not be empty");
  if (subject.group.empty()) throw ConfigError("subject group must not be empty");
  if (!(max_sabd_force > 0.0)) throw ConfigError("max_sabd_force must be > 0");
  if (controller != "human") (void)profile(controller);
  workspace.validate();
  task_for_subject().validate();
  sim.validate();
  for (const auto& [name, p] : profiles) {
    try {
      p.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("profile {}: {}", name, e.what()));
    }
  }
  if (!(cohort.jitter >= 0.0 && cohort.jitter < 0.5)) throw ConfigError("cohort jitter must be in [0, 0.5)");
  for (const auto& [group, force] : cohort.max_sabd_force) {
    if (!(force > 0.0)) throw ConfigError(fmt::format("cohort max_sabd.{} must be > 0", group));
  }
  if (!(server.snapshot_rate > 0.0 && server.snapshot_rate <= 1.0 / sim.physics_dt))
    throw ConfigError("snapshot_rate must be in (0, physics rate]");
  if (!(server.coupling_stiffness > 0.0)) throw ConfigError("coupling_stiffness must be > 0");
  if (!(server.lift_height > 0.0)) throw ConfigError("lift_height must be > 0");
  // The flag layouts must fit the workspace at this tolerance.
  for (const FlagDistribution& d : builtin_distributions()) (void)scale_distribution(d, workspace, task.collection_tolerance);
}

TaskConfig SessionConfig::task_for_subject() const {
  TaskConfig t = task;
  t.max_sabd_force = max_sabd_force;
  return t;
}

const ControllerParams& SessionConfig::profile(std::string_view name) const {
  auto it = profiles.find(std::string(name));
  if (it == profiles.end()) throw ConfigError(fmt::format("unknown controller profile '{}'", name));
  return it->second;
}

SessionConfig parse_config(std::string_view ini_text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  SessionConfig c;
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw ConfigError(fmt::format("key '{}' outside of any section", section));
    apply_section(c, section, node);
  }
  c.validate();
  return c;
}

SessionConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

nlohmann::json to_json(const SimParams& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, member] : kSimFields) j[name] = params.*member;
  return j;
}

SimParams sim_params_from_json(const nlohmann::json& j) {
  SimParams p;
  for (const auto& [name, member] : kSimFields) p.*member = j.at(name).get<double>();
  return p;
}

nlohmann::json to_json(const ControllerParams& params) {
  nlohmann::json j = nlohmann::json::object();
  j["strategy"] = std::string(to_string(params.strategy));
  j["rng_seed"] = params.rng_seed;
  for (const auto& [name, member] : kControllerFields) j[name] = params.*member;
  return j;
}

nlohmann::json to_json(const SessionConfig& c) {
  nlohmann::json j;
  j["subject"] = {{"id", c.subject.id}, {"group", c.subject.group}, {"max_sabd_force", c.max_sabd_force}};
  j["protocol_seed"] = c.protocol_seed;
  j["controller"] = c.controller;
  j["workspace"] = {{"x_min", c.workspace.x_min}, {"x_max", c.workspace.x_max},
                    {"y_min", c.workspace.y_min}, {"y_max", c.workspace.y_max}};
  j["task"] = {{"collection_tolerance", c.task.collection_tolerance}, {"trial_duration", c.task.trial_duration}};
  j["sim"] = to_json(c.sim);
  j["profiles"] = nlohmann::json::object();
  for (const auto& [name, p] : c.profiles) j["profiles"][name] = to_json(p);
  j["cohort"] = {{"jitter", c.cohort.jitter}, {"max_sabd_force", c.cohort.max_sabd_force}};
  j["server"] = {{"snapshot_rate", c.server.snapshot_rate},
                 {"coupling_stiffness", c.server.coupling_stiffness},
                 {"lift_height", c.server.lift_height},
                 {"log_dir", c.server.log_dir}};
  j["per_trial_spectra"] = c.per_trial_spectra;
  return j;
}

}  // namespace bowlsim
