#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "bowlsim/dynamics.hpp"
#include "bowlsim/players.hpp"
#include "bowlsim/task.hpp"

namespace bowlsim {

struct CohortConfig {
  double jitter = 0.10;  // relative spread of onset delay and bandwidth between subjects
  std::map<std::string, double> max_sabd_force{{"control", 40.0}, {"stroke", 25.0}};
};

struct ServerConfig {
  double snapshot_rate = 60.0;        // Hz
  double coupling_stiffness = 150.0;  // N/m, pointer-to-bowl virtual spring
  double lift_height = 0.04;          // m, z target while the lift toggle is on
  std::string log_dir = "live_logs";
};

/// Everything a session or a cohort run needs. Loaded from an INI file:
///
///   [subject]      id, group, max_sabd_force
///   [protocol]     seed
///   [controller]   profile = control | stroke | human
///   [workspace]    x_min, x_max, y_min, y_max
///   [task]         collection_tolerance, trial_duration
///   [sim]          any SimParams field, or resonance_hz instead of pendulum_length
///   [profile.<name>]  ControllerParams overrides for a named profile
///   [cohort]       jitter, max_sabd.<group>
///   [server]       snapshot_rate, coupling_stiffness, lift_height, log_dir
///   [analysis]     per_trial_spectra
///
/// Unknown sections and keys are rejected.
struct SessionConfig {
  SubjectInfo subject;
  double max_sabd_force = 40.0;
  std::uint64_t protocol_seed = 0;
  std::string controller = "control";
  Workspace workspace;
  TaskConfig task;
  SimParams sim;
  std::map<std::string, ControllerParams> profiles{{"control", control_profile()},
                                                   {"stroke", stroke_profile()}};
  CohortConfig cohort;
  ServerConfig server;
  bool per_trial_spectra = false;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Task settings with this subject's max_sabd_force applied.
  [[nodiscard]] TaskConfig task_for_subject() const;

  /// Profile by name; throws ConfigError if unknown.
  [[nodiscard]] const ControllerParams& profile(std::string_view name) const;
};

SessionConfig parse_config(std::string_view ini_text);
SessionConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const SessionConfig& config);
nlohmann::json to_json(const ControllerParams& params);
nlohmann::json to_json(const SimParams& params);
SimParams sim_params_from_json(const nlohmann::json& j);

}  // namespace bowlsim
