#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bowlsim/dynamics.hpp"
#include "bowlsim/vec.hpp"

namespace bowlsim {

inline constexpr int kFlagsPerDistribution = 20;
inline constexpr int kSetsPerProtocol = 9;
inline constexpr int kTrialsPerSet = 5;
inline constexpr int kTrialsPerProtocol = kSetsPerProtocol * kTrialsPerSet;
inline constexpr double kTrialDuration = 20.0;

/// Distribution A is the training layout; B..F are used for data collection.
enum class DistributionId : char { A = 'A', B = 'B', C = 'C', D = 'D', E = 'E', F = 'F' };

inline constexpr std::array<DistributionId, 5> kCollectionDistributions{
    DistributionId::B, DistributionId::C, DistributionId::D, DistributionId::E, DistributionId::F};

char to_char(DistributionId id);
DistributionId distribution_from_char(char c);  // throws ConfigError

/// Shoulder-abduction loading as a percentage of the subject's maximum force.
enum class LoadLevel : int { Zero = 0, Twenty = 20, Fifty = 50 };

inline constexpr std::array<LoadLevel, 3> kLoadLevels{LoadLevel::Zero, LoadLevel::Twenty, LoadLevel::Fifty};

constexpr int percent(LoadLevel l) { return static_cast<int>(l); }
LoadLevel load_from_percent(int pct);  // throws ConfigError

/// Conservative reachable rectangle in table coordinates (meters).
struct Workspace {
  double x_min = -0.16;
  double x_max = 0.16;
  double y_min = -0.20;
  double y_max = 0.20;

  void validate() const;
  [[nodiscard]] Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  [[nodiscard]] double width() const { return x_max - x_min; }
  [[nodiscard]] double height() const { return y_max - y_min; }

  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct FlagDistribution {
  DistributionId id = DistributionId::A;
  std::array<Vec2, kFlagsPerDistribution> points{};  // normalized, inside [0,1]^2

  [[nodiscard]] bool is_training() const { return id == DistributionId::A; }
};

/// The six built-in layouts: A grid (training), B ring, C two clusters,
/// D diagonal band, E diagonal cross, F low-discrepancy scatter. These are
/// fixed constants.
const std::array<FlagDistribution, 6>& builtin_distributions();
const FlagDistribution& builtin_distribution(DistributionId id);

double min_pairwise_distance(std::span<const Vec2> points);

/// Uniformly scales the unit square into the workspace (limited by its short
/// side) and centres it. Throws ConfigError if the scaled flags end up closer
/// than twice the collection tolerance.
std::vector<Vec2> scale_distribution(const FlagDistribution& dist, const Workspace& ws,
                                     double collection_tolerance);

struct TaskConfig {
  double collection_tolerance = 0.015;  // m
  double trial_duration = kTrialDuration;
  double max_sabd_force = 40.0;  // N, per subject

  void validate() const;
  [[nodiscard]] double loading_force(LoadLevel level) const {
    return max_sabd_force * percent(level) / 100.0;
  }
};

struct TrialSpec {
  DistributionId distribution = DistributionId::B;
  LoadLevel load = LoadLevel::Zero;
  int set_index = 1;    // 1..9
  int trial_index = 1;  // 1..45
  std::uint64_t rng_seed = 0;

  friend bool operator==(const TrialSpec&, const TrialSpec&) = default;
};

struct Flag {
  int index = 0;  // position in the source distribution
  Vec2 position;

  friend bool operator==(const Flag&, const Flag&) = default;
};

struct TrialState {
  std::vector<Flag> remaining;
  int collected_count = 0;
  double task_time = 0.0;
  double wall_time = 0.0;
  bool eligible = false;

  [[nodiscard]] bool all_collected() const { return remaining.empty(); }
  friend bool operator==(const TrialState&, const TrialState&) = default;
};

TrialState initial_trial_state(std::span<const Vec2> scaled_flags);

/// Applies the three collection criteria: ball in bowl, bowl lifted, and the
/// bowl's xy within `tolerance` of a flag. Updates `eligible` and removes
/// every flag that is collected; returns the indices collected this call.
std::vector<int> check_collection(TrialState& state, const BowlState& bowl, const BallState& ball,
                                  double tolerance);

/// Adds dt to task-time iff the bowl is lifted and flags remain.
void accrue_task_time(TrialState& state, const BowlState& bowl, double dt);

struct Protocol {
  std::uint64_t seed = 0;
  std::vector<TrialSpec> trials;  // 45 entries, set-major

  [[nodiscard]] LoadLevel set_load(int set_index) const;
};

/// Randomised session: the 9 set loads are a shuffle of {0,0,0,20,20,20,50,50,50}
/// and each set is a shuffle of B..F. Deterministic in `seed`.
Protocol generate_protocol(std::uint64_t seed);

/// Throws ConfigError if the protocol breaks a counting invariant.
void validate_protocol(const Protocol& protocol);

enum class EventType { Collect, Lift, Rest, FallOut, Reentry };

std::string_view to_string(EventType type);
EventType event_type_from_string(std::string_view s);  // throws ConfigError

struct TaskEvent {
  double t = 0.0;
  EventType type = EventType::Collect;
  int flag_index = -1;  // only for Collect

  friend bool operator==(const TaskEvent&, const TaskEvent&) = default;
};

struct SubjectInfo {
  std::string id = "S00";
  std::string group = "control";

  friend bool operator==(const SubjectInfo&, const SubjectInfo&) = default;
};

/// Everything recorded for one attempt.
struct TrialLog {
  SubjectInfo subject;
  TrialSpec spec;
  SimParams params;
  double collection_tolerance = 0.0;
  std::vector<Vec2> flags;  // scaled flag layout at trial start
  std::vector<ForceSample> trace;
  std::vector<TaskEvent> events;
  TrialState final_state;
  double duration = 0.0;
  bool valid = true;
  std::string invalid_reason;

  friend bool operator==(const TrialLog&, const TrialLog&) = default;
};

}  // namespace bowlsim
