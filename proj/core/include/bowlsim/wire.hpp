#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bowlsim/error.hpp"
#include "bowlsim/task.hpp"

namespace bowlsim {

inline constexpr int kWireVersion = 1;

/// Rejected client message. `code` is one of: malformed, bad_version,
/// unknown_type, not_joined, session_full, trial_running, protocol_complete.
class WireError : public Error {
 public:
  WireError(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  std::string code_;
};

enum class InputMode { Force, Pointer };

struct InputCommand {
  InputMode mode = InputMode::Pointer;
  Vec3 force;    // Force mode: applied directly, N
  Vec2 pointer;  // Pointer mode: bowl target in table coordinates, m
  bool lift = false;

  friend bool operator==(const InputCommand&, const InputCommand&) = default;
};

enum class ClientMessageType { Join, Input, StartTrial, Rest };

struct ClientMessage {
  ClientMessageType type = ClientMessageType::Join;
  std::string subject;  // Join, optional
  InputCommand input;   // Input
};

/// Parses one text frame. Throws WireError (malformed, bad_version,
/// unknown_type) on anything that does not match the catalogue.
ClientMessage parse_client_message(std::string_view text);

std::string encode_client_message(const ClientMessage& message);

struct Snapshot {
  std::uint64_t seq = 0;
  double t = 0.0;
  bool running = false;
  int trial_index = 0;  // 0 before the first trial
  int set_index = 0;
  int trials_total = kTrialsPerProtocol;
  Vec3 bowl;
  bool lifted = false;
  Vec2 ball_angle;
  bool in_bowl = true;
  std::vector<Flag> remaining;
  bool eligible = false;
  int collected = 0;
  double time_remaining = 0.0;
  double task_time = 0.0;
};

struct TrialSummary {
  int trial_index = 0;
  int set_index = 0;
  bool valid = true;
  std::string invalid_reason;
  int collected = 0;
  double task_time = 0.0;
  std::optional<double> time_per_target;
  std::string log_file;
};

struct Welcome {
  std::string session;
  std::string subject;
  double snapshot_rate = 60.0;
  double physics_dt = 0.001;
  Workspace workspace;
  double collection_tolerance = 0.015;
  int trials_total = kTrialsPerProtocol;
  int next_trial = 1;
};

std::string encode_welcome(const Welcome& w);
std::string encode_snapshot(const Snapshot& s);
std::string encode_trial_complete(const TrialSummary& s);
std::string encode_error(std::string_view code, std::string_view message);

}  // namespace bowlsim
