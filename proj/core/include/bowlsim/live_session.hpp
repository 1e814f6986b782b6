#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "bowlsim/config.hpp"
#include "bowlsim/log_io.hpp"
#include "bowlsim/simulation.hpp"
#include "bowlsim/wire.hpp"

namespace bowlsim {

/// Force the server applies for a client input. Pointer targets are tracked
/// by a spring of `stiffness` whose damper, together with the bowl's own
/// viscous damping, makes the coupling critically damped. The lift toggle
/// moves the z target between the table and lift_height above it and adds
/// a feed-forward of the current loading force.
Vec3 coupling_force(const InputCommand& input, const BowlState& bowl, const SimParams& params,
                    const ServerConfig& server);

/// One player, one protocol, driven either by a real-time thread (serve) or
/// by explicit advance() calls (tests, replay). Transport-agnostic: frames
/// arrive through handle() and leave through the connected client's sink.
///
/// All public members are thread-safe. Sinks are invoked with the session
/// lock held (so messages leave in sequence order) and must not call back
/// into the session.
class LiveSession {
 public:
  using ClientId = std::uint64_t;
  using Sink = std::function<void(const std::string&)>;

  explicit LiveSession(SessionConfig config, std::string session_id = "live");
  ~LiveSession();

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  /// Claims the single player slot. A second client gets a session_full
  /// error through its sink and false.
  bool connect(ClientId id, Sink sink);

  /// Frees the slot; a trial in progress is ended and logged as invalid.
  void disconnect(ClientId id);

  /// Processes one text frame. Rejected frames produce an error message to
  /// the sender and leave the session unchanged.
  void handle(ClientId id, std::string_view frame);

  /// Steps the session clock (and the running trial) by `steps` physics
  /// steps, emitting snapshots at the configured rate.
  void advance(std::int64_t steps);

  /// Starts / stops the real-time stepping thread.
  void start_realtime();
  void stop_realtime();

  struct Timing {
    double sim_time = 0.0;   // s of simulated session time since start_realtime
    double wall_time = 0.0;  // s of wall time over the same interval
    std::int64_t dropped_steps = 0;
  };
  [[nodiscard]] Timing timing() const;

  [[nodiscard]] bool trial_running() const;
  [[nodiscard]] int trials_completed() const;
  [[nodiscard]] std::optional<TrialLog> last_log() const;
  [[nodiscard]] const Protocol& protocol() const { return protocol_; }

 private:
  void send_locked(std::string message);
  void flush(std::vector<std::string>& out, const Sink& sink);
  void step_locked();
  Snapshot snapshot_locked();
  void finish_trial_locked();
  void start_trial_locked();
  void realtime_loop();

  SessionConfig config_;
  std::string session_id_;
  Protocol protocol_;
  std::filesystem::path log_dir_;
  Manifest manifest_;

  mutable std::mutex mutex_;
  std::optional<ClientId> client_;
  Sink sink_;
  bool joined_ = false;
  std::vector<std::string> outbox_;

  std::unique_ptr<TrialRunner> runner_;
  InputCommand input_;
  std::size_t next_trial_ = 0;
  int completed_ = 0;
  std::optional<TrialLog> last_log_;

  std::int64_t clock_steps_ = 0;
  std::uint64_t seq_ = 0;

  std::thread thread_;
  std::atomic<bool> running_{false};
  Timing timing_;
};

}  // namespace bowlsim
