#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bowlsim/dynamics.hpp"
#include "bowlsim/task.hpp"

namespace bowlsim {

/// What a force source can see at the start of a physics step.
struct Observation {
  double t = 0.0;
  BowlState bowl;
  BallState ball;
  Vec2 ball_force;                 // haptic force currently rendered to the hand
  std::uint32_t remaining_mask = 0;  // bit i set while flag i is on the table
  bool eligible = false;
};

/// Fixed per-trial facts handed to a force source before the first step.
struct TrialContext {
  TrialSpec spec;
  SimParams params;  // loading_force already resolved for this trial
  std::vector<Vec2> flags;
  Workspace workspace;
};

/// Anything that produces a user force each physics step: synthetic players,
/// scripted inputs, or a live human via the session server.
class ForceSource {
 public:
  virtual ~ForceSource() = default;
  virtual void begin_trial(const TrialContext& context) = 0;
  virtual Vec3 command(const Observation& obs) = 0;
};

/// Zero force every step.
class NullSource final : public ForceSource {
 public:
  void begin_trial(const TrialContext&) override {}
  Vec3 command(const Observation&) override { return {}; }
};

/// Steps one trial at physics_dt and records everything the log needs.
///
/// Each step renders the ball reaction from the previous step, advances the
/// bowl, feeds its horizontal acceleration to the ball, then applies the
/// task-time and collection rules. A SimulationFault ends the trial and marks
/// the log invalid.
class TrialRunner {
 public:
  TrialRunner(SubjectInfo subject, const TrialSpec& spec, SimParams params, const TaskConfig& task,
              const Workspace& workspace);

  [[nodiscard]] Observation observe() const;
  [[nodiscard]] const TrialContext& context() const { return context_; }

  void step(Vec3 user_force);
  void abort(std::string reason);

  [[nodiscard]] bool finished() const { return finished_; }
  [[nodiscard]] double time() const { return static_cast<double>(steps_) * params_.physics_dt; }
  [[nodiscard]] double time_remaining() const;
  [[nodiscard]] const BowlState& bowl() const { return bowl_; }
  [[nodiscard]] const BallState& ball() const { return ball_; }
  [[nodiscard]] const TrialState& state() const { return state_; }
  [[nodiscard]] const TrialLog& log() const { return log_; }

  /// Moves the completed log out; call once finished().
  TrialLog take_log();

 private:
  void push_event(EventType type, int flag_index = -1);

  SimParams params_;
  TaskConfig task_;
  TrialContext context_;
  BowlState bowl_;
  BallState ball_;
  Vec2 ball_force_;
  TrialState state_;
  TrialLog log_;
  std::int64_t steps_ = 0;
  std::int64_t max_steps_ = 0;
  int steps_per_sample_ = 1;
  bool finished_ = false;
};

/// Runs a complete trial with `source` supplying the force every step.
TrialLog run_trial(const SubjectInfo& subject, const TrialSpec& spec, ForceSource& source,
                   const SimParams& params, const TaskConfig& task, const Workspace& workspace);

std::uint32_t remaining_mask(const TrialState& state);

}  // namespace bowlsim
