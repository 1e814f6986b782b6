#include "bowlsim/simulation.hpp"

#include <cmath>
#include <utility>

#include "bowlsim/error.hpp"

namespace bowlsim {

std::uint32_t remaining_mask(const TrialState& state) {
  std::uint32_t mask = 0;
  for (const Flag& f : state.remaining) mask |= (1u << f.index);
  return mask;
}

TrialRunner::TrialRunner(SubjectInfo subject, const TrialSpec& spec, SimParams params, const TaskConfig& task,
                         const Workspace& workspace)
    : params_(params), task_(task) {
  task_.validate();
  params_.loading_force = task_.loading_force(spec.load);
  params_.validate();

  context_.spec = spec;
  context_.params = params_;
  context_.workspace = workspace;
  context_.flags = scale_distribution(builtin_distribution(spec.distribution), workspace, task_.collection_tolerance);

  const Vec2 home = workspace.center();
  bowl_.position = {home.x, home.y, params_.table_height};
  bowl_.lifted = is_lifted(bowl_.position.z, params_);
  state_ = initial_trial_state(context_.flags);

  steps_per_sample_ = params_.steps_per_sample();
  max_steps_ = std::llround(task_.trial_duration / params_.physics_dt);

  log_.subject = std::move(subject);
  log_.spec = spec;
  log_.params = params_;
  log_.collection_tolerance = task_.collection_tolerance;
  log_.flags = context_.flags;
  log_.trace.reserve(static_cast<std::size_t>(max_steps_ / steps_per_sample_ + 1));
}

Observation TrialRunner::observe() const {
  Observation obs;
  obs.t = time();
  obs.bowl = bowl_;
  obs.ball = ball_;
  obs.ball_force = ball_force_;
  obs.remaining_mask = remaining_mask(state_);
  obs.eligible = state_.eligible;
  return obs;
}

double TrialRunner::time_remaining() const {
  return static_cast<double>(max_steps_ - steps_) * params_.physics_dt;
}

void TrialRunner::push_event(EventType type, int flag_index) {
  log_.events.push_back({time(), type, flag_index});
}

void TrialRunner::step(Vec3 user_force) {
  if (finished_) return;

  if (steps_ % steps_per_sample_ == 0) {
    const double t = static_cast<double>(steps_ / steps_per_sample_) / params_.record_rate;
    log_.trace.push_back({t, user_force});
  }

  const double dt = params_.physics_dt;
  try {
    const BowlState next_bowl = step_bowl(bowl_, user_force, ball_force_, params_, dt);
    const Vec2 accel = (next_bowl.velocity.xy() - bowl_.velocity.xy()) * (1.0 / dt);
    const BallState next_ball = step_ball(ball_, accel, params_, dt);
    ball_force_ = ball_reaction_force(next_ball, ball_angular_acceleration(next_ball, accel, params_), params_);

    ++steps_;
    state_.wall_time = time();

    if (next_bowl.lifted != bowl_.lifted) push_event(next_bowl.lifted ? EventType::Lift : EventType::Rest);
    if (next_ball.in_bowl != ball_.in_bowl) push_event(next_ball.in_bowl ? EventType::Reentry : EventType::FallOut);
    bowl_ = next_bowl;
    ball_ = next_ball;

    accrue_task_time(state_, bowl_, dt);
    for (int index : check_collection(state_, bowl_, ball_, task_.collection_tolerance))
      push_event(EventType::Collect, index);
  } catch (const SimulationFault& fault) {
    abort(fault.what());
    return;
  }

  if (state_.all_collected() || steps_ >= max_steps_) {
    finished_ = true;
    log_.final_state = state_;
    log_.duration = time();
  }
}

void TrialRunner::abort(std::string reason) {
  if (finished_ && !log_.valid) return;
  finished_ = true;
  log_.valid = false;
  log_.invalid_reason = std::move(reason);
  log_.final_state = state_;
  log_.duration = time();
}

TrialLog TrialRunner::take_log() {
  if (!finished_) abort("trial not finished");
  return std::move(log_);
}

TrialLog run_trial(const SubjectInfo& subject, const TrialSpec& spec, ForceSource& source,
                   const SimParams& params, const TaskConfig& task, const Workspace& workspace) {
  TrialRunner runner(subject, spec, params, task, workspace);
  source.begin_trial(runner.context());
  while (!runner.finished()) runner.step(source.command(runner.observe()));
  return runner.take_log();
}

}  // namespace bowlsim
