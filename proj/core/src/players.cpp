#include "bowlsim/players.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "bowlsim/error.hpp"
#include "bowlsim/seed.hpp"

namespace bowlsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Free small-angle pendulum propagated `horizon` seconds ahead.
BallState predict_ball(const BallState& ball, const SimParams& p, double horizon) {
  const double w0 = std::sqrt(p.gravity / p.pendulum_length);
  const double c = std::cos(w0 * horizon);
  const double s = std::sin(w0 * horizon);
  const double decay = std::exp(-0.5 * p.angular_damping * horizon);
  BallState out = ball;
  out.angle = {decay * (ball.angle.x * c + ball.rate.x / w0 * s), decay * (ball.angle.y * c + ball.rate.y / w0 * s)};
  out.rate = {decay * (ball.rate.x * c - ball.angle.x * w0 * s), decay * (ball.rate.y * c - ball.angle.y * w0 * s)};
  return out;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ResonanceCancel: return "resonance-cancel";
    case Strategy::LowFrequencySwirl: return "low-frequency-swirl";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "resonance-cancel") return Strategy::ResonanceCancel;
  if (s == "low-frequency-swirl") return Strategy::LowFrequencySwirl;
  throw ConfigError(fmt::format("unknown controller strategy '{}'", s));
}

void ControllerParams::validate() const {
  if (!(onset_delay >= 0.0)) throw ConfigError("onset_delay must be >= 0");
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  if (!(load_bandwidth_slope <= 0.0)) throw ConfigError("load_bandwidth_slope must be <= 0");
  if (!(bandwidth + load_bandwidth_slope * 50.0 > 0.0))
    throw ConfigError("bandwidth must stay positive at 50 % loading");
  if (!(max_force > 0.0)) throw ConfigError("max_force must be > 0");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!(motion_lead >= 0.0 && motion_lead <= 1.0)) throw ConfigError("motion_lead must be in [0, 1]");
}

double ControllerParams::effective_bandwidth(LoadLevel load) const {
  return bandwidth + load_bandwidth_slope * percent(load);
}

ControllerParams control_profile() {
  ControllerParams p;
  p.onset_delay = 0.5 * (0.41 + 0.25);
  p.bandwidth = 0.5 * (2.44 + 4.0);
  p.load_bandwidth_slope = 0.0;
  p.strategy = Strategy::ResonanceCancel;
  return p;
}

ControllerParams stroke_profile() {
  ControllerParams p;
  p.onset_delay = 0.5 * (0.81 + 1.17);
  p.bandwidth = 0.5 * (1.23 + 0.85);
  p.load_bandwidth_slope = -0.01;
  p.strategy = Strategy::LowFrequencySwirl;
  p.attract_gain = 10.0;
  p.motion_lead = 0.0;
  p.noise_std = 4.0;
  return p;
}

Vec3 clip_force(Vec3 f, double max_force) {
  const double fz = std::clamp(f.z, -max_force, max_force);
  const double budget = std::sqrt(std::max(0.0, max_force * max_force - fz * fz));
  const double horizontal = std::hypot(f.x, f.y);
  const double scale = horizontal > budget ? budget / horizontal : 1.0;
  return {f.x * scale, f.y * scale, fz};
}

Vec3 plan_force(const Observation& obs, std::optional<Vec2> target, const ControllerParams& cp,
                const PlanInputs& in) {
  const SimParams& p = *in.params;
  const Vec3& pos = obs.bowl.position;
  const Vec3& vel = obs.bowl.velocity;

  Vec3 out;
  const double z_est = pos.z + in.motion_horizon * vel.z;
  out.z = in.loading_force + cp.lift_gain * (p.table_height + cp.lift_height - z_est) - cp.lift_damping * vel.z;
  if (!target) return out;

  const Vec2 here = pos.xy() + in.motion_horizon * vel.xy();
  Vec2 pull = cp.attract_gain * (*target - here);
  const double pull_norm = pull.norm();
  if (pull_norm > cp.attract_limit) pull *= cp.attract_limit / pull_norm;
  Vec2 f = pull - cp.velocity_gain * vel.xy();

  switch (cp.strategy) {
    case Strategy::ResonanceCancel: {
      const BallState ahead = predict_ball(obs.ball, p, in.prediction_horizon);
      const Vec2 alpha = ball_angular_acceleration(ahead, {}, p);
      f += -cp.cancel_gain * ball_reaction_force(ahead, alpha, p) + cp.ball_damping_gain * ahead.rate;
      break;
    }
    case Strategy::LowFrequencySwirl: {
      const double phase = kTwoPi * cp.swirl_frequency * obs.t;
      f += cp.swirl_force * Vec2{std::cos(phase), std::sin(phase)};
      break;
    }
  }
  out.x = f.x;
  out.y = f.y;
  return out;
}

LowPass::LowPass(double cutoff_hz, double dt) : alpha_(1.0 - std::exp(-kTwoPi * cutoff_hz * dt)) {}

Vec3 LowPass::update(Vec3 input) {
  state_ += alpha_ * (input - state_);
  return state_;
}

SyntheticPlayer::SyntheticPlayer(ControllerParams params) : params_(params) { params_.validate(); }

void SyntheticPlayer::begin_trial(const TrialContext& context) {
  context_ = context;
  const SimParams& p = context_.params;
  bandwidth_ = params_.effective_bandwidth(context_.spec.load);

  const auto delay_steps = static_cast<std::size_t>(std::llround(params_.onset_delay / p.physics_dt));
  delay_line_.assign(delay_steps + 1, Observation{});
  head_ = 0;
  filled_ = 0;
  target_index_.reset();

  // Phase lag of the low-pass at the ball resonance, expressed as time.
  const double w0 = std::sqrt(p.gravity / p.pendulum_length);
  const double filter_lag = std::atan(w0 / (kTwoPi * bandwidth_)) / w0;

  inputs_.params = &context_.params;
  inputs_.loading_force = p.loading_force;
  inputs_.prediction_horizon = params_.onset_delay + filter_lag;
  inputs_.motion_horizon = params_.motion_lead * params_.onset_delay;

  filter_ = LowPass(bandwidth_, p.physics_dt);
  rng_.seed(derive_seed(params_.rng_seed, context_.spec.rng_seed));
  noise_.reset();
}

std::optional<Vec2> SyntheticPlayer::choose_target(const Observation& delayed) {
  if (target_index_ && (delayed.remaining_mask & (1u << *target_index_))) return context_.flags[*target_index_];

  target_index_.reset();
  const Vec2 here = delayed.bowl.position.xy() + inputs_.motion_horizon * delayed.bowl.velocity.xy();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < context_.flags.size(); ++i) {
    if (!(delayed.remaining_mask & (1u << i))) continue;
    const double d = (context_.flags[i] - here).squared_norm();
    if (d < best) {
      best = d;
      target_index_ = static_cast<int>(i);
    }
  }
  if (!target_index_) return std::nullopt;
  return context_.flags[*target_index_];
}

Vec3 SyntheticPlayer::command(const Observation& obs) {
  const std::size_t n = delay_line_.size();
  delay_line_[head_] = obs;
  const bool first = filled_ == 0;
  filled_ = std::min(filled_ + 1, n);
  // Until the line is full the oldest entry is the initial observation.
  const Observation& delayed = filled_ < n ? delay_line_[0] : delay_line_[(head_ + 1) % n];
  head_ = (head_ + 1) % n;

  Vec3 raw = plan_force(delayed, choose_target(delayed), params_, inputs_);
  raw.x += params_.noise_std * noise_(rng_);
  raw.y += params_.noise_std * noise_(rng_);

  if (first) filter_.reset(raw);
  return clip_force(filter_.update(raw), params_.max_force);
}

}  // namespace bowlsim
