#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "bowlsim/simulation.hpp"

namespace bowlsim {

enum class Strategy { ResonanceCancel, LowFrequencySwirl };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);  // throws ConfigError

/// Closed-loop participant model: PD attraction to the nearest flag plus a
/// strategy-specific ball term, seen through a pure dead time, smoothed by a
/// first-order low-pass at the (load dependent) bandwidth and clipped.
struct ControllerParams {
  double onset_delay = 0.33;           // s
  double bandwidth = 3.2;              // Hz at 0 % load
  double max_force = 40.0;             // N
  Strategy strategy = Strategy::ResonanceCancel;
  double load_bandwidth_slope = 0.0;   // Hz per % load, <= 0
  double noise_std = 1.0;              // N, white at the physics rate before filtering
  std::uint64_t rng_seed = 0;

  // Attraction toward the target flag.
  double attract_gain = 40.0;          // N/m
  double attract_limit = 4.0;          // N, saturation of the proportional term
  double velocity_gain = 0.0;          // N s/m
  double motion_lead = 1.0;            // fraction of the delay bridged by extrapolating own motion

  // Ball handling.
  double ball_damping_gain = 0.6;      // N per rad/s of predicted ball rate
  double cancel_gain = 0.5;            // fraction of predicted ball reaction cancelled
  double swirl_force = 1.5;            // N
  double swirl_frequency = 0.3;        // Hz

  // Vertical support.
  double lift_height = 0.04;           // m above the table
  double lift_gain = 8.0;              // N/m
  double lift_damping = 4.0;           // N s/m

  void validate() const;  // throws ConfigError

  /// bandwidth + slope * load%.
  [[nodiscard]] double effective_bandwidth(LoadLevel load) const;

  friend bool operator==(const ControllerParams&, const ControllerParams&) = default;
};

/// Able-bodied profile: mean tricep/bicep onset (0.41 s, 0.25 s) and the
/// corresponding reaction frequencies (2.44 Hz, 4 Hz).
ControllerParams control_profile();

/// Post-stroke profile: mean onset (0.81 s, 1.17 s), reaction frequencies
/// (1.23 Hz, 0.85 Hz), bandwidth shrinking 0.01 Hz per % of loading. The
/// attraction is softer and does not extrapolate own motion, which keeps the
/// loop stable with a one-second dead time; motor noise is higher.
ControllerParams stroke_profile();

/// Per-trial facts plan_force needs besides the (delayed) observation.
struct PlanInputs {
  const SimParams* params = nullptr;
  double loading_force = 0.0;
  double prediction_horizon = 0.0;  // s, how far ahead the ball model is extrapolated
  double motion_horizon = 0.0;      // s, how far ahead own bowl motion is extrapolated
};

/// Raw (pre-filter) force command computed from one observation. `target`
/// is the flag being approached; with no target only the vertical support
/// term is produced.
Vec3 plan_force(const Observation& obs, std::optional<Vec2> target, const ControllerParams& params,
                const PlanInputs& inputs);

/// Clips |f| to max_force, keeping as much of the vertical component as
/// possible (the arm is held up first).
Vec3 clip_force(Vec3 f, double max_force);

/// First-order low-pass, discretised exactly for a zero-order-hold input.
class LowPass {
 public:
  LowPass() = default;
  LowPass(double cutoff_hz, double dt);

  Vec3 update(Vec3 input);
  void reset(Vec3 value) { state_ = value; }
  [[nodiscard]] double alpha() const { return alpha_; }

 private:
  double alpha_ = 1.0;
  Vec3 state_;
};

/// ForceSource implementation of ControllerParams.
class SyntheticPlayer final : public ForceSource {
 public:
  explicit SyntheticPlayer(ControllerParams params);

  void begin_trial(const TrialContext& context) override;
  Vec3 command(const Observation& obs) override;

  [[nodiscard]] const ControllerParams& params() const { return params_; }
  [[nodiscard]] double effective_bandwidth() const { return bandwidth_; }

 private:
  std::optional<Vec2> choose_target(const Observation& delayed);

  ControllerParams params_;
  TrialContext context_;
  PlanInputs inputs_;
  std::vector<Observation> delay_line_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  std::optional<int> target_index_;
  LowPass filter_;
  double bandwidth_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

}  // namespace bowlsim
