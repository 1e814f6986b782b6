#pragma once

#include <numbers>

#include "bowlsim/vec.hpp"

namespace bowlsim {

inline constexpr double kDefaultGravity = 9.81;
inline constexpr double kBallResonanceHz = 1.88;

/// Pendulum length whose small-oscillation frequency sqrt(g/L)/2pi equals
/// `f_res`. Throws DomainError for non-positive frequency or gravity.
double resonant_length(double f_res, double gravity = kDefaultGravity);

/// Inverse of resonant_length.
double resonant_frequency(double length, double gravity = kDefaultGravity);

/// Physical constants of the ball-in-bowl system and its haptic rendering.
///
/// The ball is modelled as two decoupled planar pendulums hanging from the
/// bowl (one per horizontal axis). The bowl is an admittance: a virtual mass
/// with viscous damping driven by the user's force and the ball reaction.
struct SimParams {
  double pendulum_length = kDefaultGravity / ((2.0 * std::numbers::pi * kBallResonanceHz) *
                                              (2.0 * std::numbers::pi * kBallResonanceHz));
  double gravity = kDefaultGravity;
  double ball_mass = 0.5;          // kg
  double angular_damping = 0.3;    // 1/s
  double rim_angle = 1.0;          // rad, fall-out threshold
  double reentry_angle = 0.5;      // rad, back-in threshold
  double virtual_mass = 3.0;       // kg
  double virtual_damping = 10.0;   // N s/m, applied on all three axes
  double table_height = 0.0;       // m
  double table_stiffness = 2000.0; // N/m
  double table_damping = 155.0;    // N s/m, ~critical with virtual_mass
  double contact_tolerance = 0.005;  // m above table_height still counts as resting
  double loading_force = 0.0;      // N, downward, only while lifted
  double physics_dt = 0.001;       // s
  double record_rate = 100.0;      // Hz

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Physics steps per recorded force sample.
  [[nodiscard]] int steps_per_sample() const;

  [[nodiscard]] double resonance_hz() const { return resonant_frequency(pendulum_length, gravity); }

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

struct BallState {
  Vec2 angle;   // rad, deflection about each horizontal axis
  Vec2 rate;    // rad/s
  bool in_bowl = true;

  friend bool operator==(const BallState&, const BallState&) = default;
};

struct BowlState {
  Vec3 position;
  Vec3 velocity;
  bool lifted = false;

  friend bool operator==(const BowlState&, const BowlState&) = default;
};

/// Net user force at the end-effector, sampled at the record rate.
struct ForceSample {
  double t = 0.0;
  Vec3 force;

  friend bool operator==(const ForceSample&, const ForceSample&) = default;
};

/// theta'' = -(g/L) sin(theta) - (a/L) cos(theta) - c * omega, per axis.
Vec2 ball_angular_acceleration(const BallState& ball, Vec2 pivot_accel, const SimParams& params);

/// One RK4 step of the pivot-driven pendulums with the pivot acceleration
/// held constant over the step, followed by the fall-out hysteresis update.
/// Throws SimulationFault on non-finite input or output.
BallState step_ball(const BallState& ball, Vec2 pivot_accel, const SimParams& params, double dt);

/// Horizontal force the ball exerts on the bowl (felt by the hand).
Vec2 ball_reaction_force(const BallState& ball, Vec2 ball_accel, const SimParams& params);

/// Hysteresis rule for the in-bowl indicator.
bool update_in_bowl(bool in_bowl, Vec2 angle, const SimParams& params);

/// Spring-damper acting only below the table surface.
double table_contact_force(double z, double vz, const SimParams& params);

bool is_lifted(double z, const SimParams& params);

/// Semi-implicit Euler step of the bowl admittance. Loading is applied only
/// while the bowl starts the step lifted. Throws SimulationFault on
/// non-finite values.
BowlState step_bowl(const BowlState& bowl, Vec3 user_force, Vec2 ball_force,
                    const SimParams& params, double dt);

/// Mechanical energy of both pendulums, E = sum(1/2 m L^2 w^2 + m g L (1 - cos th)).
double pendulum_energy(const BallState& ball, const SimParams& params);

}  // namespace bowlsim
