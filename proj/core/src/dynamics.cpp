#include "bowlsim/dynamics.hpp"

#include <cmath>
#include <string>

#include "bowlsim/error.hpp"

namespace bowlsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct AxisState {
  double angle;
  double rate;
};

// Derivative of (theta, omega) for one axis.
AxisState axis_derivative(AxisState s, double accel, double g_over_l, double inv_l, double damping) {
  return {s.rate, -g_over_l * std::sin(s.angle) - accel * inv_l * std::cos(s.angle) - damping * s.rate};
}

AxisState rk4_axis(AxisState s, double accel, const SimParams& p, double dt) {
  const double g_over_l = p.gravity / p.pendulum_length;
  const double inv_l = 1.0 / p.pendulum_length;
  const double c = p.angular_damping;

  const AxisState k1 = axis_derivative(s, accel, g_over_l, inv_l, c);
  const AxisState k2 = axis_derivative({s.angle + 0.5 * dt * k1.angle, s.rate + 0.5 * dt * k1.rate},
                                       accel, g_over_l, inv_l, c);
  const AxisState k3 = axis_derivative({s.angle + 0.5 * dt * k2.angle, s.rate + 0.5 * dt * k2.rate},
                                       accel, g_over_l, inv_l, c);
  const AxisState k4 =
      axis_derivative({s.angle + dt * k3.angle, s.rate + dt * k3.rate}, accel, g_over_l, inv_l, c);

  return {s.angle + dt / 6.0 * (k1.angle + 2.0 * k2.angle + 2.0 * k3.angle + k4.angle),
          s.rate + dt / 6.0 * (k1.rate + 2.0 * k2.rate + 2.0 * k3.rate + k4.rate)};
}

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("invalid SimParams: ") + what);
}

}  // namespace

double resonant_length(double f_res, double gravity) {
  if (!(f_res > 0.0) || !std::isfinite(f_res)) throw DomainError("resonant frequency must be positive");
  if (!(gravity > 0.0) || !std::isfinite(gravity)) throw DomainError("gravity must be positive");
  const double w = kTwoPi * f_res;
  return gravity / (w * w);
}

double resonant_frequency(double length, double gravity) {
  if (!(length > 0.0) || !std::isfinite(length)) throw DomainError("pendulum length must be positive");
  if (!(gravity > 0.0) || !std::isfinite(gravity)) throw DomainError("gravity must be positive");
  return std::sqrt(gravity / length) / kTwoPi;
}

void SimParams::validate() const {
  require(pendulum_length > 0.0, "pendulum_length must be > 0");
  require(gravity > 0.0, "gravity must be > 0");
  require(ball_mass > 0.0, "ball_mass must be > 0");
  require(virtual_mass > 0.0, "virtual_mass must be > 0");
  require(angular_damping >= 0.0, "angular_damping must be >= 0");
  require(virtual_damping >= 0.0, "virtual_damping must be >= 0");
  require(table_stiffness >= 0.0 && table_damping >= 0.0, "table stiffness/damping must be >= 0");
  require(contact_tolerance >= 0.0, "contact_tolerance must be >= 0");
  require(loading_force >= 0.0, "loading_force must be >= 0");
  require(reentry_angle > 0.0 && reentry_angle < rim_angle && rim_angle < std::numbers::pi / 2,
          "need 0 < reentry_angle < rim_angle < pi/2");
  require(physics_dt > 0.0 && physics_dt <= 0.001 + 1e-15, "physics_dt must be in (0, 1 ms]");
  require(record_rate > 0.0, "record_rate must be > 0");
  const double ratio = 1.0 / (physics_dt * record_rate);
  require(ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) < 1e-9,
          "record_rate must divide 1/physics_dt evenly");
}

int SimParams::steps_per_sample() const {
  return static_cast<int>(std::lround(1.0 / (physics_dt * record_rate)));
}

Vec2 ball_angular_acceleration(const BallState& ball, Vec2 pivot_accel, const SimParams& p) {
  const double g_over_l = p.gravity / p.pendulum_length;
  const double inv_l = 1.0 / p.pendulum_length;
  return {axis_derivative({ball.angle.x, ball.rate.x}, pivot_accel.x, g_over_l, inv_l, p.angular_damping).rate,
          axis_derivative({ball.angle.y, ball.rate.y}, pivot_accel.y, g_over_l, inv_l, p.angular_damping).rate};
}

bool update_in_bowl(bool in_bowl, Vec2 angle, const SimParams& p) {
  const double magnitude = angle.norm();
  if (in_bowl) return !(magnitude > p.rim_angle);
  return magnitude < p.reentry_angle;
}

BallState step_ball(const BallState& ball, Vec2 pivot_accel, const SimParams& p, double dt) {
  if (!is_finite(ball.angle) || !is_finite(ball.rate) || !is_finite(pivot_accel) || !std::isfinite(dt)) {
    throw SimulationFault("non-finite ball state or pivot acceleration");
  }
  const AxisState ax = rk4_axis({ball.angle.x, ball.rate.x}, pivot_accel.x, p, dt);
  const AxisState ay = rk4_axis({ball.angle.y, ball.rate.y}, pivot_accel.y, p, dt);

  BallState next;
  next.angle = {ax.angle, ay.angle};
  next.rate = {ax.rate, ay.rate};
  if (!is_finite(next.angle) || !is_finite(next.rate)) throw SimulationFault("ball state diverged");
  next.in_bowl = update_in_bowl(ball.in_bowl, next.angle, p);
  return next;
}

Vec2 ball_reaction_force(const BallState& ball, Vec2 ball_accel, const SimParams& p) {
  const double ml = p.ball_mass * p.pendulum_length;
  const auto axis = [ml](double angle, double rate, double accel) {
    return -ml * (accel * std::cos(angle) - rate * rate * std::sin(angle));
  };
  Vec2 f{axis(ball.angle.x, ball.rate.x, ball_accel.x), axis(ball.angle.y, ball.rate.y, ball_accel.y)};
  if (!is_finite(f)) throw SimulationFault("non-finite ball reaction force");
  return f;
}

double table_contact_force(double z, double vz, const SimParams& p) {
  if (z >= p.table_height) return 0.0;
  // The damper also brakes on the way out; clipping it lets the bowl leave
  // the surface with residual speed and float upward.
  return -p.table_stiffness * (z - p.table_height) - p.table_damping * vz;
}

bool is_lifted(double z, const SimParams& p) { return z > p.table_height + p.contact_tolerance; }

BowlState step_bowl(const BowlState& bowl, Vec3 user_force, Vec2 ball_force, const SimParams& p, double dt) {
  if (!is_finite(bowl.position) || !is_finite(bowl.velocity) || !is_finite(user_force) ||
      !is_finite(ball_force)) {
    throw SimulationFault("non-finite bowl state or force");
  }
  const double inv_m = 1.0 / p.virtual_mass;
  const Vec3& v = bowl.velocity;

  Vec3 accel;
  accel.x = (user_force.x + ball_force.x - p.virtual_damping * v.x) * inv_m;
  accel.y = (user_force.y + ball_force.y - p.virtual_damping * v.y) * inv_m;
  const double load = bowl.lifted ? p.loading_force : 0.0;
  accel.z = (user_force.z - load + table_contact_force(bowl.position.z, v.z, p) - p.virtual_damping * v.z) *
            inv_m;

  BowlState next;
  next.velocity = v + accel * dt;
  next.position = bowl.position + next.velocity * dt;
  if (!is_finite(next.position) || !is_finite(next.velocity)) throw SimulationFault("bowl state diverged");
  next.lifted = is_lifted(next.position.z, p);
  return next;
}

double pendulum_energy(const BallState& ball, const SimParams& p) {
  const double m = p.ball_mass;
  const double l = p.pendulum_length;
  const auto axis = [&](double angle, double rate) {
    const double half_sin = std::sin(0.5 * angle);
    return 0.5 * m * l * l * rate * rate + 2.0 * m * p.gravity * l * half_sin * half_sin;
  };
  return axis(ball.angle.x, ball.rate.x) + axis(ball.angle.y, ball.rate.y);
}

}  // namespace bowlsim
