#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bowlsim/dynamics.hpp"
#include "bowlsim/error.hpp"
#include "oracles.hpp"

namespace bowlsim {
namespace {

SimParams undamped() {
  SimParams p;
  p.angular_damping = 0.0;
  return p;
}

// Mean period from upward zero crossings of theta_x, linearly interpolated.
double measured_period(const SimParams& p, double theta0, int periods) {
  BallState b;
  b.angle.x = theta0;
  const double dt = p.physics_dt;
  std::vector<double> crossings;
  double t = 0.0;
  while (static_cast<int>(crossings.size()) < periods + 1) {
    const BallState next = step_ball(b, {}, p, dt);
    if (b.angle.x < 0.0 && next.angle.x >= 0.0) {
      crossings.push_back(t + dt * (-b.angle.x) / (next.angle.x - b.angle.x));
    }
    b = next;
    t += dt;
  }
  return (crossings.back() - crossings.front()) / periods;
}

TEST(ResonantLength, MatchesSmallOscillationFormula) {
  EXPECT_NEAR(resonant_length(1.88, 9.81), 0.0703, 5e-5);
  EXPECT_NEAR(resonant_length(1.0 / (2.0 * std::numbers::pi), 9.81), 9.81, 1e-12);
}

TEST(ResonantLength, RoundTrip) {
  for (double f : {0.5, 1.0, 1.88, 3.0, 10.0}) EXPECT_NEAR(resonant_frequency(resonant_length(f)), f, 1e-12 * f);
}

TEST(ResonantLength, RejectsNonPositive) {
  EXPECT_THROW(resonant_length(0.0), DomainError);
  EXPECT_THROW(resonant_length(1.0, -1.0), DomainError);
  EXPECT_THROW(resonant_frequency(0.0), DomainError);
}

TEST(SimParams, Validation) {
  SimParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.steps_per_sample(), 10);
  p.reentry_angle = 1.2;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SimParams{};
  p.physics_dt = 0.002;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SimParams{};
  p.record_rate = 300.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SimParams{};
  p.ball_mass = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(StepBall, EquilibriumIsFixedPoint) {
  const SimParams p;
  BallState b;
  for (int i = 0; i < 1000; ++i) b = step_ball(b, {}, p, p.physics_dt);
  EXPECT_EQ(b.angle.x, 0.0);
  EXPECT_EQ(b.angle.y, 0.0);
  EXPECT_EQ(b.rate.x, 0.0);
  EXPECT_TRUE(b.in_bowl);
}

TEST(StepBall, PeriodAtDefaultLength) {
  const SimParams p = undamped();
  const double period = measured_period(p, 0.01, 20);
  EXPECT_NEAR(period, 1.0 / 1.88, 0.005 / 1.88);
}

TEST(StepBall, ResonanceAcrossLengths) {
  for (double length : {0.05, 0.1, 0.3, 0.6, 1.0}) {
    SimParams p = undamped();
    p.pendulum_length = length;
    const double expected = 1.0 / p.resonance_hz();
    EXPECT_NEAR(measured_period(p, 0.01, 10), expected, 0.005 * expected) << "L=" << length;
  }
}

TEST(StepBall, DampedEnergyNeverIncreases) {
  SimParams p;
  p.angular_damping = 0.3;
  BallState b;
  b.angle = {0.3, -0.2};
  double e = pendulum_energy(b, p);
  for (int i = 0; i < 20000; ++i) {
    b = step_ball(b, {}, p, p.physics_dt);
    const double next = pendulum_energy(b, p);
    ASSERT_LE(next, e * (1.0 + 1e-12)) << "step " << i;
    e = next;
  }
}

TEST(StepBall, UndampedEnergyConserved) {
  const SimParams p = undamped();
  BallState b;
  b.angle = {0.3, 0.1};
  const double e0 = pendulum_energy(b, p);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    b = step_ball(b, {}, p, p.physics_dt);
    worst = std::max(worst, std::abs(pendulum_energy(b, p) - e0) / e0);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(StepBall, NonFiniteInputFaults) {
  const SimParams p;
  BallState b;
  EXPECT_THROW(step_ball(b, {std::nan(""), 0.0}, p, p.physics_dt), SimulationFault);
}

TEST(FallOut, HysteresisBand) {
  const SimParams p;
  EXPECT_TRUE(update_in_bowl(true, {0.9, 0.0}, p));
  EXPECT_FALSE(update_in_bowl(true, {0.8, 0.7}, p));  // |theta| > 1
  EXPECT_FALSE(update_in_bowl(false, {0.7, 0.0}, p));
  EXPECT_FALSE(update_in_bowl(false, {0.5, 0.0}, p));
  EXPECT_TRUE(update_in_bowl(false, {0.49, 0.0}, p));
}

TEST(FallOut, NoChatterOnNoisyCrossing) {
  const SimParams p;
  bool in = true;
  int transitions = 0;
  // Angle sweeps slowly over the rim with ripple well inside the band.
  for (int i = 0; i <= 2000; ++i) {
    const double base = 0.2 + 1.0 * i / 2000.0;
    const double angle = base + 0.05 * std::sin(0.3 * i);
    const bool next = update_in_bowl(in, {angle, 0.0}, p);
    transitions += next != in ? 1 : 0;
    in = next;
  }
  EXPECT_EQ(transitions, 1);
}

TEST(BallReaction, RestAndPureAcceleration) {
  const SimParams p;
  const BallState rest;
  const Vec2 f0 = ball_reaction_force(rest, {}, p);
  EXPECT_EQ(f0.x, 0.0);
  EXPECT_EQ(f0.y, 0.0);
  const Vec2 f = ball_reaction_force(rest, {2.5, 0.0}, p);
  EXPECT_DOUBLE_EQ(f.x, -p.ball_mass * p.pendulum_length * 2.5);
  EXPECT_EQ(f.y, 0.0);
}

TEST(BallReaction, FreeOscillationDominantBinIsResonance) {
  const SimParams p;
  BallState b;
  b.angle.x = 0.02;
  std::vector<double> fx;
  const int per_sample = p.steps_per_sample();
  for (int i = 0; i < 20000; ++i) {
    if (i % per_sample == 0) fx.push_back(ball_reaction_force(b, ball_angular_acceleration(b, {}, p), p).x);
    b = step_ball(b, {}, p, p.physics_dt);
  }
  const std::vector<double> power = oracle::naive_power_spectrum(fx);
  std::size_t best = 1;
  for (std::size_t k = 1; k < power.size(); ++k)
    if (power[k] > power[best]) best = k;
  const double resolution = p.record_rate / static_cast<double>(fx.size());
  EXPECT_NEAR(static_cast<double>(best) * resolution, 1.88, resolution);
}

TEST(StepBowl, StationaryWithoutForces) {
  const SimParams p;
  BowlState bowl;
  for (int i = 0; i < 1000; ++i) bowl = step_bowl(bowl, {}, {}, p, p.physics_dt);
  EXPECT_EQ(bowl.position, (Vec3{}));
  EXPECT_FALSE(bowl.lifted);
}

TEST(StepBowl, TerminalVelocity) {
  const SimParams p;
  BowlState bowl;
  for (int i = 0; i < 10000; ++i) bowl = step_bowl(bowl, {2.0, 0.0, 0.0}, {}, p, p.physics_dt);
  EXPECT_NEAR(bowl.velocity.x, 2.0 / p.virtual_damping, 1e-9);
  // First-order response v(t) = F/b (1 - exp(-b t / m)) at t = 0.3 s.
  BowlState early;
  for (int i = 0; i < 300; ++i) early = step_bowl(early, {2.0, 0.0, 0.0}, {}, p, p.physics_dt);
  const double closed = 2.0 / p.virtual_damping * (1.0 - std::exp(-p.virtual_damping * 0.3 / p.virtual_mass));
  EXPECT_NEAR(early.velocity.x, closed, 2e-3 * closed);
}

TEST(StepBowl, TableContactRecoversWithoutOvershoot) {
  const SimParams p;
  BowlState bowl;
  const double penetration = 0.01;
  bowl.position.z = p.table_height - penetration;
  double highest = bowl.position.z;
  for (int i = 0; i < 2000; ++i) {
    bowl = step_bowl(bowl, {}, {}, p, p.physics_dt);
    highest = std::max(highest, bowl.position.z);
  }
  EXPECT_NEAR(bowl.position.z, p.table_height, p.contact_tolerance);
  EXPECT_LE(highest - p.table_height, 0.1 * penetration);
}

TEST(StepBowl, LiftedThresholdAndLoading) {
  SimParams p;
  p.loading_force = 10.0;
  EXPECT_FALSE(is_lifted(p.table_height + p.contact_tolerance, p));
  EXPECT_TRUE(is_lifted(p.table_height + p.contact_tolerance + 1e-9, p));
  BowlState resting;
  const BowlState r = step_bowl(resting, {}, {}, p, p.physics_dt);
  EXPECT_EQ(r.velocity.z, 0.0);  // loading is off on the table
  BowlState up;
  up.position.z = 0.05;
  up.lifted = true;
  const BowlState u = step_bowl(up, {}, {}, p, p.physics_dt);
  EXPECT_NEAR(u.velocity.z, -10.0 / p.virtual_mass * p.physics_dt, 1e-15);
}

TEST(StepBowl, HorizontalMotionDoesNotLift) {
  const SimParams p;
  BowlState bowl;
  for (int i = 0; i < 2000; ++i) bowl = step_bowl(bowl, {5.0, -3.0, 0.0}, {}, p, p.physics_dt);
  EXPECT_FALSE(bowl.lifted);
  EXPECT_GT(bowl.position.x, 0.0);
}

}  // namespace
}  // namespace bowlsim
