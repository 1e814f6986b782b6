#include "bowlsim/task.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "bowlsim/error.hpp"
#include "bowlsim/seed.hpp"

namespace bowlsim {

namespace {

constexpr double kPi = std::numbers::pi;

using Points = std::array<Vec2, kFlagsPerDistribution>;

Points grid_layout() {
  Points p{};
  int k = 0;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 5; ++col) p[k++] = {0.1 + 0.2 * col, 0.125 + 0.25 * row};
  return p;
}

Points ring_layout() {
  Points p{};
  for (int k = 0; k < kFlagsPerDistribution; ++k) {
    const double a = 2.0 * kPi * k / kFlagsPerDistribution + kPi / kFlagsPerDistribution;
    p[k] = {0.5 + 0.42 * std::cos(a), 0.5 + 0.42 * std::sin(a)};
  }
  return p;
}

// Centre + 3 inner + 6 outer points per cluster.
void add_cluster(Points& p, int& k, Vec2 c, double rotation) {
  p[k++] = c;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * kPi * i / 3 + rotation;
    p[k++] = {c.x + 0.12 * std::cos(a), c.y + 0.12 * std::sin(a)};
  }
  for (int i = 0; i < 6; ++i) {
    const double a = 2.0 * kPi * i / 6 + rotation + kPi / 6;
    p[k++] = {c.x + 0.23 * std::cos(a), c.y + 0.23 * std::sin(a)};
  }
}

Points cluster_layout() {
  Points p{};
  int k = 0;
  add_cluster(p, k, {0.27, 0.30}, 0.0);
  add_cluster(p, k, {0.73, 0.70}, kPi);
  return p;
}

// Two staggered rows either side of the main diagonal.
Points band_layout() {
  Points p{};
  const Vec2 normal{-1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2};
  const double step = 0.76 / 9.0;
  int k = 0;
  for (int i = 0; i < 10; ++i) {
    const double t = 0.1 + step * i;
    p[k++] = Vec2{t, t} - 0.08 * normal;
    const double u = t + 0.5 * step;
    p[k++] = Vec2{u, u} + 0.08 * normal;
  }
  return p;
}

Points cross_layout() {
  Points p{};
  constexpr std::array<Vec2, 4> arms{Vec2{1, 1}, Vec2{-1, 1}, Vec2{-1, -1}, Vec2{1, -1}};
  constexpr std::array<double, 5> radii{0.12, 0.245, 0.37, 0.495, 0.62};
  int k = 0;
  for (Vec2 arm : arms)
    for (double r : radii) p[k++] = Vec2{0.5, 0.5} + (r / std::numbers::sqrt2) * arm;
  return p;
}

double radical_inverse(int i, int base) {
  double f = 1.0;
  double r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

// Halton(2,3) points 1..20 squeezed into [0.05, 0.95]^2.
Points scatter_layout() {
  Points p{};
  for (int i = 0; i < kFlagsPerDistribution; ++i)
    p[i] = {0.05 + 0.9 * radical_inverse(i + 1, 2), 0.05 + 0.9 * radical_inverse(i + 1, 3)};
  return p;
}

std::array<FlagDistribution, 6> make_builtin() {
  return {FlagDistribution{DistributionId::A, grid_layout()},
          FlagDistribution{DistributionId::B, ring_layout()},
          FlagDistribution{DistributionId::C, cluster_layout()},
          FlagDistribution{DistributionId::D, band_layout()},
          FlagDistribution{DistributionId::E, cross_layout()},
          FlagDistribution{DistributionId::F, scatter_layout()}};
}

}  // namespace

char to_char(DistributionId id) { return static_cast<char>(id); }

DistributionId distribution_from_char(char c) {
  if (c < 'A' || c > 'F') throw ConfigError(fmt::format("unknown flag distribution '{}'", c));
  return static_cast<DistributionId>(c);
}

LoadLevel load_from_percent(int pct) {
  switch (pct) {
    case 0: return LoadLevel::Zero;
    case 20: return LoadLevel::Twenty;
    case 50: return LoadLevel::Fifty;
    default: throw ConfigError(fmt::format("loading level must be 0, 20 or 50 (got {})", pct));
  }
}

void Workspace::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max)) throw ConfigError("workspace requires x_min < x_max and y_min < y_max");
}

void TaskConfig::validate() const {
  if (!(collection_tolerance > 0.0)) throw ConfigError("collection_tolerance must be > 0");
  if (!(trial_duration > 0.0)) throw ConfigError("trial_duration must be > 0");
  if (!(max_sabd_force > 0.0)) throw ConfigError("max_sabd_force must be > 0");
}

const std::array<FlagDistribution, 6>& builtin_distributions() {
  static const std::array<FlagDistribution, 6> kDistributions = make_builtin();
  return kDistributions;
}

const FlagDistribution& builtin_distribution(DistributionId id) {
  return builtin_distributions()[static_cast<std::size_t>(to_char(id) - 'A')];
}

double min_pairwise_distance(std::span<const Vec2> points) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::min(best, (points[i] - points[j]).norm());
  return best;
}

std::vector<Vec2> scale_distribution(const FlagDistribution& dist, const Workspace& ws,
                                     double collection_tolerance) {
  ws.validate();
  const double scale = std::min(ws.width(), ws.height());
  const Vec2 offset = ws.center() - Vec2{0.5 * scale, 0.5 * scale};

  std::vector<Vec2> out;
  out.reserve(dist.points.size());
  for (Vec2 p : dist.points) out.push_back(offset + scale * p);

  const double spacing = min_pairwise_distance(out);
  if (spacing < 2.0 * collection_tolerance) {
    throw ConfigError(fmt::format("workspace too small: distribution {} flags are {:.4f} m apart, need >= {:.4f} m",
                                  to_char(dist.id), spacing, 2.0 * collection_tolerance));
  }
  return out;
}

TrialState initial_trial_state(std::span<const Vec2> scaled_flags) {
  TrialState s;
  s.remaining.reserve(scaled_flags.size());
  for (std::size_t i = 0; i < scaled_flags.size(); ++i) s.remaining.push_back({static_cast<int>(i), scaled_flags[i]});
  return s;
}

std::vector<int> check_collection(TrialState& state, const BowlState& bowl, const BallState& ball,
                                  double tolerance) {
  std::vector<int> collected;
  state.eligible = ball.in_bowl && bowl.lifted;
  if (!state.eligible) return collected;

  const Vec2 here = bowl.position.xy();
  std::erase_if(state.remaining, [&](const Flag& f) {
    if ((f.position - here).norm() <= tolerance) {
      collected.push_back(f.index);
      return true;
    }
    return false;
  });
  state.collected_count += static_cast<int>(collected.size());
  return collected;
}

void accrue_task_time(TrialState& state, const BowlState& bowl, double dt) {
  if (bowl.lifted && !state.all_collected()) state.task_time += dt;
}

LoadLevel Protocol::set_load(int set_index) const {
  for (const TrialSpec& t : trials)
    if (t.set_index == set_index) return t.load;
  throw ConfigError(fmt::format("protocol has no set {}", set_index));
}

Protocol generate_protocol(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed));

  std::array<LoadLevel, kSetsPerProtocol> loads{};
  for (int i = 0; i < kSetsPerProtocol; ++i) loads[i] = kLoadLevels[i / 3];
  std::shuffle(loads.begin(), loads.end(), rng);

  Protocol protocol;
  protocol.seed = seed;
  protocol.trials.reserve(kTrialsPerProtocol);
  int trial_index = 1;
  for (int set = 0; set < kSetsPerProtocol; ++set) {
    auto order = kCollectionDistributions;
    std::shuffle(order.begin(), order.end(), rng);
    for (DistributionId d : order) {
      protocol.trials.push_back(TrialSpec{d, loads[set], set + 1, trial_index,
                                          derive_seed(seed, static_cast<std::uint64_t>(trial_index))});
      ++trial_index;
    }
  }
  return protocol;
}

void validate_protocol(const Protocol& protocol) {
  if (protocol.trials.size() != kTrialsPerProtocol)
    throw ConfigError(fmt::format("protocol has {} trials, expected {}", protocol.trials.size(), kTrialsPerProtocol));

  std::array<int, 3> sets_per_load{};
  for (int set = 0; set < kSetsPerProtocol; ++set) {
    std::array<int, 6> seen{};
    const LoadLevel load = protocol.trials[set * kTrialsPerSet].load;
    for (int i = 0; i < kTrialsPerSet; ++i) {
      const TrialSpec& t = protocol.trials[set * kTrialsPerSet + i];
      if (t.set_index != set + 1 || t.trial_index != set * kTrialsPerSet + i + 1)
        throw ConfigError("protocol indices out of order");
      if (t.load != load) throw ConfigError(fmt::format("set {} mixes loading levels", set + 1));
      if (t.distribution == DistributionId::A) throw ConfigError("training distribution in protocol");
      ++seen[static_cast<std::size_t>(to_char(t.distribution) - 'A')];
    }
    for (DistributionId d : kCollectionDistributions)
      if (seen[static_cast<std::size_t>(to_char(d) - 'A')] != 1)
        throw ConfigError(fmt::format("set {} is not a permutation of B..F", set + 1));
    for (std::size_t l = 0; l < kLoadLevels.size(); ++l)
      if (kLoadLevels[l] == load) ++sets_per_load[l];
  }
  for (int n : sets_per_load)
    if (n != 3) throw ConfigError("each loading level must be used in exactly 3 sets");
}

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::Collect: return "collect";
    case EventType::Lift: return "lift";
    case EventType::Rest: return "rest";
    case EventType::FallOut: return "fall_out";
    case EventType::Reentry: return "reentry";
  }
  return "unknown";
}

EventType event_type_from_string(std::string_view s) {
  for (EventType t : {EventType::Collect, EventType::Lift, EventType::Rest, EventType::FallOut, EventType::Reentry})
    if (to_string(t) == s) return t;
  throw ConfigError(fmt::format("unknown event type '{}'", s));
}

}  // namespace bowlsim
