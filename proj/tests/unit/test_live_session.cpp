#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "bowlsim/live_session.hpp"
#include "bowlsim/players.hpp"
#include "bowlsim/spectral.hpp"

namespace bowlsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Inbox {
  std::mutex mutex;
  std::vector<json> messages;

  LiveSession::Sink sink() {
    return [this](const std::string& m) {
      std::lock_guard lock(mutex);
      messages.push_back(json::parse(m));
    };
  }
  std::vector<json> of_type(const std::string& type) {
    std::lock_guard lock(mutex);
    std::vector<json> out;
    for (const json& m : messages)
      if (m["type"] == type) out.push_back(m);
    return out;
  }
  json last() {
    std::lock_guard lock(mutex);
    return messages.empty() ? json() : messages.back();
  }
};

SessionConfig live_config(const std::string& name) {
  SessionConfig c;
  c.controller = "human";
  c.protocol_seed = 21;
  c.server.log_dir = (fs::temp_directory_path() / ("bowlsim_live_" + name)).string();
  fs::remove_all(c.server.log_dir);
  return c;
}

std::string input_force(Vec3 f) {
  ClientMessage m;
  m.type = ClientMessageType::Input;
  m.input.mode = InputMode::Force;
  m.input.force = f;
  return encode_client_message(m);
}

std::string input_pointer(Vec2 p, bool lift) {
  ClientMessage m;
  m.type = ClientMessageType::Input;
  m.input.pointer = p;
  m.input.lift = lift;
  return encode_client_message(m);
}

constexpr const char* kJoin = R"({"v":1,"type":"join","subject":"P01"})";
constexpr const char* kStart = R"({"v":1,"type":"start_trial"})";

TEST(CouplingForce, PointerAndForceModes) {
  const SimParams params;
  const ServerConfig server;
  InputCommand in;
  in.mode = InputMode::Force;
  in.force = {1.0, -2.0, 3.0};
  BowlState bowl;
  bowl.velocity = {0.5, 0.5, 0.5};
  EXPECT_EQ(coupling_force(in, bowl, params, server), in.force);

  in.mode = InputMode::Pointer;
  in.pointer = {0.1, 0.0};
  const double c = 2.0 * std::sqrt(server.coupling_stiffness * params.virtual_mass) - params.virtual_damping;
  Vec3 f = coupling_force(in, bowl, params, server);
  EXPECT_NEAR(f.x, server.coupling_stiffness * 0.1 - c * 0.5, 1e-12);
  EXPECT_NEAR(f.z, -c * 0.5, 1e-12);

  SimParams loaded = params;
  loaded.loading_force = 8.0;
  in.lift = true;
  bowl.velocity = {};
  f = coupling_force(in, bowl, loaded, server);
  EXPECT_NEAR(f.z, server.coupling_stiffness * server.lift_height + 8.0, 1e-12);
}

TEST(LiveSession, NoInputRestsOnTable) {
  LiveSession session(live_config("rest"));
  Inbox inbox;
  ASSERT_TRUE(session.connect(1, inbox.sink()));
  session.handle(1, kJoin);
  EXPECT_EQ(inbox.last()["type"], "welcome");
  EXPECT_EQ(inbox.last()["subject"], "P01");
  session.handle(1, kStart);
  EXPECT_TRUE(session.trial_running());
  session.advance(5000);
  const json mid = inbox.of_type("snapshot").back();
  EXPECT_TRUE(mid["running"].get<bool>());
  EXPECT_FALSE(mid["lifted"].get<bool>());
  EXPECT_NEAR(mid["time_remaining"].get<double>(), 15.0, 0.02);
  session.advance(15000);
  EXPECT_FALSE(session.trial_running());
  const auto done = inbox.of_type("trial_complete");
  ASSERT_EQ(done.size(), 1u);
  EXPECT_TRUE(done[0]["valid"].get<bool>());
  EXPECT_EQ(done[0]["task_time"], 0.0);
  EXPECT_EQ(done[0]["collected"], 0);
  const auto log = session.last_log();
  ASSERT_TRUE(log.has_value());
  EXPECT_EQ(log->final_state.task_time, 0.0);
  EXPECT_EQ(log->subject.id, "P01");
  EXPECT_EQ(log->spec, session.protocol().trials[0]);
}

TEST(LiveSession, SecondClientRejected) {
  LiveSession session(live_config("full"));
  Inbox first, second;
  EXPECT_TRUE(session.connect(1, first.sink()));
  EXPECT_FALSE(session.connect(2, second.sink()));
  ASSERT_EQ(second.messages.size(), 1u);
  EXPECT_EQ(second.messages[0]["type"], "error");
  EXPECT_EQ(second.messages[0]["code"], "session_full");
  session.handle(2, kJoin);
  EXPECT_EQ(second.messages.size(), 1u);
  EXPECT_TRUE(first.messages.empty());
  session.disconnect(2);  // not the player, no effect
  session.handle(1, kJoin);
  EXPECT_EQ(first.last()["type"], "welcome");
  session.disconnect(1);
  EXPECT_TRUE(session.connect(2, second.sink()));
}

TEST(LiveSession, RejectedFramesLeaveSessionUsable) {
  LiveSession session(live_config("errors"));
  Inbox inbox;
  session.connect(1, inbox.sink());
  session.handle(1, kStart);
  EXPECT_EQ(inbox.last()["code"], "not_joined");
  session.handle(1, "{{{{");
  EXPECT_EQ(inbox.last()["code"], "malformed");
  session.handle(1, R"({"v":3,"type":"join"})");
  EXPECT_EQ(inbox.last()["code"], "bad_version");
  session.handle(1, kJoin);
  EXPECT_EQ(inbox.last()["type"], "welcome");
  session.handle(1, kStart);
  session.handle(1, kStart);
  EXPECT_EQ(inbox.last()["code"], "trial_running");
  EXPECT_TRUE(session.trial_running());
  session.handle(1, R"({"v":1,"type":"input","x":"left"})");
  EXPECT_EQ(inbox.last()["code"], "malformed");
  session.advance(100);
  EXPECT_TRUE(session.trial_running());
}

TEST(LiveSession, SnapshotRateAndSequence) {
  LiveSession session(live_config("rate"));
  Inbox inbox;
  session.connect(1, inbox.sink());
  session.advance(500);
  EXPECT_TRUE(inbox.messages.empty());  // nothing before join
  session.handle(1, kJoin);
  session.advance(1000);
  const auto snaps = inbox.of_type("snapshot");
  EXPECT_EQ(snaps.size(), 60u);
  for (std::size_t i = 1; i < snaps.size(); ++i)
    EXPECT_EQ(snaps[i]["seq"].get<std::uint64_t>(), snaps[i - 1]["seq"].get<std::uint64_t>() + 1);
  EXPECT_FALSE(snaps.back()["running"].get<bool>());
}

TEST(LiveSession, DisconnectInvalidatesTrial) {
  const SessionConfig config = live_config("disconnect");
  LiveSession session(config);
  Inbox inbox;
  session.connect(1, inbox.sink());
  session.handle(1, kJoin);
  session.handle(1, kStart);
  session.handle(1, input_pointer({0.0, 0.0}, true));
  session.advance(3000);
  session.disconnect(1);
  EXPECT_FALSE(session.trial_running());
  EXPECT_EQ(session.trials_completed(), 1);
  const auto log = session.last_log();
  ASSERT_TRUE(log.has_value());
  EXPECT_FALSE(log->valid);
  EXPECT_EQ(log->invalid_reason, "client disconnected");
  EXPECT_NEAR(log->duration, 3.0, 1e-9);

  const Manifest m = read_manifest(config.server.log_dir);
  EXPECT_EQ(m.mode, "live");
  ASSERT_EQ(m.trials.size(), 1u);
  EXPECT_FALSE(m.trials[0].valid);
  const auto archive = read_archive(config.server.log_dir);
  EXPECT_EQ(archive[0], *log);

  // A new player continues with the next trial.
  Inbox again;
  ASSERT_TRUE(session.connect(2, again.sink()));
  session.handle(2, kJoin);
  EXPECT_EQ(again.last()["next_trial"], 2);
  fs::remove_all(config.server.log_dir);
}

TEST(LiveSession, PointerAtFlagCollects) {
  LiveSession session(live_config("collect"));
  Inbox inbox;
  session.connect(1, inbox.sink());
  session.handle(1, kJoin);
  session.handle(1, kStart);
  const json first = inbox.of_type("snapshot").back();
  ASSERT_FALSE(first["flags"].empty());
  const Vec2 flag{first["flags"][0][1].get<double>(), first["flags"][0][2].get<double>()};
  session.handle(1, input_pointer(flag, true));
  session.advance(3000);
  const json later = inbox.of_type("snapshot").back();
  EXPECT_TRUE(later["lifted"].get<bool>());
  EXPECT_GE(later["collected"].get<int>(), 1);
  for (const json& f : later["flags"]) EXPECT_NE(f[0], first["flags"][0][0]);
  session.handle(1, R"({"v":1,"type":"rest"})");
  session.advance(2000);
  EXPECT_FALSE(inbox.of_type("snapshot").back()["lifted"].get<bool>());
}

// Replays the per-step forces of a headless synthetic run through the wire
// in force mode; the live log must match the headless one.
class Recorder final : public ForceSource {
 public:
  explicit Recorder(ControllerParams p) : player_(p) {}
  void begin_trial(const TrialContext& c) override { player_.begin_trial(c); }
  Vec3 command(const Observation& obs) override {
    forces.push_back(player_.command(obs));
    return forces.back();
  }
  std::vector<Vec3> forces;

 private:
  SyntheticPlayer player_;
};

TEST(LiveSession, LoopbackMatchesHeadlessRun) {
  SessionConfig config = live_config("loopback");
  config.subject.id = "P01";
  LiveSession session(config);
  const TrialSpec spec = session.protocol().trials[0];

  ControllerParams cp = control_profile();
  cp.rng_seed = 3;
  Recorder recorder(cp);
  const TrialLog headless =
      run_trial(config.subject, spec, recorder, config.sim, config.task_for_subject(), config.workspace);

  Inbox inbox;
  session.connect(1, inbox.sink());
  session.handle(1, kJoin);
  session.handle(1, kStart);
  for (const Vec3& f : recorder.forces) {
    session.handle(1, input_force(f));
    session.advance(1);
  }
  ASSERT_FALSE(session.trial_running());
  const auto live = session.last_log();
  ASSERT_TRUE(live.has_value());
  EXPECT_EQ(live->trace, headless.trace);
  EXPECT_EQ(live->events, headless.events);
  EXPECT_EQ(live->final_state, headless.final_state);
  const TrialMetrics a = compute_trial_metrics(*live);
  const TrialMetrics b = compute_trial_metrics(headless);
  EXPECT_EQ(a.time_per_target, b.time_per_target);
  EXPECT_EQ(a.peak_near_resonance_x, b.peak_near_resonance_x);
  EXPECT_EQ(a.high_low_ratio_y, b.high_low_ratio_y);
  EXPECT_GT(headless.final_state.collected_count, 0);
  fs::remove_all(config.server.log_dir);
}

TEST(LiveSession, ProtocolCompleteAfterLastTrial) {
  SessionConfig config = live_config("complete");
  config.task.trial_duration = 0.01;
  config.server.log_dir.clear();  // no files
  LiveSession session(config);
  Inbox inbox;
  session.connect(1, inbox.sink());
  session.handle(1, kJoin);
  for (int i = 0; i < kTrialsPerProtocol; ++i) {
    session.handle(1, kStart);
    session.advance(10);
  }
  EXPECT_EQ(session.trials_completed(), kTrialsPerProtocol);
  session.handle(1, kStart);
  EXPECT_EQ(inbox.last()["code"], "protocol_complete");
}

TEST(LiveSession, RealTimeDriftBelowOnePercent) {
  LiveSession session(live_config("realtime"));
  Inbox inbox;
  session.connect(1, inbox.sink());
  session.handle(1, kJoin);
  session.handle(1, kStart);
  session.start_realtime();
  std::this_thread::sleep_for(std::chrono::seconds(20));
  const LiveSession::Timing t = session.timing();
  session.stop_realtime();
  ASSERT_GT(t.wall_time, 19.0);
  EXPECT_LT(std::abs(t.sim_time - t.wall_time) / t.wall_time, 0.01)
      << "sim " << t.sim_time << " wall " << t.wall_time << " dropped " << t.dropped_steps;
  fs::remove_all(live_config("realtime").server.log_dir);
}

}  // namespace
}  // namespace bowlsim
