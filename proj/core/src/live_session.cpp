#include "bowlsim/live_session.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "bowlsim/spectral.hpp"

namespace bowlsim {

Vec3 coupling_force(const InputCommand& input, const BowlState& bowl, const SimParams& params,
                    const ServerConfig& server) {
  if (input.mode == InputMode::Force) return input.force;
  const double k = server.coupling_stiffness;
  const double c = std::max(0.0, 2.0 * std::sqrt(k * params.virtual_mass) - params.virtual_damping);
  const Vec3& x = bowl.position;
  const Vec3& v = bowl.velocity;
  Vec3 f;
  f.x = k * (input.pointer.x - x.x) - c * v.x;
  f.y = k * (input.pointer.y - x.y) - c * v.y;
  const double z_target = params.table_height + (input.lift ? server.lift_height : 0.0);
  f.z = k * (z_target - x.z) - c * v.z + (input.lift ? params.loading_force : 0.0);
  return f;
}

LiveSession::LiveSession(SessionConfig config, std::string session_id)
    : config_(std::move(config)),
      session_id_(std::move(session_id)),
      protocol_(generate_protocol(config_.protocol_seed)),
      log_dir_(config_.server.log_dir) {
  config_.validate();
  manifest_.mode = "live";
  manifest_.run = {{"session", session_id_}, {"protocol_seed", config_.protocol_seed}, {"config", to_json(config_)}};
  input_.pointer = config_.workspace.center();
}

LiveSession::~LiveSession() { stop_realtime(); }

void LiveSession::flush(std::vector<std::string>& out, const Sink& sink) {
  if (sink)
    for (const std::string& m : out) sink(m);
  out.clear();
}

void LiveSession::send_locked(std::string message) { outbox_.push_back(std::move(message)); }

bool LiveSession::connect(ClientId id, Sink sink) {
  std::unique_lock lock(mutex_);
  if (client_ && *client_ != id) {
    lock.unlock();
    if (sink) sink(encode_error("session_full", "this session already has a player"));
    return false;
  }
  client_ = id;
  sink_ = std::move(sink);
  joined_ = false;
  return true;
}

void LiveSession::disconnect(ClientId id) {
  std::unique_lock lock(mutex_);
  if (!client_ || *client_ != id) return;
  if (runner_ && !runner_->finished()) {
    runner_->abort("client disconnected");
    finish_trial_locked();
  }
  client_.reset();
  joined_ = false;
  sink_ = nullptr;
  outbox_.clear();
  input_ = InputCommand{};
  input_.pointer = config_.workspace.center();
}

void LiveSession::handle(ClientId id, std::string_view frame) {
  std::unique_lock lock(mutex_);
  // Frames from a client that does not hold the slot are dropped; it was
  // already told session_full when it connected.
  if (!client_ || *client_ != id) return;
  Sink reply_to = sink_;
  std::vector<std::string> out;
  try {
    const ClientMessage m = parse_client_message(frame);
    if (m.type != ClientMessageType::Join && !joined_) throw WireError("not_joined", "send join first");
    switch (m.type) {
      case ClientMessageType::Join: {
        joined_ = true;
        Welcome w;
        w.session = session_id_;
        w.subject = m.subject.empty() ? config_.subject.id : m.subject;
        w.snapshot_rate = config_.server.snapshot_rate;
        w.physics_dt = config_.sim.physics_dt;
        w.workspace = config_.workspace;
        w.collection_tolerance = config_.task.collection_tolerance;
        w.next_trial = static_cast<int>(next_trial_) + 1;
        if (!m.subject.empty()) config_.subject.id = m.subject;
        send_locked(encode_welcome(w));
        break;
      }
      case ClientMessageType::Input: input_ = m.input; break;
      case ClientMessageType::Rest:
        input_.lift = false;
        input_.force = {};
        break;
      case ClientMessageType::StartTrial:
        if (runner_ && !runner_->finished()) throw WireError("trial_running", "a trial is already running");
        if (next_trial_ >= protocol_.trials.size()) throw WireError("protocol_complete", "all trials are done");
        start_trial_locked();
        break;
    }
  } catch (const WireError& e) {
    out.push_back(encode_error(e.code(), e.what()));
  }
  flush(outbox_, reply_to);
  flush(out, reply_to);
}

void LiveSession::start_trial_locked() {
  const TrialSpec& spec = protocol_.trials[next_trial_++];
  runner_ = std::make_unique<TrialRunner>(config_.subject, spec, config_.sim, config_.task_for_subject(),
                                          config_.workspace);
  send_locked(encode_snapshot(snapshot_locked()));
}

void LiveSession::finish_trial_locked() {
  TrialLog log = runner_->take_log();
  runner_.reset();
  ++completed_;
  ManifestEntry entry = manifest_entry(log);
  TrialSummary s;
  s.trial_index = log.spec.trial_index;
  s.set_index = log.spec.set_index;
  s.valid = log.valid;
  s.invalid_reason = log.invalid_reason;
  s.collected = log.final_state.collected_count;
  s.task_time = log.final_state.task_time;
  s.time_per_target = time_per_target(log);
  s.log_file = entry.file;
  if (!config_.server.log_dir.empty()) {
    write_trial_log(log_dir_ / entry.file, log);
    manifest_.trials.push_back(entry);
    write_manifest(log_dir_, manifest_);
  }
  last_log_ = std::move(log);
  send_locked(encode_trial_complete(s));
}

Snapshot LiveSession::snapshot_locked() {
  Snapshot s;
  s.seq = ++seq_;
  s.t = static_cast<double>(clock_steps_) * config_.sim.physics_dt;
  s.trial_index = static_cast<int>(next_trial_);
  s.set_index = next_trial_ > 0 ? protocol_.trials[next_trial_ - 1].set_index : 0;
  if (runner_) {
    s.running = !runner_->finished();
    s.bowl = runner_->bowl().position;
    s.lifted = runner_->bowl().lifted;
    s.ball_angle = runner_->ball().angle;
    s.in_bowl = runner_->ball().in_bowl;
    s.remaining = runner_->state().remaining;
    s.eligible = runner_->state().eligible;
    s.collected = runner_->state().collected_count;
    s.time_remaining = runner_->time_remaining();
    s.task_time = runner_->state().task_time;
  } else {
    s.bowl = {config_.workspace.center().x, config_.workspace.center().y, config_.sim.table_height};
  }
  return s;
}

void LiveSession::step_locked() {
  if (runner_ && !runner_->finished()) {
    runner_->step(coupling_force(input_, runner_->bowl(), runner_->context().params, config_.server));
    if (runner_->finished()) finish_trial_locked();
  }
  const double rate_dt = config_.server.snapshot_rate * config_.sim.physics_dt;
  const auto before = static_cast<std::int64_t>(std::floor(static_cast<double>(clock_steps_) * rate_dt));
  ++clock_steps_;
  const auto after = static_cast<std::int64_t>(std::floor(static_cast<double>(clock_steps_) * rate_dt));
  if (after != before && joined_) send_locked(encode_snapshot(snapshot_locked()));
}

void LiveSession::advance(std::int64_t steps) {
  std::lock_guard lock(mutex_);
  for (std::int64_t i = 0; i < steps; ++i) step_locked();
  flush(outbox_, sink_);
}

void LiveSession::start_realtime() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { realtime_loop(); });
}

void LiveSession::stop_realtime() {
  if (!running_.exchange(false)) return;
  if (thread_.joinable()) thread_.join();
}

void LiveSession::realtime_loop() {
  using clock = std::chrono::steady_clock;
  const auto dt = std::chrono::duration<double>(config_.sim.physics_dt);
  // Steps beyond this backlog are dropped rather than replayed in a burst.
  const std::int64_t max_backlog = static_cast<std::int64_t>(std::ceil(0.1 / config_.sim.physics_dt));
  const auto start = clock::now();
  std::int64_t done = 0;
  std::int64_t dropped = 0;
  while (running_.load()) {
    const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
    std::int64_t due = static_cast<std::int64_t>(elapsed / config_.sim.physics_dt) - done - dropped;
    if (due > max_backlog) {
      dropped += due - max_backlog;
      due = max_backlog;
    }
    if (due > 0) {
      advance(due);
      done += due;
    }
    {
      std::lock_guard lock(mutex_);
      timing_.sim_time = static_cast<double>(done) * config_.sim.physics_dt;
      timing_.wall_time = elapsed;
      timing_.dropped_steps = dropped;
    }
    std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(dt * (done + dropped + 1)));
  }
}

LiveSession::Timing LiveSession::timing() const {
  std::lock_guard lock(mutex_);
  return timing_;
}

bool LiveSession::trial_running() const {
  std::lock_guard lock(mutex_);
  return runner_ && !runner_->finished();
}

int LiveSession::trials_completed() const {
  std::lock_guard lock(mutex_);
  return completed_;
}

std::optional<TrialLog> LiveSession::last_log() const {
  std::lock_guard lock(mutex_);
  return last_log_;
}

}  // namespace bowlsim
