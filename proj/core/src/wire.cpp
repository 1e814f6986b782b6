#include "bowlsim/wire.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace bowlsim {

namespace {

using nlohmann::json;

double finite_number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) throw WireError("malformed", fmt::format("'{}' must be a number", key));
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw WireError("malformed", fmt::format("'{}' must be finite", key));
  return v;
}

bool flag(const json& j, const char* key, bool fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw WireError("malformed", fmt::format("'{}' must be a boolean", key));
  return it->get<bool>();
}

json envelope(std::string_view type) { return {{"v", kWireVersion}, {"type", type}}; }

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw WireError("malformed", "frame is not valid JSON");
  }
  if (!j.is_object()) throw WireError("malformed", "message must be a JSON object");
  const auto v = j.find("v");
  if (v == j.end()) throw WireError("malformed", "missing version field 'v'");
  if (!v->is_number_integer() || v->get<int>() != kWireVersion)
    throw WireError("bad_version", fmt::format("unsupported protocol version {}", v->dump()));
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) throw WireError("malformed", "missing message type");
  const auto type = type_it->get<std::string>();

  ClientMessage m;
  if (type == "join") {
    m.type = ClientMessageType::Join;
    if (const auto s = j.find("subject"); s != j.end()) {
      if (!s->is_string()) throw WireError("malformed", "'subject' must be a string");
      m.subject = s->get<std::string>();
    }
  } else if (type == "input") {
    m.type = ClientMessageType::Input;
    std::string mode = "pointer";
    if (const auto it = j.find("mode"); it != j.end()) {
      if (!it->is_string()) throw WireError("malformed", "'mode' must be a string");
      mode = it->get<std::string>();
    }
    if (mode == "force") {
      m.input.mode = InputMode::Force;
      m.input.force = {finite_number(j, "fx"), finite_number(j, "fy"), finite_number(j, "fz")};
    } else if (mode == "pointer") {
      m.input.mode = InputMode::Pointer;
      m.input.pointer = {finite_number(j, "x"), finite_number(j, "y")};
      m.input.lift = flag(j, "lift", false);
    } else {
      throw WireError("malformed", fmt::format("unknown input mode '{}'", mode));
    }
  } else if (type == "start_trial") {
    m.type = ClientMessageType::StartTrial;
  } else if (type == "rest") {
    m.type = ClientMessageType::Rest;
  } else {
    throw WireError("unknown_type", fmt::format("unknown message type '{}'", type));
  }
  return m;
}

std::string encode_client_message(const ClientMessage& m) {
  json j;
  switch (m.type) {
    case ClientMessageType::Join:
      j = envelope("join");
      if (!m.subject.empty()) j["subject"] = m.subject;
      break;
    case ClientMessageType::Input:
      j = envelope("input");
      if (m.input.mode == InputMode::Force) {
        j["mode"] = "force";
        j["fx"] = m.input.force.x;
        j["fy"] = m.input.force.y;
        j["fz"] = m.input.force.z;
      } else {
        j["mode"] = "pointer";
        j["x"] = m.input.pointer.x;
        j["y"] = m.input.pointer.y;
        j["lift"] = m.input.lift;
      }
      break;
    case ClientMessageType::StartTrial: j = envelope("start_trial"); break;
    case ClientMessageType::Rest: j = envelope("rest"); break;
  }
  return j.dump();
}

std::string encode_welcome(const Welcome& w) {
  json j = envelope("welcome");
  j["session"] = w.session;
  j["subject"] = w.subject;
  j["snapshot_rate"] = w.snapshot_rate;
  j["physics_dt"] = w.physics_dt;
  j["workspace"] = {{"x_min", w.workspace.x_min}, {"x_max", w.workspace.x_max},
                    {"y_min", w.workspace.y_min}, {"y_max", w.workspace.y_max}};
  j["collection_tolerance"] = w.collection_tolerance;
  j["trials_total"] = w.trials_total;
  j["next_trial"] = w.next_trial;
  return j.dump();
}

std::string encode_snapshot(const Snapshot& s) {
  json flags = json::array();
  for (const Flag& f : s.remaining) flags.push_back({f.index, f.position.x, f.position.y});
  json j = envelope("snapshot");
  j["seq"] = s.seq;
  j["t"] = s.t;
  j["running"] = s.running;
  j["trial"] = s.trial_index;
  j["set"] = s.set_index;
  j["trials_total"] = s.trials_total;
  j["bowl"] = {s.bowl.x, s.bowl.y, s.bowl.z};
  j["lifted"] = s.lifted;
  j["ball"] = {s.ball_angle.x, s.ball_angle.y};
  j["in_bowl"] = s.in_bowl;
  j["flags"] = std::move(flags);
  j["eligible"] = s.eligible;
  j["collected"] = s.collected;
  j["time_remaining"] = s.time_remaining;
  j["task_time"] = s.task_time;
  return j.dump();
}

std::string encode_trial_complete(const TrialSummary& s) {
  json j = envelope("trial_complete");
  j["trial"] = s.trial_index;
  j["set"] = s.set_index;
  j["valid"] = s.valid;
  if (!s.valid) j["invalid_reason"] = s.invalid_reason;
  j["collected"] = s.collected;
  j["task_time"] = s.task_time;
  j["time_per_target"] = s.time_per_target ? json(*s.time_per_target) : json(nullptr);
  j["log"] = s.log_file;
  return j.dump();
}

std::string encode_error(std::string_view code, std::string_view message) {
  json j = envelope("error");
  j["code"] = code;
  j["message"] = message;
  return j.dump();
}

}  // namespace bowlsim
