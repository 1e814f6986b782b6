#include "bowlsim/log_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "bowlsim/config.hpp"
#include "bowlsim/error.hpp"

namespace bowlsim {

namespace {

using nlohmann::json;

json vec(Vec2 v) { return json::array({v.x, v.y}); }
json vec(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec2 vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw AnalysisError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw AnalysisError("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void emit(std::ostream& out, const json& record) { out << record.dump() << '\n'; }

json header(const TrialLog& log) {
  json flags = json::array();
  for (Vec2 f : log.flags) flags.push_back(vec(f));
  return {
      {"record", "header"},
      {"schema_version", kLogSchemaVersion},
      {"subject", {{"id", log.subject.id}, {"group", log.subject.group}}},
      {"spec",
       {{"distribution", std::string(1, to_char(log.spec.distribution))},
        {"load", percent(log.spec.load)},
        {"set", log.spec.set_index},
        {"trial", log.spec.trial_index},
        {"rng_seed", log.spec.rng_seed}}},
      {"params", to_json(log.params)},
      {"collection_tolerance", log.collection_tolerance},
      {"flags", std::move(flags)},
  };
}

json summary(const TrialLog& log) {
  json remaining = json::array();
  for (const Flag& f : log.final_state.remaining) remaining.push_back({f.index, f.position.x, f.position.y});
  return {
      {"record", "summary"},
      {"duration", log.duration},
      {"valid", log.valid},
      {"invalid_reason", log.invalid_reason},
      {"collected", log.final_state.collected_count},
      {"task_time", log.final_state.task_time},
      {"wall_time", log.final_state.wall_time},
      {"eligible", log.final_state.eligible},
      {"remaining", std::move(remaining)},
  };
}

void read_header(const json& j, TrialLog& log) {
  const int version = j.at("schema_version").get<int>();
  if (version != kLogSchemaVersion)
    throw AnalysisError(fmt::format("unsupported trial log schema version {}", version));
  log.subject.id = j.at("subject").at("id").get<std::string>();
  log.subject.group = j.at("subject").at("group").get<std::string>();
  const json& spec = j.at("spec");
  const auto dist = spec.at("distribution").get<std::string>();
  if (dist.size() != 1) throw AnalysisError("bad distribution id");
  log.spec.distribution = distribution_from_char(dist[0]);
  log.spec.load = load_from_percent(spec.at("load").get<int>());
  log.spec.set_index = spec.at("set").get<int>();
  log.spec.trial_index = spec.at("trial").get<int>();
  log.spec.rng_seed = spec.at("rng_seed").get<std::uint64_t>();
  log.params = sim_params_from_json(j.at("params"));
  log.collection_tolerance = j.at("collection_tolerance").get<double>();
  log.flags.clear();
  for (const json& f : j.at("flags")) log.flags.push_back(vec2(f));
}

void read_summary(const json& j, TrialLog& log) {
  log.duration = j.at("duration").get<double>();
  log.valid = j.at("valid").get<bool>();
  log.invalid_reason = j.at("invalid_reason").get<std::string>();
  TrialState& s = log.final_state;
  s.collected_count = j.at("collected").get<int>();
  s.task_time = j.at("task_time").get<double>();
  s.wall_time = j.at("wall_time").get<double>();
  s.eligible = j.at("eligible").get<bool>();
  s.remaining.clear();
  for (const json& f : j.at("remaining")) {
    if (!f.is_array() || f.size() != 3) throw AnalysisError("expected [index, x, y]");
    s.remaining.push_back({f[0].get<int>(), {f[1].get<double>(), f[2].get<double>()}});
  }
}

}  // namespace

void write_trial_log(std::ostream& out, const TrialLog& log) {
  emit(out, header(log));
  // Samples and events interleaved by time; events at a sample instant follow it.
  std::size_t e = 0;
  for (const ForceSample& s : log.trace) {
    while (e < log.events.size() && log.events[e].t < s.t) {
      const TaskEvent& ev = log.events[e++];
      json rec{{"record", "event"}, {"t", ev.t}, {"type", std::string(to_string(ev.type))}};
      if (ev.type == EventType::Collect) rec["flag"] = ev.flag_index;
      emit(out, rec);
    }
    emit(out, {{"record", "sample"}, {"t", s.t}, {"f", vec(s.force)}});
  }
  for (; e < log.events.size(); ++e) {
    const TaskEvent& ev = log.events[e];
    json rec{{"record", "event"}, {"t", ev.t}, {"type", std::string(to_string(ev.type))}};
    if (ev.type == EventType::Collect) rec["flag"] = ev.flag_index;
    emit(out, rec);
  }
  emit(out, summary(log));
}

void write_trial_log(const std::filesystem::path& path, const TrialLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  write_trial_log(out, log);
  if (!out) throw ConfigError(fmt::format("write failed for {}", path.string()));
}

TrialLog read_trial_log(std::istream& in) {
  TrialLog log;
  bool have_header = false;
  bool have_summary = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto kind = j.at("record").get<std::string>();
      if (have_summary) throw AnalysisError("record after summary");
      if (kind == "header") {
        if (have_header) throw AnalysisError("duplicate header");
        read_header(j, log);
        have_header = true;
        continue;
      }
      if (!have_header) throw AnalysisError("first record must be the header");
      if (kind == "sample") {
        log.trace.push_back({j.at("t").get<double>(), vec3(j.at("f"))});
      } else if (kind == "event") {
        TaskEvent ev;
        ev.t = j.at("t").get<double>();
        ev.type = event_type_from_string(j.at("type").get<std::string>());
        if (ev.type == EventType::Collect) ev.flag_index = j.at("flag").get<int>();
        log.events.push_back(ev);
      } else if (kind == "summary") {
        read_summary(j, log);
        have_summary = true;
      } else {
        throw AnalysisError(fmt::format("unknown record type '{}'", kind));
      }
    } catch (const json::exception& e) {
      throw AnalysisError(fmt::format("trial log line {}: {}", line_no, e.what()));
    } catch (const Error& e) {
      throw AnalysisError(fmt::format("trial log line {}: {}", line_no, e.what()));
    }
  }
  if (!have_header) throw AnalysisError("trial log has no header");
  if (!have_summary) throw AnalysisError("trial log is truncated (no summary)");
  return log;
}

TrialLog read_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalysisError(fmt::format("cannot open {}", path.string()));
  try {
    return read_trial_log(in);
  } catch (const AnalysisError& e) {
    throw AnalysisError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string trial_log_name(const std::string& subject, int trial_index) {
  return fmt::format("{}/trial_{:02d}.jsonl", subject, trial_index);
}

ManifestEntry manifest_entry(const TrialLog& log) {
  ManifestEntry e;
  e.file = trial_log_name(log.subject.id, log.spec.trial_index);
  e.subject = log.subject.id;
  e.group = log.subject.group;
  e.trial_index = log.spec.trial_index;
  e.set_index = log.spec.set_index;
  e.load = log.spec.load;
  e.distribution = log.spec.distribution;
  e.valid = log.valid;
  return e;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest) {
  json trials = json::array();
  for (const ManifestEntry& e : manifest.trials) {
    trials.push_back({{"file", e.file},
                      {"subject", e.subject},
                      {"group", e.group},
                      {"trial", e.trial_index},
                      {"set", e.set_index},
                      {"load", percent(e.load)},
                      {"distribution", std::string(1, to_char(e.distribution))},
                      {"valid", e.valid}});
  }
  const json j{{"schema_version", manifest.schema_version},
               {"mode", manifest.mode},
               {"run", manifest.run},
               {"trials", std::move(trials)}};
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / kManifestFile, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", (dir / kManifestFile).string()));
  out << j.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestFile, std::ios::binary);
  if (!in) throw AnalysisError(fmt::format("no {} in {}", kManifestFile, dir.string()));
  Manifest m;
  try {
    const json j = json::parse(in);
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kLogSchemaVersion)
      throw AnalysisError(fmt::format("unsupported manifest schema version {}", m.schema_version));
    m.mode = j.at("mode").get<std::string>();
    m.run = j.value("run", json::object());
    for (const json& t : j.at("trials")) {
      ManifestEntry e;
      e.file = t.at("file").get<std::string>();
      e.subject = t.at("subject").get<std::string>();
      e.group = t.at("group").get<std::string>();
      e.trial_index = t.at("trial").get<int>();
      e.set_index = t.at("set").get<int>();
      e.load = load_from_percent(t.at("load").get<int>());
      const auto d = t.at("distribution").get<std::string>();
      if (d.size() != 1) throw AnalysisError("bad distribution id in manifest");
      e.distribution = distribution_from_char(d[0]);
      e.valid = t.at("valid").get<bool>();
      m.trials.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw AnalysisError(fmt::format("{}: {}", (dir / kManifestFile).string(), e.what()));
  } catch (const ConfigError& e) {
    throw AnalysisError(fmt::format("{}: {}", (dir / kManifestFile).string(), e.what()));
  }
  return m;
}

std::vector<TrialLog> read_archive(const std::filesystem::path& dir) {
  const Manifest m = read_manifest(dir);
  std::vector<TrialLog> logs;
  logs.reserve(m.trials.size());
  for (const ManifestEntry& e : m.trials) logs.push_back(read_trial_log(dir / e.file));
  return logs;
}

}  // namespace bowlsim
