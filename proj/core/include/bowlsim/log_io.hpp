#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bowlsim/task.hpp"

namespace bowlsim {

inline constexpr int kLogSchemaVersion = 1;

/// Trial logs are JSON Lines: one "header" record, then "sample" and "event"
/// records in time order, then one "summary" record. Every record carries
/// "record"; the header carries "schema_version".
void write_trial_log(std::ostream& out, const TrialLog& log);
void write_trial_log(const std::filesystem::path& path, const TrialLog& log);

/// Throws AnalysisError on malformed input or an unsupported schema version.
TrialLog read_trial_log(std::istream& in);
TrialLog read_trial_log(const std::filesystem::path& path);

/// One line of the session manifest.
struct ManifestEntry {
  std::string file;  // relative to the archive root, '/' separated
  std::string subject;
  std::string group;
  int trial_index = 0;
  int set_index = 0;
  LoadLevel load = LoadLevel::Zero;
  DistributionId distribution = DistributionId::B;
  bool valid = true;
};

struct Manifest {
  int schema_version = kLogSchemaVersion;
  std::string mode = "headless";  // or "live"
  nlohmann::json run = nlohmann::json::object();  // free-form provenance (seeds, config)
  std::vector<ManifestEntry> trials;
};

inline constexpr const char* kManifestFile = "manifest.json";

/// Relative path of a trial log inside an archive: <subject>/trial_XX.jsonl.
std::string trial_log_name(const std::string& subject, int trial_index);

ManifestEntry manifest_entry(const TrialLog& log);

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& dir);

/// Reads every log listed in the manifest of `dir`, in manifest order.
std::vector<TrialLog> read_archive(const std::filesystem::path& dir);

}  // namespace bowlsim
