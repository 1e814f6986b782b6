#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "bowlsim/anova.hpp"
#include "bowlsim/config.hpp"
#include "bowlsim/log_io.hpp"
#include "bowlsim/spectral.hpp"

namespace bowlsim {

struct CohortSpec {
  int subjects_per_group = 6;
  std::uint64_t seed = 0;
  std::vector<std::string> groups{"control", "stroke"};  // each must name a profile
  unsigned threads = 0;                                   // 0: hardware concurrency
};

struct SyntheticSubject {
  SubjectInfo info;
  double max_sabd_force = 40.0;
  std::uint64_t protocol_seed = 0;
  ControllerParams controller;
};

/// Subjects in group-major order. Each gets its own protocol seed, noise
/// seed and a jittered copy of its group's profile (onset delay and
/// bandwidth scaled by factors drawn uniformly from 1 +- jitter).
std::vector<SyntheticSubject> make_cohort(const SessionConfig& config, const CohortSpec& spec);

/// Runs the 45-trial protocol for one subject.
std::vector<TrialLog> simulate_subject(const SessionConfig& config, const SyntheticSubject& subject);

/// Whole cohort in memory, subjects in make_cohort order.
std::vector<TrialLog> simulate_cohort(const SessionConfig& config, const CohortSpec& spec);

/// Writes one log per trial and the manifest under `out`.
Manifest simulate_cohort_to(const SessionConfig& config, const CohortSpec& spec, const std::filesystem::path& out);

enum class Metric { TimePerTarget, PeakX, PeakY, RatioX, RatioY };

inline constexpr std::array<Metric, 5> kMetrics{Metric::TimePerTarget, Metric::PeakX, Metric::PeakY, Metric::RatioX,
                                                Metric::RatioY};

std::string_view metric_name(Metric m);

struct TrialRecord {
  SubjectInfo subject;
  TrialSpec spec;
  bool valid = true;
  std::string invalid_reason;
  TrialMetrics metrics;

  [[nodiscard]] std::optional<double> value(Metric m) const;
};

std::vector<TrialRecord> compute_records(std::span<const TrialLog> logs, unsigned threads = 0);

/// One value per subject x load x distribution: the mean over that cell's
/// valid trials where the metric exists. Cells with no usable trial are left
/// out, which the ANOVA reports as an unbalanced design.
std::vector<CellData> reduce_cells(std::span<const TrialRecord> records, Metric metric);

struct AnovaTable {
  std::string scope;  // "all" for the mixed design, else the group label
  AnovaResult result;
};

using SpectrumKey = std::tuple<std::string, LoadLevel, Axis>;  // group, load, axis

struct AnalysisOutputs {
  std::vector<TrialRecord> records;
  std::map<SpectrumKey, Spectrum> spectra;
  std::map<Metric, std::vector<AnovaTable>> anova;
  std::vector<std::string> warnings;
  bool design_error = false;  // some ANOVA was refused because of missing cells
};

AnalysisOutputs analyze_logs(std::span<const TrialLog> logs, unsigned threads = 0);

struct AnalyzeOptions {
  bool per_trial_spectra = false;
  unsigned threads = 0;
};

/// metrics.csv, spectra.csv, anova_<metric>.csv, data_quality.csv and, on
/// request, trial_spectra.csv.
void write_analysis(const std::filesystem::path& out, const AnalysisOutputs& outputs,
                    std::span<const TrialLog> logs, const AnalyzeOptions& options);

AnalysisOutputs analyze_archive(const std::filesystem::path& in, const std::filesystem::path& out,
                                const AnalyzeOptions& options = {});

/// Human-readable 45-row table: set, trial, load, distribution.
std::string protocol_table(std::uint64_t seed);

}  // namespace bowlsim
