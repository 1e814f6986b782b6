#include "bowlsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <cmath>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "bowlsim/error.hpp"
#include "bowlsim/players.hpp"
#include "bowlsim/seed.hpp"
#include "bowlsim/simulation.hpp"

namespace bowlsim {

namespace {

// Runs body(i) for i in [0, n) on a small pool; results go to caller-owned
// slots so the output never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::string num(double v) { return fmt::format("{}", v); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::vector<AnovaTable> run_anova(std::span<const TrialRecord> records, Metric metric,
                                  std::vector<std::string>& warnings, bool& design_error) {
  std::vector<AnovaTable> tables;
  const std::vector<CellData> cells = reduce_cells(records, metric);
  std::map<std::string, std::set<std::string>> subjects_by_group;
  for (const CellData& c : cells) subjects_by_group[c.group].insert(c.subject);

  std::size_t total_subjects = 0;
  for (const auto& [g, s] : subjects_by_group) total_subjects += s.size();
  const std::string name(metric_name(metric));
  if (total_subjects < 2) {
    warnings.push_back(fmt::format("{}: fewer than two subjects, ANOVA skipped", name));
    return tables;
  }

  const auto attempt = [&](const std::string& scope, auto&& fn) {
    try {
      tables.push_back({scope, fn()});
    } catch (const DesignError& e) {
      design_error = true;
      warnings.push_back(fmt::format("{} ({}): design error: {}", name, scope, e.what()));
    } catch (const DegenerateData& e) {
      warnings.push_back(fmt::format("{} ({}): degenerate data: {}", name, scope, e.what()));
    }
  };

  const bool mixed_ok = subjects_by_group.size() >= 2 &&
                        std::all_of(subjects_by_group.begin(), subjects_by_group.end(),
                                    [](const auto& kv) { return kv.second.size() >= 2; });
  if (mixed_ok) {
    attempt("all", [&] { return mixed_anova(cells); });
  } else if (subjects_by_group.size() >= 2) {
    warnings.push_back(fmt::format("{}: a group has fewer than two subjects, mixed ANOVA skipped", name));
  }
  for (const auto& [group, subjects] : subjects_by_group) {
    if (subjects.size() < 2) {
      warnings.push_back(fmt::format("{} ({}): fewer than two subjects, ANOVA skipped", name, group));
      continue;
    }
    std::vector<CellData> part;
    std::copy_if(cells.begin(), cells.end(), std::back_inserter(part),
                 [&](const CellData& c) { return c.group == group; });
    attempt(group, [&] { return rm_anova_2way(part); });
  }
  return tables;
}

}  // namespace

std::vector<SyntheticSubject> make_cohort(const SessionConfig& config, const CohortSpec& spec) {
  if (spec.subjects_per_group < 1) throw ConfigError("subjects per group must be >= 1");
  if (spec.groups.empty()) throw ConfigError("cohort needs at least one group");
  std::vector<SyntheticSubject> cohort;
  std::uint64_t index = 0;
  for (const std::string& group : spec.groups) {
    const ControllerParams& base = config.profile(group);
    const auto sabd = config.cohort.max_sabd_force.find(group);
    for (int k = 1; k <= spec.subjects_per_group; ++k, ++index) {
      SyntheticSubject s;
      s.info = {fmt::format("{}_{:02d}", group, k), group};
      s.max_sabd_force = sabd != config.cohort.max_sabd_force.end() ? sabd->second : config.max_sabd_force;
      s.protocol_seed = derive_seed(spec.seed, 3 * index);
      s.controller = base;
      s.controller.rng_seed = derive_seed(spec.seed, 3 * index + 1);
      s.controller.max_force = s.max_sabd_force;
      const std::uint64_t jitter_seed = derive_seed(spec.seed, 3 * index + 2);
      const double j = config.cohort.jitter;
      s.controller.onset_delay *= 1.0 + j * (2.0 * unit_uniform(mix_seed(jitter_seed)) - 1.0);
      s.controller.bandwidth *= 1.0 + j * (2.0 * unit_uniform(mix_seed(jitter_seed + 1)) - 1.0);
      s.controller.validate();
      cohort.push_back(std::move(s));
    }
  }
  return cohort;
}

std::vector<TrialLog> simulate_subject(const SessionConfig& config, const SyntheticSubject& subject) {
  TaskConfig task = config.task;
  task.max_sabd_force = subject.max_sabd_force;
  const Protocol protocol = generate_protocol(subject.protocol_seed);
  SyntheticPlayer player(subject.controller);
  std::vector<TrialLog> logs;
  logs.reserve(protocol.trials.size());
  for (const TrialSpec& spec : protocol.trials)
    logs.push_back(run_trial(subject.info, spec, player, config.sim, task, config.workspace));
  return logs;
}

std::vector<TrialLog> simulate_cohort(const SessionConfig& config, const CohortSpec& spec) {
  const std::vector<SyntheticSubject> cohort = make_cohort(config, spec);
  std::vector<std::vector<TrialLog>> per_subject(cohort.size());
  parallel_for(cohort.size(), spec.threads, [&](std::size_t i) { per_subject[i] = simulate_subject(config, cohort[i]); });
  std::vector<TrialLog> logs;
  for (auto& v : per_subject)
    for (auto& l : v) logs.push_back(std::move(l));
  return logs;
}

Manifest simulate_cohort_to(const SessionConfig& config, const CohortSpec& spec, const std::filesystem::path& out) {
  const std::vector<SyntheticSubject> cohort = make_cohort(config, spec);
  std::vector<std::vector<ManifestEntry>> entries(cohort.size());
  parallel_for(cohort.size(), spec.threads, [&](std::size_t i) {
    for (const TrialLog& log : simulate_subject(config, cohort[i])) {
      ManifestEntry e = manifest_entry(log);
      write_trial_log(out / e.file, log);
      entries[i].push_back(std::move(e));
    }
  });

  Manifest m;
  m.mode = "headless";
  m.run = {{"seed", spec.seed}, {"subjects_per_group", spec.subjects_per_group}, {"groups", spec.groups},
           {"config", to_json(config)}};
  nlohmann::json subjects = nlohmann::json::array();
  for (const SyntheticSubject& s : cohort) {
    subjects.push_back({{"id", s.info.id},
                        {"group", s.info.group},
                        {"max_sabd_force", s.max_sabd_force},
                        {"protocol_seed", s.protocol_seed},
                        {"controller", to_json(s.controller)}});
  }
  m.run["subjects"] = std::move(subjects);
  for (auto& v : entries)
    for (auto& e : v) m.trials.push_back(std::move(e));
  write_manifest(out, m);
  return m;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::TimePerTarget: return "time_per_target";
    case Metric::PeakX: return "peak_near_resonance_x";
    case Metric::PeakY: return "peak_near_resonance_y";
    case Metric::RatioX: return "high_low_ratio_x";
    case Metric::RatioY: return "high_low_ratio_y";
  }
  return "unknown";
}

std::optional<double> TrialRecord::value(Metric m) const {
  if (!valid) return std::nullopt;
  switch (m) {
    case Metric::TimePerTarget: return metrics.time_per_target;
    case Metric::PeakX: return metrics.peak_near_resonance_x;
    case Metric::PeakY: return metrics.peak_near_resonance_y;
    case Metric::RatioX: return metrics.high_low_ratio_x;
    case Metric::RatioY: return metrics.high_low_ratio_y;
  }
  return std::nullopt;
}

std::vector<TrialRecord> compute_records(std::span<const TrialLog> logs, unsigned threads) {
  std::vector<TrialRecord> records(logs.size());
  parallel_for(logs.size(), threads, [&](std::size_t i) {
    const TrialLog& log = logs[i];
    records[i] = {log.subject, log.spec, log.valid, log.invalid_reason, compute_trial_metrics(log)};
  });
  return records;
}

std::vector<CellData> reduce_cells(std::span<const TrialRecord> records, Metric metric) {
  struct Acc {
    std::string group;
    double sum = 0.0;
    int n = 0;
  };
  std::map<std::tuple<std::string, LoadLevel, DistributionId>, Acc> acc;
  for (const TrialRecord& r : records) {
    if (r.spec.distribution == DistributionId::A) continue;
    const auto v = r.value(metric);
    if (!v || !std::isfinite(*v)) continue;
    Acc& a = acc[{r.subject.id, r.spec.load, r.spec.distribution}];
    a.group = r.subject.group;
    a.sum += *v;
    ++a.n;
  }
  std::vector<CellData> cells;
  cells.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    cells.push_back({std::get<0>(key), a.group, std::get<1>(key), std::get<2>(key), a.sum / a.n});
  }
  return cells;
}

AnalysisOutputs analyze_logs(std::span<const TrialLog> logs, unsigned threads) {
  AnalysisOutputs out;
  out.records = compute_records(logs, threads);

  std::map<SpectrumKey, std::vector<Spectrum>> by_key;
  for (const TrialLog& log : logs) {
    if (!log.valid) continue;
    for (Axis axis : {Axis::X, Axis::Y}) {
      try {
        by_key[{log.subject.group, log.spec.load, axis}].push_back(
            fft_spectrum(log.trace, axis, log.params.record_rate));
      } catch (const AnalysisError&) {
        // Reported per trial through the metric notes.
      }
    }
  }
  for (const auto& [key, spectra] : by_key) out.spectra.emplace(key, aggregate_spectra(spectra));

  for (Metric m : kMetrics) out.anova[m] = run_anova(out.records, m, out.warnings, out.design_error);
  return out;
}

void write_analysis(const std::filesystem::path& dir, const AnalysisOutputs& outputs, std::span<const TrialLog> logs,
                    const AnalyzeOptions& options) {
  std::filesystem::create_directories(dir);

  {
    auto out = open_csv(dir / "metrics.csv");
    out << "subject,group,trial,set,load,distribution,valid,flags_collected,task_time,time_per_target,"
           "peak_near_resonance_x,peak_near_resonance_y,high_low_ratio_x,high_low_ratio_y\n";
    for (const TrialRecord& r : outputs.records) {
      const TrialMetrics& m = r.metrics;
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(r.subject.id),
                         csv_field(r.subject.group), r.spec.trial_index, r.spec.set_index, percent(r.spec.load),
                         to_char(r.spec.distribution), r.valid ? 1 : 0, m.flags_collected, num(m.task_time),
                         num(m.time_per_target), num(m.peak_near_resonance_x), num(m.peak_near_resonance_y),
                         num(m.high_low_ratio_x), num(m.high_low_ratio_y));
    }
  }

  {
    auto out = open_csv(dir / "spectra.csv");
    out << "group,load,axis,frequency,power\n";
    for (const auto& [key, spec] : outputs.spectra) {
      const auto& [group, load, axis] = key;
      for (std::size_t k = 0; k < spec.power.size(); ++k)
        out << fmt::format("{},{},{},{},{}\n", csv_field(group), percent(load), to_string(axis),
                           num(spec.frequencies[k]), num(spec.power[k]));
    }
  }

  for (Metric metric : kMetrics) {
    auto out = open_csv(dir / fmt::format("anova_{}.csv", metric_name(metric)));
    out << "scope,design,subjects,effect,ss,ss_error,df_num,df_den,F,p,mauchly_W,mauchly_p,gg_epsilon,p_gg\n";
    const auto it = outputs.anova.find(metric);
    if (it == outputs.anova.end()) continue;
    for (const AnovaTable& t : it->second) {
      for (const AnovaRow& row : t.result.rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(t.scope), t.result.design,
                           t.result.subjects, row.effect, num(row.ss), num(row.ss_error), num(row.df_num),
                           num(row.df_den), num(row.f), num(row.p), num(row.mauchly_w), num(row.mauchly_p),
                           num(row.gg_epsilon), num(row.p_gg));
      }
    }
  }

  {
    auto out = open_csv(dir / "data_quality.csv");
    out << "subject,group,trial,load,distribution,issue\n";
    for (const TrialRecord& r : outputs.records) {
      for (const std::string& note : r.metrics.notes)
        out << fmt::format("{},{},{},{},{},{}\n", csv_field(r.subject.id), csv_field(r.subject.group),
                           r.spec.trial_index, percent(r.spec.load), to_char(r.spec.distribution), csv_field(note));
    }
    for (const std::string& w : outputs.warnings) out << fmt::format(",,,,,{}\n", csv_field(w));
  }

  if (options.per_trial_spectra) {
    auto out = open_csv(dir / "trial_spectra.csv");
    out << "subject,trial,axis,frequency,power\n";
    for (const TrialLog& log : logs) {
      if (!log.valid) continue;
      for (Axis axis : {Axis::X, Axis::Y}) {
        try {
          const Spectrum s = fft_spectrum(log.trace, axis, log.params.record_rate);
          for (std::size_t k = 0; k < s.power.size(); ++k)
            out << fmt::format("{},{},{},{},{}\n", csv_field(log.subject.id), log.spec.trial_index, to_string(axis),
                               num(s.frequencies[k]), num(s.power[k]));
        } catch (const AnalysisError&) {
        }
      }
    }
  }
}

AnalysisOutputs analyze_archive(const std::filesystem::path& in, const std::filesystem::path& out,
                                const AnalyzeOptions& options) {
  const std::vector<TrialLog> logs = read_archive(in);
  AnalysisOutputs outputs = analyze_logs(logs, options.threads);
  write_analysis(out, outputs, logs, options);
  return outputs;
}

std::string protocol_table(std::uint64_t seed) {
  const Protocol p = generate_protocol(seed);
  validate_protocol(p);
  std::string out = fmt::format("protocol seed {}\n{:>3}  {:>5}  {:>4}  {}\n", seed, "set", "trial", "load", "distribution");
  for (const TrialSpec& t : p.trials)
    out += fmt::format("{:>3}  {:>5}  {:>3}%  {}\n", t.set_index, t.trial_index, percent(t.load), to_char(t.distribution));
  return out;
}

}  // namespace bowlsim
