#include "bowlsim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

#include "bowlsim/error.hpp"

namespace bowlsim {

namespace {

// FFTW's planner is not thread-safe; execution with a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Squared magnitudes |X_k|^2 for k = 0..N/2.
std::vector<double> squared_magnitudes(std::span<const double> samples) {
  const auto n = static_cast<int>(samples.size());
  const int bins = n / 2 + 1;
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(static_cast<std::size_t>(n)));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(static_cast<std::size_t>(bins)));
  if (!in || !out) throw std::bad_alloc();

  fftw_plan plan = nullptr;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw AnalysisError("FFTW could not create a plan");
  std::copy(samples.begin(), samples.end(), in.get());
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  std::vector<double> mag2(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    const double re = out.get()[k][0];
    const double im = out.get()[k][1];
    mag2[static_cast<std::size_t>(k)] = re * re + im * im;
  }
  return mag2;
}

constexpr double kBinSlack = 1e-9;
constexpr double kRoundoffPower = 1e-12;

}  // namespace

std::string_view to_string(Axis axis) { return axis == Axis::X ? "x" : "y"; }

Spectrum fft_spectrum(std::span<const double> samples, Axis axis, double sample_rate) {
  if (samples.size() < kMinTraceSamples) {
    throw AnalysisError(fmt::format("trace has {} samples, need at least {}", samples.size(), kMinTraceSamples));
  }
  if (!(sample_rate > 0.0)) throw AnalysisError("sample rate must be positive");

  const std::size_t n = samples.size();
  const double nn = static_cast<double>(n);
  const std::vector<double> mag2 = squared_magnitudes(samples);

  Spectrum spec;
  spec.axis = axis;
  spec.sample_rate = sample_rate;
  spec.length = n;
  spec.frequencies.resize(mag2.size());
  spec.power.assign(mag2.size(), 0.0);

  double total = 0.0;
  for (std::size_t k = 0; k < mag2.size(); ++k) {
    spec.frequencies[k] = static_cast<double>(k) * sample_rate / nn;
    if (k == 0) continue;
    const bool mirrored = 2 * k != n;  // the Nyquist bin of an even-length trace has no twin
    spec.power[k] = (mirrored ? 2.0 : 1.0) * mag2[k] / (nn * nn);
    total += spec.power[k];
  }

  const double dc = mag2[0] / (nn * nn);
  if (!(total > 1e-20 * dc) || !(total > std::numeric_limits<double>::min())) {
    throw DegenerateSpectrum("trace has no energy outside DC");
  }
  spec.raw_power = total;
  for (std::size_t k = 1; k < spec.power.size(); ++k) spec.power[k] /= total;
  return spec;
}

Spectrum fft_spectrum(std::span<const ForceSample> trace, Axis axis, double sample_rate) {
  std::vector<double> samples;
  samples.reserve(trace.size());
  for (const ForceSample& s : trace) samples.push_back(axis == Axis::X ? s.force.x : s.force.y);
  return fft_spectrum(std::span<const double>(samples), axis, sample_rate);
}

double peak_near_resonance(const Spectrum& spec, double f_res, double window) {
  double best = -1.0;
  for (std::size_t k = 1; k < spec.power.size(); ++k) {
    if (std::abs(spec.frequencies[k] - f_res) <= window + kBinSlack) best = std::max(best, spec.power[k]);
  }
  if (best < 0.0) throw AnalysisError(fmt::format("no spectral bins within {} Hz of {} Hz", window, f_res));
  return best;
}

std::optional<double> high_low_ratio(const Spectrum& spec, double cutoff) {
  double high = 0.0;
  double low = 0.0;
  for (std::size_t k = 1; k < spec.power.size(); ++k) {
    if (spec.frequencies[k] >= cutoff - kBinSlack) {
      high += spec.power[k];
    } else {
      low += spec.power[k];
    }
  }
  // Bins sum to one, so anything this small is transform round-off.
  if (!(low > kRoundoffPower)) return std::nullopt;
  return high / low;
}

std::optional<double> time_per_target(const TrialLog& log) {
  if (log.final_state.collected_count <= 0) return std::nullopt;
  return log.final_state.task_time / log.final_state.collected_count;
}

std::vector<double> resample_spectrum(const Spectrum& spec, double step) {
  if (!(step > 0.0)) throw AnalysisError("resampling step must be positive");
  const double nyquist = 0.5 * spec.sample_rate;
  const auto points = static_cast<std::size_t>(std::floor(nyquist / step + kBinSlack)) + 1;

  std::vector<double> out(points, 0.0);
  const auto& f = spec.frequencies;
  const auto& p = spec.power;
  if (f.empty()) return out;
  std::size_t k = 0;
  for (std::size_t j = 0; j < points; ++j) {
    const double x = static_cast<double>(j) * step;
    if (x > f.back() + kBinSlack) break;
    while (k + 1 < f.size() && f[k + 1] < x) ++k;
    if (k + 1 >= f.size() || std::abs(x - f[k]) <= kBinSlack) {
      out[j] = p[k];
    } else if (std::abs(x - f[k + 1]) <= kBinSlack) {
      out[j] = p[k + 1];
    } else {
      const double w = (x - f[k]) / (f[k + 1] - f[k]);
      out[j] = (1.0 - w) * p[k] + w * p[k + 1];
    }
  }
  return out;
}

Spectrum aggregate_spectra(std::span<const Spectrum> spectra, double step) {
  if (spectra.empty()) throw AnalysisError("cannot aggregate an empty group of spectra");

  Spectrum out;
  out.axis = spectra.front().axis;
  out.sample_rate = spectra.front().sample_rate;
  out.length = static_cast<std::size_t>(std::llround(out.sample_rate / step));

  std::vector<double> sum;
  double raw = 0.0;
  for (const Spectrum& s : spectra) {
    if (s.sample_rate != out.sample_rate) throw AnalysisError("spectra have different sample rates");
    const std::vector<double> r = resample_spectrum(s, step);
    if (sum.empty()) sum.assign(r.size(), 0.0);
    for (std::size_t j = 0; j < r.size(); ++j) sum[j] += r[j];
    raw += s.raw_power;
  }
  const double count = static_cast<double>(spectra.size());
  out.frequencies.resize(sum.size());
  out.power.resize(sum.size());
  for (std::size_t j = 0; j < sum.size(); ++j) {
    out.frequencies[j] = static_cast<double>(j) * step;
    out.power[j] = sum[j] / count;
  }
  out.raw_power = raw / count;
  return out;
}

TrialMetrics compute_trial_metrics(const TrialLog& log) {
  TrialMetrics m;
  m.flags_collected = log.final_state.collected_count;
  m.task_time = log.final_state.task_time;
  if (!log.valid) {
    m.notes.push_back("invalid trial: " + log.invalid_reason);
    return m;
  }

  m.time_per_target = time_per_target(log);
  if (!m.time_per_target) m.notes.push_back("time_per_target undefined: no flags collected");

  const double f_res = log.params.resonance_hz();
  for (Axis axis : {Axis::X, Axis::Y}) {
    auto& peak = axis == Axis::X ? m.peak_near_resonance_x : m.peak_near_resonance_y;
    auto& ratio = axis == Axis::X ? m.high_low_ratio_x : m.high_low_ratio_y;
    try {
      const Spectrum spec = fft_spectrum(log.trace, axis, log.params.record_rate);
      peak = peak_near_resonance(spec, f_res);
      ratio = high_low_ratio(spec);
      if (!ratio) m.notes.push_back(fmt::format("high_low_ratio_{} undefined: no low-frequency energy", to_string(axis)));
    } catch (const AnalysisError& e) {
      m.notes.push_back(fmt::format("{} spectrum: {}", to_string(axis), e.what()));
    }
  }
  return m;
}

}  // namespace bowlsim
