#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bowlsim/dynamics.hpp"
#include "bowlsim/task.hpp"

namespace bowlsim {

enum class Axis { X, Y };

std::string_view to_string(Axis axis);

/// Shortest trace accepted for analysis: 5.2 s at 100 Hz.
inline constexpr std::size_t kMinTraceSamples = 520;
inline constexpr double kHighLowCutoffHz = 1.0;
inline constexpr double kResonanceWindowHz = 1.0;
inline constexpr double kAggregateGridStepHz = 0.05;

/// One-sided power spectrum of a force component.
///
/// power[k] is the mean-square signal power in bin k (|X_k|^2 / N^2, doubled
/// for bins that stand for both +f and -f), then rescaled so that the bins
/// above DC sum to one. power[0] is always zero: the DC offset from static
/// loading does not enter any metric.
struct Spectrum {
  Axis axis = Axis::X;
  double sample_rate = 100.0;
  std::size_t length = 0;      // samples in the source trace
  double raw_power = 0.0;      // non-DC mean-square power before unit normalisation
  std::vector<double> frequencies;
  std::vector<double> power;

  [[nodiscard]] double resolution() const { return sample_rate / static_cast<double>(length); }
};

/// Transform of one axis of a uniformly sampled trace. Throws AnalysisError
/// for traces shorter than kMinTraceSamples and DegenerateSpectrum when the
/// trace has no energy outside DC.
Spectrum fft_spectrum(std::span<const ForceSample> trace, Axis axis, double sample_rate = 100.0);

/// Same, from raw samples.
Spectrum fft_spectrum(std::span<const double> samples, Axis axis, double sample_rate);

/// Maximum bin power with |f - f_res| <= window. Throws AnalysisError if the
/// window holds no bins.
double peak_near_resonance(const Spectrum& spec, double f_res, double window = kResonanceWindowHz);

/// Power at f >= cutoff over power at 0 < f < cutoff. Returns nullopt when
/// the low band holds no energy.
std::optional<double> high_low_ratio(const Spectrum& spec, double cutoff = kHighLowCutoffHz);

/// Task-time per collected flag; nullopt when nothing was collected.
std::optional<double> time_per_target(const TrialLog& log);

/// Linear interpolation of a spectrum onto 0, step, 2 step, ... up to the
/// Nyquist frequency; bins beyond the source range are zero.
std::vector<double> resample_spectrum(const Spectrum& spec, double step = kAggregateGridStepHz);

/// Per-bin arithmetic mean of spectra after resampling to a common grid.
/// Throws AnalysisError for an empty input.
Spectrum aggregate_spectra(std::span<const Spectrum> spectra, double step = kAggregateGridStepHz);

struct TrialMetrics {
  int flags_collected = 0;
  double task_time = 0.0;
  std::optional<double> time_per_target;
  std::optional<double> peak_near_resonance_x;
  std::optional<double> peak_near_resonance_y;
  std::optional<double> high_low_ratio_x;
  std::optional<double> high_low_ratio_y;
  std::vector<std::string> notes;  // why a metric is missing
};

/// All metrics of one logged trial. Analysis problems never throw; they leave
/// the affected metric empty and add a note.
TrialMetrics compute_trial_metrics(const TrialLog& log);

}  // namespace bowlsim
