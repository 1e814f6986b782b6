#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bowlsim/error.hpp"
#include "bowlsim/spectral.hpp"
#include "oracles.hpp"

namespace bowlsim {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> tone(double hz, double seconds, double amplitude = 1.0, double offset = 0.0) {
  std::vector<double> x(static_cast<std::size_t>(std::lround(seconds * 100.0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = offset + amplitude * std::sin(2.0 * kPi * hz * i / 100.0);
  return x;
}

std::vector<double> random_trace(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  double ar = 0.0;
  for (double& v : x) {
    ar = 0.9 * ar + g(rng);
    v = 5.0 + ar;
  }
  return x;
}

std::vector<ForceSample> as_trace(const std::vector<double>& x) {
  std::vector<ForceSample> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = {i / 100.0, {x[i], -2.0 * x[i], 1.0}};
  return t;
}

TEST(FftSpectrum, PureToneIsSingleBin) {
  const Spectrum s = fft_spectrum(tone(2.0, 20.0, 3.0, 7.0), Axis::X, 100.0);
  ASSERT_EQ(s.power.size(), 1001u);
  EXPECT_DOUBLE_EQ(s.frequencies.back(), 50.0);
  EXPECT_DOUBLE_EQ(s.resolution(), 0.05);
  for (std::size_t k = 0; k < s.power.size(); ++k) {
    if (k == 40) {
      EXPECT_NEAR(s.power[k], 1.0, 1e-9);
      EXPECT_NEAR(s.frequencies[k], 2.0, 1e-12);
    } else {
      EXPECT_NEAR(s.power[k], 0.0, 1e-9) << k;
    }
  }
  EXPECT_EQ(s.power[0], 0.0);
}

TEST(FftSpectrum, MatchesDirectTransform) {
  std::mt19937_64 rng(3);
  for (std::size_t n : {520u, 777u, 1024u, 2000u}) {
    const auto x = random_trace(rng, n);
    const Spectrum s = fft_spectrum(x, Axis::Y, 100.0);
    const auto oracle = oracle::naive_power_spectrum(x);
    ASSERT_EQ(s.power.size(), oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k) EXPECT_NEAR(s.power[k], oracle[k], 1e-12) << n << " " << k;
  }
}

TEST(FftSpectrum, ParsevalAndNormalisation) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = random_trace(rng, 520 + 73 * rep);
    const Spectrum s = fft_spectrum(x, Axis::X, 100.0);
    const double oracle = oracle::centered_mean_square(x);
    EXPECT_NEAR(s.raw_power, oracle, 1e-6 * oracle);
    double sum = 0.0;
    for (std::size_t k = 1; k < s.power.size(); ++k) sum += s.power[k];
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(FftSpectrum, ScaleInvariance) {
  std::mt19937_64 rng(8);
  const auto x = random_trace(rng, 1500);
  const Spectrum base = fft_spectrum(x, Axis::X, 100.0);
  for (double k : {1e-3, 0.5, 7.0, 1e4}) {
    std::vector<double> y = x;
    for (double& v : y) v *= k;
    const Spectrum s = fft_spectrum(y, Axis::X, 100.0);
    EXPECT_NEAR(peak_near_resonance(s, 1.88), peak_near_resonance(base, 1.88), 1e-9);
    EXPECT_NEAR(*high_low_ratio(s), *high_low_ratio(base), 1e-9);
  }
}

TEST(FftSpectrum, TraceOverloadSelectsAxis) {
  const auto x = tone(3.0, 10.0);
  const auto trace = as_trace(x);
  const Spectrum sx = fft_spectrum(trace, Axis::X);
  const Spectrum sy = fft_spectrum(trace, Axis::Y);
  for (std::size_t k = 0; k < sx.power.size(); ++k) EXPECT_NEAR(sx.power[k], sy.power[k], 1e-12);
  EXPECT_NEAR(sy.raw_power, 4.0 * sx.raw_power, 1e-9);
}

TEST(FftSpectrum, Errors) {
  EXPECT_THROW(fft_spectrum(std::vector<double>(1000, 3.0), Axis::X, 100.0), DegenerateSpectrum);
  EXPECT_THROW(fft_spectrum(tone(2.0, 5.0), Axis::X, 100.0), AnalysisError);  // 500 samples
  EXPECT_NO_THROW(fft_spectrum(tone(2.0, 5.2), Axis::X, 100.0));
}

TEST(PeakNearResonance, SingleToneInsideAndOutside) {
  // 1.9 Hz sits on a bin for a 10 s trace.
  EXPECT_NEAR(peak_near_resonance(fft_spectrum(tone(1.9, 10.0), Axis::X, 100.0), 1.88), 1.0, 1e-9);
  EXPECT_NEAR(peak_near_resonance(fft_spectrum(tone(5.0, 10.0), Axis::X, 100.0), 1.88), 0.0, 1e-9);
}

TEST(PeakNearResonance, EqualsBruteForceMax) {
  std::vector<double> x(1234);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = i / 100.0;
    x[i] = std::sin(2 * kPi * 0.7 * t) + 0.6 * std::sin(2 * kPi * 2.3 * t + 1.0) + 0.3 * std::cos(2 * kPi * 9.0 * t);
  }
  const Spectrum s = fft_spectrum(x, Axis::X, 100.0);
  double best = 0.0;
  for (std::size_t k = 0; k < s.power.size(); ++k)
    if (std::abs(s.frequencies[k] - 1.88) <= 1.0) best = std::max(best, s.power[k]);
  EXPECT_DOUBLE_EQ(peak_near_resonance(s, 1.88), best);
  EXPECT_LE(best, 1.0);
  EXPECT_LT(best, 1.0 - 1e-6);
}

TEST(HighLowRatio, KnownSplits) {
  Spectrum s;
  s.length = 10;
  s.frequencies = {0.0, 0.5, 1.0, 1.5};
  s.power = {0.0, 0.5, 0.25, 0.25};
  EXPECT_DOUBLE_EQ(*high_low_ratio(s), 1.0);
  EXPECT_NEAR(*high_low_ratio(fft_spectrum(tone(0.5, 10.0), Axis::X, 100.0)), 0.0, 1e-9);
  EXPECT_FALSE(high_low_ratio(fft_spectrum(tone(3.0, 10.0), Axis::X, 100.0)).has_value());
}

TEST(HighLowRatio, TwoPassOracle) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const Spectrum s = fft_spectrum(random_trace(rng, 900 + rep), Axis::X, 100.0);
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 1; k < s.power.size(); ++k) (s.frequencies[k] < 1.0 ? lo : hi) += s.power[k];
    EXPECT_NEAR(*high_low_ratio(s), hi / lo, 1e-12 * (hi / lo));
  }
}

TEST(TimePerTarget, Examples) {
  TrialLog log;
  log.final_state.task_time = 20.0;
  log.final_state.collected_count = 10;
  EXPECT_DOUBLE_EQ(*time_per_target(log), 2.0);
  log.final_state.task_time = 5.2;
  log.final_state.collected_count = 20;
  EXPECT_DOUBLE_EQ(*time_per_target(log), 0.26);
  log.final_state.collected_count = 0;
  EXPECT_FALSE(time_per_target(log).has_value());
}

TEST(AggregateSpectra, IdentityAndMean) {
  std::mt19937_64 rng(21);
  const Spectrum a = fft_spectrum(random_trace(rng, 2000), Axis::X, 100.0);
  const Spectrum b = fft_spectrum(random_trace(rng, 1000), Axis::X, 100.0);
  const Spectrum c = fft_spectrum(random_trace(rng, 1500), Axis::X, 100.0);

  const std::vector<Spectrum> one{a};
  const Spectrum single = aggregate_spectra(one);
  ASSERT_EQ(single.power.size(), a.power.size());  // 0.05 Hz grid equals the 20 s native grid
  for (std::size_t k = 0; k < a.power.size(); ++k) EXPECT_NEAR(single.power[k], a.power[k], 1e-12);

  const std::vector<Spectrum> twins{b, b};
  const Spectrum tw = aggregate_spectra(twins);
  const auto rb = resample_spectrum(b);
  for (std::size_t k = 0; k < rb.size(); ++k) EXPECT_NEAR(tw.power[k], rb[k], 1e-12);

  const std::vector<Spectrum> cell{a, b, c};
  const Spectrum mean = aggregate_spectra(cell);
  const auto ra = resample_spectrum(a), rc = resample_spectrum(c);
  for (std::size_t k = 0; k < mean.power.size(); ++k)
    EXPECT_NEAR(mean.power[k], (ra[k] + rb[k] + rc[k]) / 3.0, 1e-12);
  EXPECT_THROW(aggregate_spectra(std::vector<Spectrum>{}), AnalysisError);
}

TEST(ResampleSpectrum, LinearInterpolation) {
  const Spectrum b = fft_spectrum(tone(2.0, 10.0), Axis::X, 100.0);  // 0.1 Hz bins
  const auto r = resample_spectrum(b);
  EXPECT_NEAR(r[40], 1.0, 1e-9);  // 2.00 Hz
  EXPECT_NEAR(r[39], 0.5, 1e-9);  // 1.95 Hz, halfway to 1.9 Hz
  EXPECT_NEAR(r[41], 0.5, 1e-9);
}

TEST(TrialMetrics, MissingValuesCarryNotes) {
  TrialLog log;
  log.trace.resize(1000);
  for (std::size_t i = 0; i < log.trace.size(); ++i) log.trace[i] = {i / 100.0, {1.0, 0.0, 0.0}};
  const TrialMetrics m = compute_trial_metrics(log);
  EXPECT_FALSE(m.time_per_target.has_value());
  EXPECT_FALSE(m.peak_near_resonance_x.has_value());
  EXPECT_FALSE(m.high_low_ratio_y.has_value());
  EXPECT_GE(m.notes.size(), 3u);
}

}  // namespace
}  // namespace bowlsim
