#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bowlsim/task.hpp"

namespace bowlsim {

inline constexpr double kAlpha = 0.05;

/// One subject-level cell of the load x task design.
struct CellData {
  std::string subject;
  std::string group;
  LoadLevel load = LoadLevel::Zero;
  DistributionId distribution = DistributionId::B;
  double value = 0.0;
};

struct AnovaRow {
  std::string effect;  // "group", "load", "task", "group:load", "load:task", ...
  double ss = 0.0;
  double ss_error = 0.0;
  double df_num = 0.0;
  double df_den = 0.0;
  double f = 0.0;
  double p = 1.0;
  // Sphericity of the within-subject part of the effect; empty for "group"
  // and where the test is not computable (too few subjects for the contrast
  // dimension, singular covariance).
  std::optional<double> mauchly_w;
  std::optional<double> mauchly_p;
  std::optional<double> gg_epsilon;
  std::optional<double> p_gg;
};

struct AnovaResult {
  std::string design;  // "mixed" or "rm"
  int subjects = 0;
  std::vector<AnovaRow> rows;

  /// Throws DesignError for an unknown effect name.
  [[nodiscard]] const AnovaRow& row(std::string_view effect) const;
};

/// Within-subject effects of the load x task design.
enum class WithinEffect { Load, Task, LoadTask };

std::string_view to_string(WithinEffect e);

struct SphericityTest {
  double w = 1.0;
  double p = 1.0;
  double chi_square = 0.0;
  double df = 0.0;
};

/// Symmetric p x p matrix, row-major.
struct SymMatrix {
  std::size_t dim = 0;
  std::vector<double> values;

  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : dim(n), values(n * n, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return values[i * dim + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
};

/// Two-way (load x task) repeated-measures ANOVA for one group. Requires a
/// balanced design with at least two subjects; throws DesignError otherwise
/// and DegenerateData when every value is identical.
AnovaResult rm_anova_2way(std::span<const CellData> data);

/// group (between) x load x task (within). Requires at least two groups and
/// two subjects per group.
AnovaResult mixed_anova(std::span<const CellData> data);

/// Mauchly's test on the orthonormal-contrast covariance of one within
/// effect, pooled within groups. Throws DegenerateData if the covariance is
/// singular, DesignError if there are not more subjects than contrasts.
SphericityTest mauchly_test(std::span<const CellData> data, WithinEffect effect);

/// Greenhouse-Geisser epsilon of one within effect.
double gg_epsilon(std::span<const CellData> data, WithinEffect effect);

/// Mauchly's W and its chi-square p-value from a contrast covariance (or
/// SSCP) matrix with `df` degrees of freedom.
SphericityTest mauchly_from_covariance(const SymMatrix& s, double df);

/// (sum lambda)^2 / (p sum lambda^2) over the eigenvalues of `s`.
double gg_epsilon_from_covariance(const SymMatrix& s);

/// Contrast covariance of a within effect, pooled within groups (divided by
/// the error degrees of freedom).
SymMatrix contrast_covariance(std::span<const CellData> data, WithinEffect effect);

/// Upper tail of the F distribution; df may be fractional.
double f_upper_tail(double f, double df_num, double df_den);

/// Upper tail of the chi-square distribution.
double chi_square_upper_tail(double x, double df);

/// Orthonormal Helmert contrasts for k levels: (k-1) x k, row-major.
std::vector<double> helmert_contrasts(std::size_t k);

}  // namespace bowlsim
