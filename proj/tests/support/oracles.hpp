#pragma once

// Reference implementations used only by tests. They follow textbook
// definitions directly and share no code with the library.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bowlsim/anova.hpp"

namespace oracle {

/// O(N^2) DFT: one-sided mean-square power per bin, bins 0..N/2, with the
/// non-DC bins scaled to sum to one and DC zeroed.
std::vector<double> naive_power_spectrum(const std::vector<double>& x);

/// Mean-square power of the mean-removed signal.
double centered_mean_square(const std::vector<double>& x);

/// Regularised incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(F > f) for F(d1, d2), through the incomplete beta.
double f_sf(double f, double d1, double d2);

struct EffectRow {
  double ss = 0.0;
  double ss_error = 0.0;
  double df_num = 0.0;
  double df_den = 0.0;
  double f = 0.0;
  double p = 1.0;
};

/// Balanced split-plot ANOVA from cell means (classic deviation formulas).
/// With a single group the group rows are absent. Keys: "group", "load",
/// "task", "group:load", "group:task", "load:task", "group:load:task".
std::map<std::string, EffectRow> anova_from_means(const std::vector<bowlsim::CellData>& data);

/// Box's epsilon from the k x k covariance of one within factor's level
/// means, pooled within groups.
double box_epsilon(const std::vector<bowlsim::CellData>& data, bool load_factor);

/// Trace-formula epsilon tr(M)^2 / (p tr(M^2)) of a row-major p x p matrix.
double trace_epsilon(const std::vector<double>& m, std::size_t p);

/// det(M) / (tr(M)/p)^p by Gaussian elimination with partial pivoting.
double mauchly_w(const std::vector<double>& m, std::size_t p);

/// Pooled within-group covariance of orthonormal contrasts for a within
/// effect, using a Gram-Schmidt basis (different from the library's).
std::vector<double> contrast_covariance(const std::vector<bowlsim::CellData>& data, bowlsim::WithinEffect effect,
                                        std::size_t& dim);

/// Random balanced dataset: groups x subjects x 3 loads x 5 tasks, with
/// subject offsets and correlated noise so sphericity is violated.
std::vector<bowlsim::CellData> random_dataset(std::uint64_t seed, int groups, int subjects_per_group);

}  // namespace oracle
