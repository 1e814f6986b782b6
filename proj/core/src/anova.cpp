#include "bowlsim/anova.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/format.h>

#include "bowlsim/error.hpp"

namespace bowlsim {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Balanced subjects x (load, task) layout; cell column = load_index * tasks + task_index.
struct Design {
  std::vector<std::string> subjects;
  std::vector<int> subject_group;
  std::vector<std::string> groups;
  std::vector<LoadLevel> loads;
  std::vector<DistributionId> tasks;
  MatrixXd y;
  double ss_total = 0.0;

  [[nodiscard]] std::size_t n() const { return subjects.size(); }
  [[nodiscard]] std::size_t g() const { return groups.size(); }
  [[nodiscard]] double error_df() const { return static_cast<double>(n() - g()); }
};

Design build_design(std::span<const CellData> data) {
  if (data.empty()) throw DesignError("no data");
  Design d;

  std::map<std::string, std::string> group_of;
  for (const CellData& c : data) {
    auto [it, inserted] = group_of.emplace(c.subject, c.group);
    if (!inserted && it->second != c.group)
      throw DesignError(fmt::format("subject {} appears in groups {} and {}", c.subject, it->second, c.group));
    if (std::find(d.loads.begin(), d.loads.end(), c.load) == d.loads.end()) d.loads.push_back(c.load);
    if (std::find(d.tasks.begin(), d.tasks.end(), c.distribution) == d.tasks.end()) d.tasks.push_back(c.distribution);
    if (!std::isfinite(c.value)) throw DesignError(fmt::format("non-finite value for subject {}", c.subject));
  }
  std::sort(d.loads.begin(), d.loads.end());
  std::sort(d.tasks.begin(), d.tasks.end());
  if (d.loads.size() < 2 || d.tasks.size() < 2) throw DesignError("need at least two load and two task levels");

  for (const auto& [subject, group] : group_of) {
    if (std::find(d.groups.begin(), d.groups.end(), group) == d.groups.end()) d.groups.push_back(group);
  }
  std::sort(d.groups.begin(), d.groups.end());
  for (const auto& [subject, group] : group_of) {
    d.subjects.push_back(subject);
    d.subject_group.push_back(
        static_cast<int>(std::find(d.groups.begin(), d.groups.end(), group) - d.groups.begin()));
  }

  const std::size_t a = d.loads.size();
  const std::size_t b = d.tasks.size();
  d.y = MatrixXd::Constant(static_cast<Eigen::Index>(d.n()), static_cast<Eigen::Index>(a * b),
                           std::numeric_limits<double>::quiet_NaN());
  for (const CellData& c : data) {
    const auto s = static_cast<Eigen::Index>(
        std::lower_bound(d.subjects.begin(), d.subjects.end(), c.subject) - d.subjects.begin());
    const auto i = static_cast<std::size_t>(std::find(d.loads.begin(), d.loads.end(), c.load) - d.loads.begin());
    const auto j =
        static_cast<std::size_t>(std::find(d.tasks.begin(), d.tasks.end(), c.distribution) - d.tasks.begin());
    double& cell = d.y(s, static_cast<Eigen::Index>(i * b + j));
    if (!std::isnan(cell))
      throw DesignError(fmt::format("duplicate cell for subject {} (load {}, task {})", c.subject, percent(c.load),
                                    to_char(c.distribution)));
    cell = c.value;
  }
  std::vector<std::string> missing;
  for (Eigen::Index s = 0; s < d.y.rows(); ++s)
    if (d.y.row(s).hasNaN()) missing.push_back(d.subjects[static_cast<std::size_t>(s)]);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DesignError("unbalanced design: missing cells for subjects " + list);
  }

  d.ss_total = (d.y.array() - d.y.mean()).square().sum();
  if (!(d.ss_total > 0.0)) throw DegenerateData("all values are identical");
  return d;
}

MatrixXd to_matrix(const std::vector<double>& row_major, std::size_t rows, std::size_t cols) {
  MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row_major[r * cols + c];
  return m;
}

MatrixXd kron(const MatrixXd& lhs, const MatrixXd& rhs) {
  MatrixXd out(lhs.rows() * rhs.rows(), lhs.cols() * rhs.cols());
  for (Eigen::Index i = 0; i < lhs.rows(); ++i)
    for (Eigen::Index j = 0; j < lhs.cols(); ++j) out.block(i * rhs.rows(), j * rhs.cols(), rhs.rows(), rhs.cols()) = lhs(i, j) * rhs;
  return out;
}

// Orthonormal contrast rows (p x cells) for a within effect.
MatrixXd effect_contrasts(const Design& d, WithinEffect effect) {
  const std::size_t a = d.loads.size();
  const std::size_t b = d.tasks.size();
  const MatrixXd ca = to_matrix(helmert_contrasts(a), a - 1, a);
  const MatrixXd cb = to_matrix(helmert_contrasts(b), b - 1, b);
  const MatrixXd mean_a = MatrixXd::Constant(1, static_cast<Eigen::Index>(a), 1.0 / std::sqrt(static_cast<double>(a)));
  const MatrixXd mean_b = MatrixXd::Constant(1, static_cast<Eigen::Index>(b), 1.0 / std::sqrt(static_cast<double>(b)));
  switch (effect) {
    case WithinEffect::Load: return kron(ca, mean_b);
    case WithinEffect::Task: return kron(mean_a, cb);
    case WithinEffect::LoadTask: return kron(ca, cb);
  }
  return {};
}

struct GroupedScores {
  MatrixXd scores;              // subjects x p
  std::vector<VectorXd> means;  // per group
  std::vector<int> counts;
  MatrixXd sscp;                // pooled within-group SSCP, p x p
};

GroupedScores group_scores(const Design& d, const MatrixXd& contrasts) {
  GroupedScores gs;
  gs.scores = d.y * contrasts.transpose();
  const Eigen::Index p = gs.scores.cols();
  gs.means.assign(d.g(), VectorXd::Zero(p));
  gs.counts.assign(d.g(), 0);
  for (Eigen::Index s = 0; s < gs.scores.rows(); ++s) {
    const int g = d.subject_group[static_cast<std::size_t>(s)];
    gs.means[static_cast<std::size_t>(g)] += gs.scores.row(s).transpose();
    ++gs.counts[static_cast<std::size_t>(g)];
  }
  for (std::size_t g = 0; g < d.g(); ++g) gs.means[g] /= gs.counts[g];
  gs.sscp = MatrixXd::Zero(p, p);
  for (Eigen::Index s = 0; s < gs.scores.rows(); ++s) {
    const VectorXd r = gs.scores.row(s).transpose() - gs.means[static_cast<std::size_t>(d.subject_group[static_cast<std::size_t>(s)])];
    gs.sscp += r * r.transpose();
  }
  return gs;
}

SymMatrix to_sym(const MatrixXd& m) {
  SymMatrix out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 0.5 * (m(i, j) + m(j, i));
  return out;
}

VectorXd eigenvalues(const SymMatrix& s) {
  MatrixXd m(static_cast<Eigen::Index>(s.dim), static_cast<Eigen::Index>(s.dim));
  for (std::size_t i = 0; i < s.dim; ++i)
    for (std::size_t j = 0; j < s.dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s(i, j);
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw DegenerateData("eigen decomposition failed");
  return solver.eigenvalues();
}

struct Sphericity {
  std::optional<double> w;
  std::optional<double> p;
  std::optional<double> epsilon;
};

Sphericity sphericity(const MatrixXd& sscp, double nu, double zero_tol) {
  Sphericity out;
  const Eigen::Index p = sscp.rows();
  if (p == 1) return {1.0, 1.0, 1.0};
  if (!(sscp.trace() > zero_tol)) return out;
  const SymMatrix s = to_sym(sscp / nu);
  out.epsilon = gg_epsilon_from_covariance(s);
  if (nu >= static_cast<double>(p)) {
    try {
      const SphericityTest t = mauchly_from_covariance(s, nu);
      out.w = t.w;
      out.p = t.p;
    } catch (const DegenerateData&) {
    }
  }
  return out;
}

AnovaRow make_row(std::string effect, double ss, double ss_error, double df_num, double df_den, double zero_tol,
                  const Sphericity* sph = nullptr) {
  AnovaRow row;
  row.effect = std::move(effect);
  row.ss = ss;
  row.ss_error = ss_error;
  row.df_num = df_num;
  row.df_den = df_den;
  if (!(ss > zero_tol)) {
    row.f = 0.0;
    row.p = 1.0;
  } else if (!(ss_error > zero_tol)) {
    row.f = std::numeric_limits<double>::infinity();
    row.p = 0.0;
  } else {
    row.f = (ss / df_num) / (ss_error / df_den);
    row.p = f_upper_tail(row.f, df_num, df_den);
  }
  if (sph != nullptr) {
    row.mauchly_w = sph->w;
    row.mauchly_p = sph->p;
    row.gg_epsilon = sph->epsilon;
    if (sph->epsilon) row.p_gg = f_upper_tail(row.f, *sph->epsilon * df_num, *sph->epsilon * df_den);
  }
  return row;
}

AnovaResult analyse(const Design& d, bool with_group) {
  const double zero_tol = 1e-12 * d.ss_total;
  const double nu = d.error_df();
  const auto gcount = static_cast<double>(d.g());

  AnovaResult result;
  result.design = with_group ? "mixed" : "rm";
  result.subjects = static_cast<int>(d.n());

  if (with_group) {
    const auto cells = static_cast<double>(d.y.cols());
    const VectorXd u = d.y.rowwise().sum() / std::sqrt(cells);
    std::vector<double> sum(d.g(), 0.0);
    std::vector<int> count(d.g(), 0);
    for (Eigen::Index s = 0; s < u.size(); ++s) {
      sum[static_cast<std::size_t>(d.subject_group[static_cast<std::size_t>(s)])] += u(s);
      ++count[static_cast<std::size_t>(d.subject_group[static_cast<std::size_t>(s)])];
    }
    const double grand = u.mean();
    double ss_between = 0.0;
    for (std::size_t g = 0; g < d.g(); ++g) ss_between += count[g] * std::pow(sum[g] / count[g] - grand, 2);
    double ss_within = 0.0;
    for (Eigen::Index s = 0; s < u.size(); ++s) {
      const auto g = static_cast<std::size_t>(d.subject_group[static_cast<std::size_t>(s)]);
      ss_within += std::pow(u(s) - sum[g] / count[g], 2);
    }
    result.rows.push_back(make_row("group", ss_between, ss_within, gcount - 1.0, nu, zero_tol));
  }

  std::vector<AnovaRow> interactions;
  for (WithinEffect effect : {WithinEffect::Load, WithinEffect::Task, WithinEffect::LoadTask}) {
    const GroupedScores gs = group_scores(d, effect_contrasts(d, effect));
    const auto p = static_cast<double>(gs.scores.cols());

    // Unweighted mean of group means (type III for unequal group sizes).
    VectorXd m = VectorXd::Zero(gs.scores.cols());
    double harmonic = 0.0;
    for (std::size_t g = 0; g < d.g(); ++g) {
      m += gs.means[g] / gcount;
      harmonic += 1.0 / (gcount * gcount * gs.counts[g]);
    }
    const double ss_effect = m.squaredNorm() / harmonic;
    const double ss_error = gs.sscp.trace();
    const Sphericity sph = sphericity(gs.sscp, nu, zero_tol);
    const std::string name(to_string(effect));
    result.rows.push_back(make_row(name, ss_effect, ss_error, p, p * nu, zero_tol, &sph));

    if (with_group) {
      VectorXd weighted = VectorXd::Zero(gs.scores.cols());
      for (std::size_t g = 0; g < d.g(); ++g) weighted += gs.counts[g] * gs.means[g];
      weighted /= static_cast<double>(d.n());
      double ss_inter = 0.0;
      for (std::size_t g = 0; g < d.g(); ++g) ss_inter += gs.counts[g] * (gs.means[g] - weighted).squaredNorm();
      interactions.push_back(
          make_row("group:" + name, ss_inter, ss_error, (gcount - 1.0) * p, p * nu, zero_tol, &sph));
    }
  }
  // group, load, task, group:load, group:task, load:task, group:load:task
  if (with_group) {
    result.rows.insert(result.rows.begin() + 3, interactions[0]);
    result.rows.insert(result.rows.begin() + 4, interactions[1]);
    result.rows.push_back(interactions[2]);
  }
  return result;
}

}  // namespace

const AnovaRow& AnovaResult::row(std::string_view effect) const {
  for (const AnovaRow& r : rows)
    if (r.effect == effect) return r;
  throw DesignError(fmt::format("no ANOVA row named '{}'", effect));
}

std::string_view to_string(WithinEffect e) {
  switch (e) {
    case WithinEffect::Load: return "load";
    case WithinEffect::Task: return "task";
    case WithinEffect::LoadTask: return "load:task";
  }
  return "unknown";
}

std::vector<double> helmert_contrasts(std::size_t k) {
  if (k < 2) return {};
  std::vector<double> c((k - 1) * k, 0.0);
  for (std::size_t j = 1; j < k; ++j) {
    const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
    for (std::size_t i = 0; i < j; ++i) c[(j - 1) * k + i] = 1.0 / norm;
    c[(j - 1) * k + j] = -static_cast<double>(j) / norm;
  }
  return c;
}

double f_upper_tail(double f, double df_num, double df_den) {
  if (!(df_num > 0.0) || !(df_den > 0.0)) throw DomainError("F distribution needs positive degrees of freedom");
  if (std::isnan(f)) throw DomainError("F statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const boost::math::fisher_f_distribution<double> dist(df_num, df_den);
  return boost::math::cdf(boost::math::complement(dist, f));
}

double chi_square_upper_tail(double x, double df) {
  if (!(df > 0.0)) throw DomainError("chi-square distribution needs positive degrees of freedom");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double gg_epsilon_from_covariance(const SymMatrix& s) {
  if (s.dim == 0) throw DomainError("empty covariance matrix");
  if (s.dim == 1) return 1.0;
  const VectorXd lambda = eigenvalues(s);
  const double sum = lambda.sum();
  const double sum_sq = lambda.squaredNorm();
  if (!(sum_sq > 0.0)) throw DegenerateData("contrast covariance is zero");
  const auto p = static_cast<double>(s.dim);
  return std::clamp(sum * sum / (p * sum_sq), 1.0 / p, 1.0);
}

SphericityTest mauchly_from_covariance(const SymMatrix& s, double df) {
  if (s.dim <= 1) return {};
  const VectorXd lambda = eigenvalues(s);
  const double largest = lambda.maxCoeff();
  if (!(lambda.minCoeff() > 1e-12 * largest)) throw DegenerateData("contrast covariance is singular");

  const auto p = static_cast<double>(s.dim);
  const double log_w = lambda.array().log().sum() - p * std::log(lambda.sum() / p);

  // Chi-square approximation with the second-order correction term.
  const double rho = 1.0 - (2.0 * p * p + p + 2.0) / (6.0 * p * df);
  const double w2 = (p + 2.0) * (p - 1.0) * (p - 2.0) * (2.0 * p * p * p + 6.0 * p * p + 3.0 * p + 2.0) /
                    (288.0 * std::pow(df * p * rho, 2));
  const double z = -df * rho * log_w;
  const double f = p * (p + 1.0) / 2.0 - 1.0;
  const double pr1 = chi_square_upper_tail(z, f);
  const double pr2 = chi_square_upper_tail(z, f + 4.0);

  SphericityTest t;
  t.w = std::exp(log_w);
  t.chi_square = z;
  t.df = f;
  t.p = std::clamp(pr1 + w2 * (pr2 - pr1), 0.0, 1.0);
  return t;
}

SymMatrix contrast_covariance(std::span<const CellData> data, WithinEffect effect) {
  const Design d = build_design(data);
  const GroupedScores gs = group_scores(d, effect_contrasts(d, effect));
  if (!(d.error_df() > 0.0)) throw DesignError("need more subjects than groups");
  return to_sym(gs.sscp / d.error_df());
}

SphericityTest mauchly_test(std::span<const CellData> data, WithinEffect effect) {
  const Design d = build_design(data);
  const MatrixXd c = effect_contrasts(d, effect);
  if (c.rows() <= 1) return {};
  if (d.error_df() < static_cast<double>(c.rows()))
    throw DesignError(fmt::format("Mauchly's test for {} needs more than {} subjects", to_string(effect), c.rows()));
  const GroupedScores gs = group_scores(d, c);
  return mauchly_from_covariance(to_sym(gs.sscp / d.error_df()), d.error_df());
}

double gg_epsilon(std::span<const CellData> data, WithinEffect effect) {
  return gg_epsilon_from_covariance(contrast_covariance(data, effect));
}

AnovaResult rm_anova_2way(std::span<const CellData> data) {
  const Design d = build_design(data);
  if (d.g() != 1) throw DesignError("repeated-measures ANOVA expects a single group");
  if (d.n() < 2) throw DesignError("repeated-measures ANOVA needs at least two subjects");
  return analyse(d, false);
}

AnovaResult mixed_anova(std::span<const CellData> data) {
  const Design d = build_design(data);
  if (d.g() < 2) throw DesignError("mixed ANOVA needs at least two groups");
  for (std::size_t g = 0; g < d.g(); ++g) {
    const auto count = std::count(d.subject_group.begin(), d.subject_group.end(), static_cast<int>(g));
    if (count < 2) throw DesignError(fmt::format("group {} has fewer than two subjects", d.groups[g]));
  }
  return analyse(d, true);
}

}  // namespace bowlsim
