#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sva/dataset.hpp"
#include "sva/sampler.hpp"

namespace sva {

struct ScalarSummary {
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0;
};

// Interpolated order statistic: index q*(n-1) in the sorted draws.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::runtime_error("quantile: no draws");
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline ScalarSummary summarize_draws(const std::vector<double>& draws) {
  ScalarSummary s;
  const std::size_t n = draws.size();
  if (n == 0) throw std::runtime_error("summarize_draws: no draws");
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  s.mean = mean;
  s.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  s.q025 = quantile_sorted(sorted, 0.025);
  s.q975 = quantile_sorted(sorted, 0.975);
  return s;
}

inline std::vector<double> column_draws(const Eigen::MatrixXd& m, int col) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    v[static_cast<std::size_t>(i)] = m(i, col);
  return v;
}

inline double compute_vpc(double sigma_u2, double sigma_e2) {
  if (sigma_u2 < 0.0 || sigma_e2 < 0.0)
    throw std::runtime_error("compute_vpc: negative variance");
  double total = sigma_u2 + sigma_e2;
  if (total <= 0.0) throw std::runtime_error("compute_vpc: zero total variance");
  return sigma_u2 / total;
}

struct ResponseStandardized {
  double scaling_denominator = 1.0;  // D_r
  std::vector<double> beta_star;     // coefficients / sqrt(D_r)
  double school_variance_star = 0.0;
  double student_variance_star = 0.0;
  double vpc = 0.0;
  double r_squared = 0.0;
};

struct StandardizedTable {
  std::array<ResponseStandardized, 3> response;
};

// Standardizes onto the common response scale: D_r is the fixed-part variance
// across students plus both variance components (all at posterior means).
inline StandardizedTable standardize_moments(
    const std::array<std::vector<double>, 3>& beta_mean,
    const std::array<double, 3>& fixed_part_variance,
    const std::array<double, 3>& sigma_u2,
    const std::array<double, 3>& sigma_e2) {
  StandardizedTable table;
  for (int r = 0; r < 3; ++r) {
    double d = fixed_part_variance[r] + sigma_u2[r] + sigma_e2[r];
    if (!(d > 0.0)) throw std::logic_error("standardize: D <= 0");
    auto& out = table.response[r];
    out.scaling_denominator = d;
    double root = std::sqrt(d);
    out.beta_star.clear();
    for (double b : beta_mean[r]) out.beta_star.push_back(b / root);
    out.school_variance_star = sigma_u2[r] / d;
    out.student_variance_star = sigma_e2[r] / d;
    out.vpc = compute_vpc(sigma_u2[r], sigma_e2[r]);
    out.r_squared = fixed_part_variance[r] / d;
  }
  return table;
}

// Posterior-mean coefficients per response.
inline std::array<std::vector<double>, 3> posterior_beta_means(
    const ChainResult& chain) {
  std::array<std::vector<double>, 3> means;
  for (int r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < chain.beta_draws[r].cols(); ++c)
      means[r].push_back(chain.beta_draws[r].col(c).mean());
  return means;
}

// Population variance (divisor N) of the fixed-part predictor x'beta-hat
// across students, per response.
inline std::array<double, 3> fixed_part_variances(const ChainResult& chain,
                                                  const DesignBlocks& design) {
  std::array<double, 3> out{};
  auto means = posterior_beta_means(chain);
  for (int r = 0; r < 3; ++r) {
    Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(
        means[r].data(), static_cast<Eigen::Index>(means[r].size()));
    Eigen::VectorXd fitted = design.X[r] * b;
    double mean = fitted.mean();
    out[r] = (fitted.array() - mean).square().sum() /
             static_cast<double>(fitted.size());
  }
  return out;
}

inline std::array<double, 3> posterior_variance_means(
    const Eigen::MatrixXd& cov_draws) {
  // lower-triangle packing: variances at columns 0, 2, 5
  return {cov_draws.col(0).mean(), cov_draws.col(2).mean(),
          cov_draws.col(5).mean()};
}

inline StandardizedTable standardize_estimates(const ChainResult& chain,
                                               const DesignBlocks& design) {
  return standardize_moments(posterior_beta_means(chain),
                             fixed_part_variances(chain, design),
                             posterior_variance_means(chain.omega_draws),
                             posterior_variance_means(chain.sigma_draws));
}

inline std::array<double, 3> compute_r_squared(const ChainResult& chain,
                                               const DesignBlocks& design) {
  auto table = standardize_estimates(chain, design);
  return {table.response[0].r_squared, table.response[1].r_squared,
          table.response[2].r_squared};
}

enum class IntervalMode { quantile, normal };

struct SchoolEffect {
  std::string school_id;
  double mean = 0.0, sd = 0.0, lower = 0.0, upper = 0.0;
  int rank = 0;  // 1..J by ascending posterior mean
  bool significant = false;
};

struct SchoolEffectSummary {
  std::array<std::vector<SchoolEffect>, 3> response;  // school order = chain
  std::array<double, 3> proportion_significant{};
};

inline SchoolEffectSummary summarize_school_effects(
    const ChainResult& chain, IntervalMode mode = IntervalMode::quantile) {
  if (mode == IntervalMode::quantile && chain.n_draws < 100)
    throw std::runtime_error(
        "summarize_school_effects: fewer than 100 stored draws; quantile "
        "intervals unstable");
  SchoolEffectSummary out;
  const int J = static_cast<int>(chain.school_ids.size());
  for (int r = 0; r < 3; ++r) {
    auto& effects = out.response[r];
    effects.resize(J);
    int significant = 0;
    for (int j = 0; j < J; ++j) {
      auto s = summarize_draws(column_draws(chain.u_draws[r], j));
      SchoolEffect e;
      e.school_id = chain.school_ids[static_cast<std::size_t>(j)];
      e.mean = s.mean;
      e.sd = s.sd;
      if (mode == IntervalMode::quantile) {
        e.lower = s.q025;
        e.upper = s.q975;
      } else {
        e.lower = s.mean - 1.96 * s.sd;
        e.upper = s.mean + 1.96 * s.sd;
      }
      e.significant = e.lower > 0.0 || e.upper < 0.0;
      if (e.significant) ++significant;
      effects[static_cast<std::size_t>(j)] = e;
    }
    out.proportion_significant[r] =
        J > 0 ? static_cast<double>(significant) / J : 0.0;
    // ranks by ascending mean, ties broken by school_id
    std::vector<int> order(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) order[static_cast<std::size_t>(j)] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& ea = effects[static_cast<std::size_t>(a)];
      const auto& eb = effects[static_cast<std::size_t>(b)];
      if (ea.mean != eb.mean) return ea.mean < eb.mean;
      return ea.school_id < eb.school_id;
    });
    for (int pos = 0; pos < J; ++pos)
      effects[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])]
          .rank = pos + 1;
  }
  return out;
}

struct CorrelationMatrices {
  Eigen::Matrix3d school = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d student = Eigen::Matrix3d::Identity();
};

// Posterior means of the per-draw correlations (not correlations of the mean
// covariances).
inline Eigen::Matrix3d mean_correlation(const Eigen::MatrixXd& cov_draws) {
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  const Eigen::Index n = cov_draws.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    double v1 = cov_draws(i, 0), v2 = cov_draws(i, 2), v3 = cov_draws(i, 5);
    double c21 = cov_draws(i, 1), c31 = cov_draws(i, 3), c32 = cov_draws(i, 4);
    acc(1, 0) += c21 / std::sqrt(v1 * v2);
    acc(2, 0) += c31 / std::sqrt(v1 * v3);
    acc(2, 1) += c32 / std::sqrt(v2 * v3);
  }
  Eigen::Matrix3d out = Eigen::Matrix3d::Identity();
  out(1, 0) = out(0, 1) = acc(1, 0) / static_cast<double>(n);
  out(2, 0) = out(0, 2) = acc(2, 0) / static_cast<double>(n);
  out(2, 1) = out(1, 2) = acc(2, 1) / static_cast<double>(n);
  return out;
}

inline CorrelationMatrices school_correlations(const ChainResult& chain) {
  CorrelationMatrices out;
  out.school = mean_correlation(chain.omega_draws);
  out.student = mean_correlation(chain.sigma_draws);
  return out;
}

}  // namespace sva
