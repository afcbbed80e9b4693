#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sva {

namespace detail {

inline double mean_of(const std::vector<double>& v, std::size_t begin,
                      std::size_t end) {
  double m = 0.0;
  for (std::size_t i = begin; i < end; ++i) m += v[i];
  return m / static_cast<double>(end - begin);
}

inline double variance_of(const std::vector<double>& v, std::size_t begin,
                          std::size_t end) {
  double m = mean_of(v, begin, end);
  double ss = 0.0;
  for (std::size_t i = begin; i < end; ++i) ss += (v[i] - m) * (v[i] - m);
  return ss / static_cast<double>(end - begin - 1);
}

// Batch-means estimate of the asymptotic variance sigma^2_inf of the mean,
// times n (i.e. the long-run variance). floor(sqrt(n)) batches.
inline double batch_means_long_run_variance(const std::vector<double>& v,
                                            std::size_t begin,
                                            std::size_t end) {
  std::size_t n = end - begin;
  std::size_t n_batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  if (n_batches < 2) throw std::runtime_error("batch means: too few draws");
  std::size_t batch = n / n_batches;
  std::vector<double> means(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b)
    means[b] = mean_of(v, begin + b * batch, begin + (b + 1) * batch);
  double vb = variance_of(means, 0, n_batches);
  return static_cast<double>(batch) * vb;
}

inline bool is_constant(const std::vector<double>& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}

}  // namespace detail

// Batch-means effective sample size: n * Var_iid / Var_long_run, clipped to
// (0, n]. A constant chain is flagged degenerate and reported as ESS 1.
struct EssResult {
  double ess = 1.0;
  bool degenerate = false;
};

inline EssResult effective_sample_size(const std::vector<double>& draws) {
  const std::size_t n = draws.size();
  if (n < 100)
    throw std::runtime_error("effective_sample_size: need >= 100 draws");
  if (detail::is_constant(draws)) return {1.0, true};
  double var_iid = detail::variance_of(draws, 0, n);
  double var_lr = detail::batch_means_long_run_variance(draws, 0, n);
  if (!(var_lr > 0.0)) return {1.0, true};
  double ess = static_cast<double>(n) * var_iid / var_lr;
  if (ess > static_cast<double>(n)) ess = static_cast<double>(n);
  if (!(ess > 0.0)) ess = 1.0;
  return {ess, false};
}

struct GewekeResult {
  double z = 0.0;
  bool degenerate = false;
};

// z-score comparing the first and last window means, spectral variances
// estimated by batch means within each window.
inline GewekeResult geweke_z(const std::vector<double>& draws,
                             double first = 0.1, double last = 0.5) {
  const std::size_t n = draws.size();
  if (n < 100) throw std::runtime_error("geweke_z: need >= 100 draws");
  if (first <= 0.0 || last <= 0.0 || first + last > 1.0)
    throw std::runtime_error("geweke_z: invalid window fractions");
  std::size_t n1 = static_cast<std::size_t>(first * static_cast<double>(n));
  std::size_t n2 = static_cast<std::size_t>(last * static_cast<double>(n));
  std::vector<double> w1(draws.begin(), draws.begin() + static_cast<long>(n1));
  std::vector<double> w2(draws.end() - static_cast<long>(n2), draws.end());
  if (detail::is_constant(w1) || detail::is_constant(w2)) return {0.0, true};
  double m1 = detail::mean_of(w1, 0, n1);
  double m2 = detail::mean_of(w2, 0, n2);
  double s1 = detail::batch_means_long_run_variance(w1, 0, n1) /
              static_cast<double>(n1);
  double s2 = detail::batch_means_long_run_variance(w2, 0, n2) /
              static_cast<double>(n2);
  double denom = std::sqrt(s1 + s2);
  if (!(denom > 0.0)) return {0.0, true};
  return {(m1 - m2) / denom, false};
}

inline double lag1_autocorrelation(const std::vector<double>& draws) {
  const std::size_t n = draws.size();
  if (n < 2) return 0.0;
  double m = detail::mean_of(draws, 0, n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += (draws[i] - m) * (draws[i] - m);
    if (i + 1 < n) num += (draws[i] - m) * (draws[i + 1] - m);
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

struct ScalarDiagnostic {
  std::string name;
  double ess = 0.0;
  double geweke = 0.0;
  double lag1 = 0.0;
  bool degenerate = false;
};

inline ScalarDiagnostic diagnose_scalar(const std::string& name,
                                        const std::vector<double>& draws) {
  ScalarDiagnostic d;
  d.name = name;
  auto ess = effective_sample_size(draws);
  auto gz = geweke_z(draws);
  d.ess = ess.ess;
  d.geweke = gz.z;
  d.lag1 = lag1_autocorrelation(draws);
  d.degenerate = ess.degenerate || gz.degenerate;
  return d;
}

}  // namespace sva
