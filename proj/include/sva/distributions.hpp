#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sva/rng.hpp"

namespace sva {

inline double normal_pdf(double z) {
  static const double kInvSqrt2Pi = 0.3989422804014326779;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

// Inverse standard-normal CDF. Acklam's rational approximation followed by one
// Halley refinement step; absolute error is near machine precision across the
// representable range of p.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("normal_quantile: p outside [0,1]");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement
  double e = normal_cdf(x) - p;
  double u = e / normal_pdf(x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

// Standard normal conditioned on z >= a. Inverse-CDF in the bulk; Robert's
// shifted-exponential rejection once the truncation point is far in the tail
// (the inverse CDF loses resolution there).
inline double truncated_std_normal_lower(Rng& rng, double a) {
  if (a < 5.0) {
    double pa = normal_cdf(a);
    double u = pa + rng.uniform() * (1.0 - pa);
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    double z = normal_quantile(u);
    return z < a ? a : z;
  }
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    double x = a - std::log(rng.uniform()) / lambda;
    double diff = x - lambda;
    if (std::log(rng.uniform()) <= -0.5 * diff * diff) return x;
  }
}

// N(mu, sd^2) truncated to [0, inf) when non_negative, else to (-inf, 0).
inline double truncated_normal(Rng& rng, double mu, double sd,
                               bool non_negative) {
  if (!(sd > 0.0)) throw std::invalid_argument("truncated_normal: sd <= 0");
  if (non_negative) {
    return mu + sd * truncated_std_normal_lower(rng, -mu / sd);
  }
  return mu - sd * truncated_std_normal_lower(rng, mu / sd);
}

// Draw from N(mean, cov) given the lower Cholesky factor of cov.
inline Eigen::VectorXd mvn_draw_chol(Rng& rng, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& chol_lower) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + chol_lower * z;
}

inline Eigen::VectorXd mvn_draw(Rng& rng, const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("mvn_draw: covariance not positive definite");
  return mvn_draw_chol(rng, mean, llt.matrixL());
}

// Wishart(df, scale) via the Bartlett decomposition. df must exceed p - 1.
inline Eigen::MatrixXd wishart_draw(Rng& rng, double df,
                                    const Eigen::MatrixXd& scale) {
  const Eigen::Index p = scale.rows();
  if (df <= static_cast<double>(p) - 1.0)
    throw std::invalid_argument("wishart_draw: df too small");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("wishart_draw: scale not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    A(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  Eigen::MatrixXd LA = L * A;
  return LA * LA.transpose();
}

// InverseWishart(df, scale): density |S|^{-(df+p+1)/2} exp(-tr(scale S^-1)/2).
inline Eigen::MatrixXd inverse_wishart_draw(Rng& rng, double df,
                                            const Eigen::MatrixXd& scale) {
  Eigen::MatrixXd scale_inv =
      scale.llt().solve(Eigen::MatrixXd::Identity(scale.rows(), scale.cols()));
  // keep the inverse numerically symmetric before factoring again
  scale_inv = 0.5 * (scale_inv + scale_inv.transpose()).eval();
  Eigen::MatrixXd w = wishart_draw(rng, df, scale_inv);
  Eigen::MatrixXd draw =
      w.llt().solve(Eigen::MatrixXd::Identity(w.rows(), w.cols()));
  return 0.5 * (draw + draw.transpose()).eval();
}

}  // namespace sva
