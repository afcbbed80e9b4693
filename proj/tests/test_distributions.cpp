#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "sva/distributions.hpp"
#include "sva/rng.hpp"

using namespace sva;

TEST_CASE("normal quantile inverts the cdf") {
  for (double z : {-8.0, -3.5, -1.0, -0.1, 0.0, 0.7, 2.0, 5.0, 7.5}) {
    double p = normal_cdf(z);
    // near p = 1 the spacing of representable doubles limits the achievable
    // round-trip accuracy to roughly ulp(1) / pdf(z)
    double limit = std::max(1e-9, 2.0 * std::numeric_limits<double>::epsilon() /
                                      normal_pdf(z));
    if (p > 0.0 && p < 1.0)
      CHECK(normal_quantile(p) == Catch::Approx(z).margin(limit));
  }
  CHECK(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-12));
  CHECK(normal_quantile(0.975) == Catch::Approx(1.959963985).margin(1e-8));
}

TEST_CASE("half-normal mean of truncated sampler") {
  // mean of N(0,1) truncated to [0,inf) is sqrt(2/pi)
  Rng rng(42);
  const int n = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += truncated_normal(rng, 0.0, 1.0, true);
  double mean = sum / n;
  CHECK(mean == Catch::Approx(std::sqrt(2.0 / M_PI)).margin(2e-3));
}

TEST_CASE("truncated draws respect the sign constraint") {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    double mu = (i % 7 - 3) * 1.5;
    CHECK(truncated_normal(rng, mu, 0.8, true) >= 0.0);
    CHECK(truncated_normal(rng, mu, 0.8, false) < 0.0);
  }
}

TEST_CASE("deep tail rejection sampler") {
  // truncation point beyond the inverse-CDF switch; E[Z | Z > a] = phi(a)/(1-Phi(a))
  Rng rng(11);
  const double a = 6.5;
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double z = truncated_std_normal_lower(rng, a);
    REQUIRE(z >= a);
    sum += z;
  }
  double expected = normal_pdf(a) / (0.5 * std::erfc(a * M_SQRT1_2));
  CHECK(sum / n == Catch::Approx(expected).epsilon(2e-3));
}

TEST_CASE("inverse wishart moments") {
  // IW(df, S) mean is S / (df - p - 1)
  Rng rng(5);
  Eigen::Matrix3d s;
  s << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
  double df = 12.0;
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  const int n = 40000;
  for (int i = 0; i < n; ++i) acc += inverse_wishart_draw(rng, df, s);
  acc /= n;
  Eigen::Matrix3d expected = s / (df - 4.0);
  CHECK((acc - expected).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("mvn draw covariance") {
  Rng rng(9);
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, -0.8, -0.8, 1.0;
  Eigen::VectorXd mean(2);
  mean << 1.0, -2.0;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = mvn_draw(rng, mean, cov);
    m += x;
    c += (x - mean) * (x - mean).transpose();
  }
  m /= n;
  c /= n;
  CHECK((m - mean).cwiseAbs().maxCoeff() < 0.01);
  CHECK((c - cov).cwiseAbs().maxCoeff() < 0.03);
}
