#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sva/posthoc.hpp"
#include "sva/rng.hpp"

using namespace sva;

TEST_CASE("quantile and summary basics") {
  std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 5.0);
  CHECK(quantile_sorted(v, 0.5) == 3.0);
  CHECK(quantile_sorted(v, 0.25) == 2.0);
  auto s = summarize_draws({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == Catch::Approx(5.0));
  CHECK(s.sd == Catch::Approx(std::sqrt(32.0 / 7.0)));
}

TEST_CASE("vpc examples") {
  CHECK(compute_vpc(70.761, 297.752) == Catch::Approx(0.192).margin(0.001));
  CHECK(compute_vpc(0.046, 0.877) == Catch::Approx(0.050).margin(0.001));
  CHECK(compute_vpc(0.140, 1.000) == Catch::Approx(0.1228).margin(0.0005));
  CHECK(compute_vpc(0.0, 1.0) == 0.0);
  CHECK_THROWS_WITH(compute_vpc(-0.1, 1.0),
                    Catch::Matchers::ContainsSubstring("negative"));
  CHECK_THROWS_WITH(compute_vpc(0.0, 0.0),
                    Catch::Matchers::ContainsSubstring("zero total"));
}

TEST_CASE("standardize_moments golden arithmetic (null model)") {
  // null model: no covariates, so D = sigma_u2 + sigma_e2
  std::array<std::vector<double>, 3> beta{{{47.018}, {4.100}, {-1.173}}};
  std::array<double, 3> fixed{0.0, 0.0, 0.0};
  std::array<double, 3> su2{70.761, 0.046, 0.140};
  std::array<double, 3> se2{297.752, 0.877, 1.000};
  auto table = standardize_moments(beta, fixed, su2, se2);

  CHECK(table.response[0].scaling_denominator ==
        Catch::Approx(368.513).margin(1e-9));
  CHECK(table.response[0].beta_star[0] == Catch::Approx(2.449).margin(0.001));
  CHECK(table.response[0].school_variance_star ==
        Catch::Approx(0.192).margin(0.0005));
  CHECK(table.response[0].student_variance_star ==
        Catch::Approx(0.808).margin(0.0005));

  CHECK(table.response[1].beta_star[0] == Catch::Approx(4.269).margin(0.002));
  CHECK(table.response[1].school_variance_star ==
        Catch::Approx(0.050).margin(0.0005));
  CHECK(table.response[1].student_variance_star ==
        Catch::Approx(0.950).margin(0.0005));

  CHECK(table.response[2].beta_star[0] == Catch::Approx(-1.099).margin(0.001));
  CHECK(table.response[2].school_variance_star ==
        Catch::Approx(0.123).margin(0.0005));
  CHECK(table.response[2].student_variance_star ==
        Catch::Approx(0.877).margin(0.0005));

  for (int r = 0; r < 3; ++r) {
    CHECK(table.response[r].r_squared == 0.0);
    CHECK(table.response[r].school_variance_star +
              table.response[r].student_variance_star +
              table.response[r].r_squared ==
          Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("standardization invariance properties") {
  std::array<std::vector<double>, 3> beta{{{2.0, 0.5}, {1.0}, {-0.3}}};
  std::array<double, 3> fixed{1.5, 0.25, 0.1};
  std::array<double, 3> su2{0.4, 0.1, 0.2};
  std::array<double, 3> se2{2.1, 0.65, 1.0};
  auto table = standardize_moments(beta, fixed, su2, se2);

  SECTION("shares sum to one") {
    for (int r = 0; r < 3; ++r)
      CHECK(table.response[r].school_variance_star +
                table.response[r].student_variance_star +
                table.response[r].r_squared ==
            Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("vpc is invariant under common rescaling of the response") {
    const double k = 7.3;  // variance scale k^2
    auto scaled = standardize_moments(
        {{{2.0 * k, 0.5 * k}, {1.0 * k}, {-0.3 * k}}},
        {1.5 * k * k, 0.25 * k * k, 0.1 * k * k},
        {0.4 * k * k, 0.1 * k * k, 0.2 * k * k},
        {2.1 * k * k, 0.65 * k * k, 1.0 * k * k});
    for (int r = 0; r < 3; ++r) {
      CHECK(scaled.response[r].vpc ==
            Catch::Approx(table.response[r].vpc).margin(1e-12));
      CHECK(scaled.response[r].beta_star[0] ==
            Catch::Approx(table.response[r].beta_star[0]).margin(1e-12));
      CHECK(scaled.response[r].r_squared ==
            Catch::Approx(table.response[r].r_squared).margin(1e-12));
    }
  }
  SECTION("standardizing an already standardized response gives D = 1") {
    auto& r0 = table.response[0];
    double d = r0.scaling_denominator;
    auto again = standardize_moments(
        {{r0.beta_star, {0.0}, {0.0}}},
        {fixed[0] / d, 0.0, 0.0}, {su2[0] / d, 0.5, 0.5},
        {se2[0] / d, 0.5, 0.5});
    CHECK(again.response[0].scaling_denominator ==
          Catch::Approx(1.0).margin(1e-12));
    CHECK(again.response[0].beta_star[0] ==
          Catch::Approx(r0.beta_star[0]).margin(1e-12));
  }
}

namespace {

// Build a ChainResult directly so posthoc functions can be tested in
// isolation from the sampler.
ChainResult synthetic_chain(int n_draws, int J, Rng& rng,
                            const std::array<double, 3>& u_centers = {0, 0, 0},
                            double u_spread = 1.0) {
  ChainResult chain;
  chain.n_draws = n_draws;
  for (int j = 0; j < J; ++j)
    chain.school_ids.push_back("S" + std::to_string(10000 + j));
  for (int r = 0; r < 3; ++r) {
    chain.beta_draws[r].resize(n_draws, 1);
    chain.u_draws[r].resize(n_draws, J);
    for (int i = 0; i < n_draws; ++i) {
      chain.beta_draws[r](i, 0) = 0.1 * r + 0.01 * rng.normal();
      for (int j = 0; j < J; ++j)
        chain.u_draws[r](i, j) =
            u_centers[r] + u_spread * (j - (J - 1) / 2.0) + 0.2 * rng.normal();
    }
  }
  chain.omega_draws.resize(n_draws, 6);
  chain.sigma_draws.resize(n_draws, 6);
  for (int i = 0; i < n_draws; ++i) {
    chain.omega_draws.row(i) << 0.2, 0.0, 0.1, 0.0, 0.0, 0.15;
    chain.sigma_draws.row(i) << 0.8, 0.0, 0.9, 0.0, 0.0, 1.0;
  }
  return chain;
}

}  // namespace

TEST_CASE("school effect summaries") {
  SECTION("order statistics oracle: separated means rank 1..J") {
    Rng rng(3);
    const int J = 40;
    auto chain = synthetic_chain(500, J, rng, {0, 0, 0}, 1.0);
    auto summary = summarize_school_effects(chain);
    for (int j = 0; j < J; ++j) {
      // schools are built with strictly increasing centers, spread 1 apart
      CHECK(summary.response[0][static_cast<std::size_t>(j)].rank == j + 1);
      CHECK(summary.response[0][static_cast<std::size_t>(j)].mean ==
            Catch::Approx((j - (J - 1) / 2.0)).margin(0.05));
    }
  }
  SECTION("significance and proportion: 2 of 3 intervals exclude zero") {
    ChainResult chain;
    chain.n_draws = 200;
    chain.school_ids = {"A", "B", "C"};
    Rng rng(9);
    for (int r = 0; r < 3; ++r) {
      chain.beta_draws[r].resize(200, 1);
      chain.beta_draws[r].setZero();
      chain.u_draws[r].resize(200, 3);
      for (int i = 0; i < 200; ++i) {
        chain.u_draws[r](i, 0) = 5.0 + 0.1 * rng.normal();   // clearly above
        chain.u_draws[r](i, 1) = 0.01 * rng.normal();        // straddles 0
        chain.u_draws[r](i, 2) = -5.0 + 0.1 * rng.normal();  // clearly below
      }
    }
    chain.omega_draws.setOnes(200, 6);
    chain.sigma_draws.setOnes(200, 6);
    auto summary = summarize_school_effects(chain);
    CHECK(summary.response[0][0].significant);
    CHECK_FALSE(summary.response[0][1].significant);
    CHECK(summary.response[0][2].significant);
    CHECK(summary.proportion_significant[0] ==
          Catch::Approx(2.0 / 3.0).margin(1e-12));
    CHECK(summary.response[0][2].rank == 1);
    CHECK(summary.response[0][1].rank == 2);
    CHECK(summary.response[0][0].rank == 3);
  }
  SECTION("quantile intervals need at least 100 draws") {
    Rng rng(4);
    auto chain = synthetic_chain(50, 4, rng);
    CHECK_THROWS_WITH(summarize_school_effects(chain),
                      Catch::Matchers::ContainsSubstring("100"));
    CHECK_NOTHROW(summarize_school_effects(chain, IntervalMode::normal));
  }
  SECTION("normal-mode interval is mean +/- 1.96 sd") {
    Rng rng(8);
    auto chain = synthetic_chain(400, 3, rng);
    auto summary = summarize_school_effects(chain, IntervalMode::normal);
    const auto& e = summary.response[1][0];
    CHECK(e.lower == Catch::Approx(e.mean - 1.96 * e.sd).margin(1e-12));
    CHECK(e.upper == Catch::Approx(e.mean + 1.96 * e.sd).margin(1e-12));
  }
  SECTION("ranks are invariant under positive rescaling of the draws") {
    Rng rng(12);
    auto chain = synthetic_chain(300, 10, rng, {0.3, -0.2, 0.0}, 0.7);
    auto base = summarize_school_effects(chain);
    for (int r = 0; r < 3; ++r) chain.u_draws[r] *= 3.25;
    auto scaled = summarize_school_effects(chain);
    for (int r = 0; r < 3; ++r)
      for (std::size_t j = 0; j < 10; ++j)
        CHECK(scaled.response[r][j].rank == base.response[r][j].rank);
  }
}

TEST_CASE("mean correlation of covariance draws") {
  SECTION("constant draws reproduce the plug-in correlation") {
    Eigen::MatrixXd draws(3, 6);
    for (int i = 0; i < 3; ++i)
      draws.row(i) << 0.192, -0.0503, 0.050, 0.0, 0.0, 0.123;
    Eigen::Matrix3d corr = mean_correlation(draws);
    CHECK(corr(1, 0) ==
          Catch::Approx(-0.0503 / std::sqrt(0.192 * 0.050)).margin(1e-12));
    CHECK(corr(1, 0) == Catch::Approx(-0.513).margin(0.001));
    CHECK(corr(0, 1) == corr(1, 0));
    CHECK(corr(0, 0) == 1.0);
  }
  SECTION("per-draw averaging differs from correlation of averages") {
    // two draws with equal covariances but different variances
    Eigen::MatrixXd draws(2, 6);
    draws.row(0) << 1.0, 0.5, 1.0, 0.0, 0.0, 1.0;
    draws.row(1) << 4.0, 0.5, 4.0, 0.0, 0.0, 1.0;
    Eigen::Matrix3d corr = mean_correlation(draws);
    CHECK(corr(1, 0) == Catch::Approx(0.5 * (0.5 + 0.125)).margin(1e-12));
  }
  SECTION("correlation is scale free") {
    Eigen::MatrixXd draws(1, 6);
    draws << 0.2, -0.05, 0.1, 0.02, -0.01, 0.15;
    Eigen::MatrixXd scaled = draws * 9.0;
    Eigen::Matrix3d a = mean_correlation(draws);
    Eigen::Matrix3d b = mean_correlation(scaled);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("posterior_variance_means reads the packed columns") {
  Eigen::MatrixXd draws(2, 6);
  draws.row(0) << 1.0, 9.0, 2.0, 9.0, 9.0, 3.0;
  draws.row(1) << 3.0, 9.0, 4.0, 9.0, 9.0, 5.0;
  auto v = posterior_variance_means(draws);
  CHECK(v[0] == 2.0);
  CHECK(v[1] == 3.0);
  CHECK(v[2] == 4.0);
}
