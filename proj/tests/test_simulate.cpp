#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "sva/distributions.hpp"
#include "sva/ingest.hpp"
#include "sva/simulate.hpp"

using namespace sva;

TEST_CASE("anova variance estimates") {
  SECTION("hand-computed two-school case") {
    // y = (0,0,2,2) in two schools of two: MSB = 4, MSW = 0
    auto [su2, se2] =
        anova_variance_estimates({0, 0, 2, 2}, {0, 0, 1, 1}, 2);
    CHECK(su2 == Catch::Approx(2.0).margin(1e-12));
    CHECK(se2 == Catch::Approx(1e-4).margin(1e-15));
  }
  SECTION("constant response floors both") {
    auto [su2, se2] =
        anova_variance_estimates({3, 3, 3, 3}, {0, 0, 1, 1}, 2);
    CHECK(su2 == 1e-4);
    CHECK(se2 == 1e-4);
  }
  SECTION("large balanced simulation recovers (0.2, 0.8) within 10%") {
    Rng rng(31);
    const int J = 400, n = 60;
    std::vector<double> y;
    std::vector<int> g;
    for (int j = 0; j < J; ++j) {
      double u = std::sqrt(0.2) * rng.normal();
      for (int i = 0; i < n; ++i) {
        y.push_back(u + std::sqrt(0.8) * rng.normal());
        g.push_back(j);
      }
    }
    auto [su2, se2] = anova_variance_estimates(y, g, J);
    CHECK(su2 == Catch::Approx(0.2).epsilon(0.10));
    CHECK(se2 == Catch::Approx(0.8).epsilon(0.10));
  }
}

TEST_CASE("conjugate beta oracle") {
  SECTION("intercept-only closed form") {
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
    auto post = conjugate_beta_oracle(y, X, 1.0);
    CHECK(post.mean(0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(post.cov(0, 0) == Catch::Approx(1.0 / 3.0).margin(1e-12));
  }
  SECTION("single observation") {
    Eigen::VectorXd y(1);
    y << 4.2;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 1);
    auto post = conjugate_beta_oracle(y, X, 2.5);
    CHECK(post.mean(0) == Catch::Approx(4.2));
    CHECK(post.cov(0, 0) == Catch::Approx(2.5));
  }
  SECTION("duplicated rows double the precision") {
    Eigen::VectorXd y(4);
    y << 1, 2, 1, 2;
    Eigen::MatrixXd X(4, 2);
    X << 1, 0.5, 1, -0.5, 1, 0.5, 1, -0.5;
    auto full = conjugate_beta_oracle(y, X, 1.0);
    auto half = conjugate_beta_oracle(y.head(2), X.topRows(2), 1.0);
    CHECK((full.cov.inverse() - 2.0 * half.cov.inverse()).norm() < 1e-10);
  }
}

TEST_CASE("generate_dataset marginal behaviour with no clustering") {
  TrueParameters truth;
  truth.num_schools = 100;
  truth.n_min = truth.n_max = 300;
  truth.beta[0] = Eigen::VectorXd::Constant(1, 2.0);
  truth.beta[1] = Eigen::VectorXd::Constant(1, 4.0);
  truth.beta[2] = Eigen::VectorXd::Zero(1);
  truth.omega_u = 1e-12 * Eigen::Matrix3d::Identity();
  Simulation sim = generate_dataset(truth, 71);
  const double n = static_cast<double>(sim.students.size());
  double mean_y1 = 0.0, prevalence = 0.0;
  for (const auto& s : sim.students) {
    mean_y1 += s.attainment8;
    prevalence += s.excluded;
  }
  mean_y1 /= n;
  prevalence /= n;
  CHECK(mean_y1 == Catch::Approx(2.0).margin(0.02));
  CHECK(prevalence == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("generate_dataset is deterministic under seed") {
  TrueParameters truth;
  truth.num_schools = 10;
  truth.n_min = 5;
  truth.n_max = 25;
  for (int r = 0; r < 3; ++r) truth.beta[r] = Eigen::VectorXd::Zero(1);
  truth.omega_u = 0.2 * Eigen::Matrix3d::Identity();
  auto dir = test_helpers::temp_dir("sim_det");
  Simulation a = generate_dataset(truth, 5);
  Simulation b = generate_dataset(truth, 5);
  write_simulation_csvs(a, (dir / "a_students.csv").string(),
                        (dir / "a_schools.csv").string());
  write_simulation_csvs(b, (dir / "b_students.csv").string(),
                        (dir / "b_schools.csv").string());
  CHECK(test_helpers::read_file(dir / "a_students.csv") ==
        test_helpers::read_file(dir / "b_students.csv"));
  CHECK(test_helpers::read_file(dir / "a_schools.csv") ==
        test_helpers::read_file(dir / "b_schools.csv"));
}

TEST_CASE("school effect covariance is recovered empirically at J=10000") {
  TrueParameters truth;
  truth.num_schools = 10000;
  truth.n_min = truth.n_max = 1;
  for (int r = 0; r < 3; ++r) truth.beta[r] = Eigen::VectorXd::Zero(1);
  truth.omega_u << 0.20, -0.05, -0.06, -0.05, 0.10, 0.05, -0.06, 0.05, 0.15;
  Simulation sim = generate_dataset(truth, 13);
  Eigen::Matrix3d cov = (sim.u_true.transpose() * sim.u_true) /
                        static_cast<double>(truth.num_schools);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (std::abs(truth.omega_u(a, b)) >= 0.05)
        CHECK(cov(a, b) == Catch::Approx(truth.omega_u(a, b)).epsilon(0.03));
}

TEST_CASE("round trip: regenerated log absences differ only by count rounding") {
  TrueParameters truth;
  truth.num_schools = 20;
  truth.n_min = truth.n_max = 40;
  truth.beta[0] = Eigen::VectorXd::Zero(1);
  truth.beta[1] = Eigen::VectorXd::Constant(1, 4.0);
  truth.beta[2] = Eigen::VectorXd::Zero(1);
  truth.omega_u = 0.05 * Eigen::Matrix3d::Identity();
  Simulation sim = generate_dataset(truth, 21);
  auto dir = test_helpers::temp_dir("sim_roundtrip");
  write_simulation_csvs(sim, (dir / "students.csv").string(),
                        (dir / "schools.csv").string());
  Dataset d = transform_outcomes(
      load_join_encode((dir / "students.csv").string(),
                       (dir / "schools.csv").string()),
      TransformConfig{});
  // students are re-sorted on validation; map by id
  std::map<std::string, double> y2_true;
  for (std::size_t i = 0; i < sim.students.size(); ++i)
    y2_true[sim.students[i].student_id] = sim.y2_true[i];
  std::map<std::string, long> counts;
  for (const auto& s : sim.students) counts[s.student_id] = s.total_absences;
  for (const auto& s : d.students) {
    double truth_y2 = y2_true.at(s.student_id);
    double k = static_cast<double>(counts.at(s.student_id));
    double bound = std::log((k + 1.0 + 1.0) / (k + 1.0));  // offset 1
    CHECK(std::abs(s.y2 - truth_y2) <= bound + 1e-12);
  }
}

TEST_CASE("truth json round trip") {
  TrueParameters truth;
  truth.num_schools = 17;
  truth.n_min = 3;
  truth.n_max = 9;
  truth.covariates = {"prior_attainment", "fsm"};
  for (int r = 0; r < 3; ++r) {
    truth.beta[r] = Eigen::VectorXd::Zero(3);
    truth.beta[r](0) = 0.5 * (r + 1);
  }
  truth.omega_u = 0.3 * Eigen::Matrix3d::Identity();
  auto j = truth_to_json(truth);
  TrueParameters back = truth_from_json(j);
  CHECK(back.num_schools == truth.num_schools);
  CHECK(back.covariates == truth.covariates);
  CHECK((back.omega_u - truth.omega_u).norm() == 0.0);
  CHECK(back.beta[2](0) == truth.beta[2](0));
}
