#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sva/dataset.hpp"
#include "sva/distributions.hpp"
#include "sva/rng.hpp"
#include "sva/simulate.hpp"

namespace sva {

struct ChainConfig {
  int burn_in = 500;
  int iterations = 10000;
  int thin = 1;
  std::uint64_t seed = 1;
  // inverse-Wishart prior: IW(df, multiplier * diag(starting variances))
  double prior_df_school = 3.0;
  double prior_df_student = 3.0;
  double prior_scale_multiplier = 3.0;

  void check() const {
    if (burn_in < 0) throw std::runtime_error("ChainConfig: burn_in < 0");
    if (iterations < 1) throw std::runtime_error("ChainConfig: iterations < 1");
    if (thin < 1) throw std::runtime_error("ChainConfig: thin < 1");
  }
};

struct ParameterState {
  std::array<Eigen::VectorXd, 3> beta;
  Eigen::MatrixXd u;         // J x 3 school effects
  Eigen::Matrix3d omega_u;   // school-level covariance
  Eigen::Matrix3d sigma_e;   // residual covariance, (3,3) pinned to 1
  Eigen::VectorXd ystar;     // latent exclusion propensities
};

struct ChainResult {
  std::array<Eigen::MatrixXd, 3> beta_draws;  // n_draws x p_r
  // covariance draws in lower-triangle order: 11, 21, 22, 31, 32, 33
  Eigen::MatrixXd omega_draws;
  Eigen::MatrixXd sigma_draws;
  std::array<Eigen::MatrixXd, 3> u_draws;  // n_draws x J, per response
  std::vector<std::string> school_ids;
  std::array<std::vector<std::string>, 3> column_names;
  std::uint64_t seed = 0;
  int sweeps = 0;
  int n_draws = 0;
  int burn_in = 0, iterations = 0, thin = 1;
};

// Gibbs sampler for the trivariate two-level mixed-response model. The binary
// outcome enters through latent propensities (data augmentation); the latent
// residual variance is pinned to 1 by rescaling after each unconstrained
// residual-covariance draw.
class GibbsSampler {
 public:
  GibbsSampler(const Dataset& data, const DesignBlocks& design,
               const ChainConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed) {
    cfg_.check();
    if (!data.validated)
      throw std::runtime_error("sampler: dataset not validated");
    n_ = static_cast<Eigen::Index>(data.num_students());
    J_ = data.num_schools();
    school_of_ = data.school_of;
    school_size_ = data.school_size;
    school_ids_.reserve(data.schools.size());
    for (const auto& s : data.schools) school_ids_.push_back(s.school_id);
    for (int r = 0; r < 3; ++r) {
      X_[r] = design.X[r];
      column_names_[r] = design.column_names[r];
      if (X_[r].rows() != n_)
        throw std::runtime_error("sampler: design row count mismatch");
    }
    y1_.resize(n_);
    y2_.resize(n_);
    y3_.resize(static_cast<std::size_t>(n_));
    for (Eigen::Index i = 0; i < n_; ++i) {
      const auto& s = data.students[static_cast<std::size_t>(i)];
      y1_(i) = s.y1;
      y2_(i) = s.y2;
      y3_[static_cast<std::size_t>(i)] = s.y3;
    }
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) gram_[r][s] = X_[r].transpose() * X_[s];
    initialize();
  }

  ParameterState& state() { return state_; }
  const ParameterState& state() const { return state_; }
  const Eigen::Matrix3d& prior_scale_school() const { return S0_u_; }
  const Eigen::Matrix3d& prior_scale_student() const { return S0_e_; }
  const std::vector<std::string>& school_ids() const { return school_ids_; }

  // Conditional moments, exposed so tests can check the closed forms without
  // Monte Carlo noise.
  std::pair<double, double> latent_conditional(Eigen::Index i) const {
    Eigen::Vector2d b;
    double tau2;
    latent_regression(b, tau2);
    int j = school_of_[static_cast<std::size_t>(i)];
    double e1 = y1_(i) - fitted_(i, 0) - state_.u(j, 0);
    double e2 = y2_(i) - fitted_(i, 1) - state_.u(j, 1);
    double mu = fitted_(i, 2) + state_.u(j, 2) + b(0) * e1 + b(1) * e2;
    return {mu, tau2};
  }

  std::pair<Eigen::VectorXd, Eigen::MatrixXd> beta_conditional() const {
    Eigen::MatrixXd precision;
    Eigen::VectorXd rhs;
    beta_system(precision, rhs);
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "sampler: fixed-effect precision not positive definite (collinear "
          "design)");
    Eigen::VectorXd mean = llt.solve(rhs);
    Eigen::MatrixXd cov = llt.solve(
        Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
    return {mean, cov};
  }

  std::pair<Eigen::Vector3d, Eigen::Matrix3d> school_conditional(int j) const {
    Eigen::Matrix3d w = sigma_e_inverse();
    Eigen::Matrix3d omega_inv = state_.omega_u.llt().solve(
        Eigen::Matrix3d::Identity());
    Eigen::Vector3d rsum = school_residual_sum(j);
    Eigen::Matrix3d prec = school_size_[j] * w + omega_inv;
    Eigen::Matrix3d cov = prec.llt().solve(Eigen::Matrix3d::Identity());
    Eigen::Vector3d mean = cov * (w * rsum);
    return {mean, cov};
  }

  std::pair<double, Eigen::Matrix3d> school_covariance_conditional() const {
    Eigen::Matrix3d scatter = state_.u.transpose() * state_.u;
    return {cfg_.prior_df_school + J_, S0_u_ + scatter};
  }

  std::pair<double, Eigen::Matrix3d> residual_covariance_conditional() const {
    Eigen::MatrixXd e = residual_matrix();
    Eigen::Matrix3d scatter = e.transpose() * e;
    return {cfg_.prior_df_student + static_cast<double>(n_), S0_e_ + scatter};
  }

  // Phi((x'b3 + u3) / sqrt(sigma_e[3,3])) for every student; invariant under
  // the identification rescale.
  Eigen::VectorXd probit_event_probabilities() const {
    double sd = std::sqrt(state_.sigma_e(2, 2));
    Eigen::VectorXd p(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      int j = school_of_[static_cast<std::size_t>(i)];
      p(i) = normal_cdf((fitted_(i, 2) + state_.u(j, 2)) / sd);
    }
    return p;
  }

  void update_latent_propensities() {
    Eigen::Vector2d b;
    double tau2;
    latent_regression(b, tau2);
    double tau = std::sqrt(tau2);
    for (Eigen::Index i = 0; i < n_; ++i) {
      int j = school_of_[static_cast<std::size_t>(i)];
      double e1 = y1_(i) - fitted_(i, 0) - state_.u(j, 0);
      double e2 = y2_(i) - fitted_(i, 1) - state_.u(j, 1);
      double mu = fitted_(i, 2) + state_.u(j, 2) + b(0) * e1 + b(1) * e2;
      state_.ystar(i) = truncated_normal(
          rng_, mu, tau, y3_[static_cast<std::size_t>(i)] == 1);
    }
  }

  void update_fixed_effects() {
    Eigen::MatrixXd precision;
    Eigen::VectorXd rhs;
    beta_system(precision, rhs);
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "sampler: fixed-effect precision not positive definite (collinear "
          "design)");
    Eigen::VectorXd mean = llt.solve(rhs);
    // draw = mean + L^-T z for precision = L L^T
    Eigen::VectorXd z(precision.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng_.normal();
    Eigen::MatrixXd l = llt.matrixL();
    Eigen::VectorXd draw =
        mean + l.transpose().triangularView<Eigen::Upper>().solve(z);
    Eigen::Index off = 0;
    for (int r = 0; r < 3; ++r) {
      state_.beta[r] = draw.segment(off, X_[r].cols());
      off += X_[r].cols();
    }
    refresh_fitted();
  }

  void update_school_effects() {
    Eigen::Matrix3d w = sigma_e_inverse();
    Eigen::Matrix3d omega_inv =
        state_.omega_u.llt().solve(Eigen::Matrix3d::Identity());
    Eigen::MatrixXd rsum = Eigen::MatrixXd::Zero(J_, 3);
    for (Eigen::Index i = 0; i < n_; ++i) {
      int j = school_of_[static_cast<std::size_t>(i)];
      rsum(j, 0) += y1_(i) - fitted_(i, 0);
      rsum(j, 1) += y2_(i) - fitted_(i, 1);
      rsum(j, 2) += state_.ystar(i) - fitted_(i, 2);
    }
    for (int j = 0; j < J_; ++j) {
      Eigen::Matrix3d prec = school_size_[j] * w + omega_inv;
      Eigen::LLT<Eigen::Matrix3d> llt(prec);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("sampler: school precision not PD");
      Eigen::Vector3d mean = llt.solve(w * rsum.row(j).transpose());
      Eigen::Vector3d z(rng_.normal(), rng_.normal(), rng_.normal());
      Eigen::Matrix3d l = llt.matrixL();
      Eigen::Vector3d draw =
          mean + l.transpose().triangularView<Eigen::Upper>().solve(z);
      state_.u.row(j) = draw.transpose();
    }
  }

  void update_school_covariance() {
    auto [df, scale] = school_covariance_conditional();
    state_.omega_u = inverse_wishart_draw(rng_, df, scale);
  }

  // Unconstrained inverse-Wishart draw; leaves sigma_e[3,3] free. Must be
  // followed by apply_identification_rescale.
  void update_residual_covariance_unconstrained() {
    auto [df, scale] = residual_covariance_conditional();
    state_.sigma_e = inverse_wishart_draw(rng_, df, scale);
    if (!(state_.sigma_e(2, 2) > 0.0))
      throw std::logic_error("sampler: drawn sigma_e[3,3] <= 0");
  }

  // Rescales the third response so sigma_e[3,3] = 1 exactly. The observed-data
  // likelihood is invariant: sign(ystar) and the probit event probabilities
  // are unchanged.
  void apply_identification_rescale() {
    double alpha = 1.0 / std::sqrt(state_.sigma_e(2, 2));
    state_.sigma_e.row(2) *= alpha;
    state_.sigma_e.col(2) *= alpha;
    state_.sigma_e(2, 2) = 1.0;
    state_.omega_u.row(2) *= alpha;
    state_.omega_u.col(2) *= alpha;
    state_.beta[2] *= alpha;
    state_.u.col(2) *= alpha;
    state_.ystar *= alpha;
    fitted_.col(2) *= alpha;
  }

  void sweep() {
    update_latent_propensities();
    update_fixed_effects();
    update_school_effects();
    update_school_covariance();
    update_residual_covariance_unconstrained();
    apply_identification_rescale();
  }

  using Observer = std::function<void(int sweep, const ParameterState&)>;

  ChainResult run(const Observer& observer = {}) {
    ChainResult out;
    out.seed = cfg_.seed;
    out.burn_in = cfg_.burn_in;
    out.iterations = cfg_.iterations;
    out.thin = cfg_.thin;
    out.school_ids = school_ids_;
    out.column_names = column_names_;
    out.n_draws = cfg_.iterations / cfg_.thin;
    for (int r = 0; r < 3; ++r) {
      out.beta_draws[r].resize(out.n_draws, X_[r].cols());
      out.u_draws[r].resize(out.n_draws, J_);
    }
    out.omega_draws.resize(out.n_draws, 6);
    out.sigma_draws.resize(out.n_draws, 6);

    int sweep_index = 0;
    auto do_sweep = [&]() {
      try {
        sweep();
      } catch (const std::exception& e) {
        throw std::runtime_error("sampler: sweep " +
                                 std::to_string(sweep_index) + ": " + e.what());
      }
      if (observer) observer(sweep_index, state_);
      ++sweep_index;
    };
    for (int t = 0; t < cfg_.burn_in; ++t) do_sweep();
    int stored = 0;
    for (int t = 1; t <= cfg_.iterations; ++t) {
      do_sweep();
      if (t % cfg_.thin == 0 && stored < out.n_draws) {
        for (int r = 0; r < 3; ++r) {
          out.beta_draws[r].row(stored) = state_.beta[r].transpose();
          out.u_draws[r].row(stored) = state_.u.col(r).transpose();
        }
        auto pack = [](const Eigen::Matrix3d& m, Eigen::MatrixXd& dst,
                       int row) {
          dst(row, 0) = m(0, 0);
          dst(row, 1) = m(1, 0);
          dst(row, 2) = m(1, 1);
          dst(row, 3) = m(2, 0);
          dst(row, 4) = m(2, 1);
          dst(row, 5) = m(2, 2);
        };
        pack(state_.omega_u, out.omega_draws, stored);
        pack(state_.sigma_e, out.sigma_draws, stored);
        ++stored;
      }
    }
    out.sweeps = sweep_index;
    return out;
  }

  // Recomputes cached fitted values; call after poking state() in tests.
  void refresh_fitted() {
    for (int r = 0; r < 3; ++r) fitted_.col(r) = X_[r] * state_.beta[r];
  }

 private:
  void initialize() {
    state_.u = Eigen::MatrixXd::Zero(J_, 3);
    fitted_.resize(n_, 3);

    // binary-outcome degeneracy guard
    int ones = 0;
    for (int v : y3_) ones += v;
    if (ones == 0 || ones == static_cast<int>(y3_.size()))
      throw std::runtime_error("sampler: degenerate binary outcome");

    state_.beta[0] = ols(X_[0], y1_);
    state_.beta[1] = ols(X_[1], y2_);
    state_.beta[2] = probit_irls(X_[2], y3_);

    state_.ystar.resize(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      state_.ystar(i) = y3_[static_cast<std::size_t>(i)] == 1 ? 0.5 : -0.5;

    std::array<double, 3> su2{}, se2{};
    std::vector<double> yv(static_cast<std::size_t>(n_));
    for (int r = 0; r < 3; ++r) {
      for (Eigen::Index i = 0; i < n_; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        yv[k] = r == 0 ? y1_(i) : (r == 1 ? y2_(i) : state_.ystar(i));
      }
      auto [su, se] = anova_variance_estimates(yv, school_of_, J_);
      su2[r] = su;
      se2[r] = se;
    }
    se2[2] = 1.0;  // identified scale
    state_.omega_u = Eigen::Vector3d(su2[0], su2[1], su2[2]).asDiagonal();
    state_.sigma_e = Eigen::Vector3d(se2[0], se2[1], se2[2]).asDiagonal();
    S0_u_ = cfg_.prior_scale_multiplier *
            Eigen::Matrix3d(
                Eigen::Vector3d(su2[0], su2[1], su2[2]).asDiagonal());
    S0_e_ = cfg_.prior_scale_multiplier *
            Eigen::Matrix3d(
                Eigen::Vector3d(se2[0], se2[1], se2[2]).asDiagonal());
    refresh_fitted();
  }

  static Eigen::VectorXd ols(const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y) {
    Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("sampler: singular design (collinear columns)");
    return llt.solve(X.transpose() * y);
  }

  Eigen::VectorXd probit_irls(const Eigen::MatrixXd& X,
                              const std::vector<int>& y) const {
    const Eigen::Index p = X.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (int iter = 0; iter < 50; ++iter) {
      Eigen::VectorXd eta = X * beta;
      Eigen::MatrixXd xw(X.rows(), p);
      Eigen::VectorXd wz(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double prob = normal_cdf(eta(i));
        prob = std::min(std::max(prob, 1e-6), 1.0 - 1e-6);
        double dens = normal_pdf(eta(i));
        double w = dens * dens / (prob * (1.0 - prob));
        double z = eta(i) +
                   (y[static_cast<std::size_t>(i)] - prob) / std::max(dens, 1e-10);
        xw.row(i) = w * X.row(i);
        wz(i) = w * z;
      }
      Eigen::MatrixXd xtwx = X.transpose() * xw;
      Eigen::LLT<Eigen::MatrixXd> llt(xtwx);
      if (llt.info() != Eigen::Success) break;
      Eigen::VectorXd next = llt.solve(X.transpose() * wz);
      if (!next.allFinite()) break;
      double step = (next - beta).norm();
      beta = next;
      if (step < 1e-8) return beta;
    }
    // fallback: least squares on 2y - 1, scaled by 2.5
    Eigen::VectorXd ypm(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      ypm(i) = 2.0 * y[static_cast<std::size_t>(i)] - 1.0;
    return 2.5 * ols(X, ypm);
  }

  Eigen::Matrix3d sigma_e_inverse() const {
    Eigen::LLT<Eigen::Matrix3d> llt(state_.sigma_e);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("sampler: sigma_e not positive definite");
    return llt.solve(Eigen::Matrix3d::Identity());
  }

  // regression of e3 on (e1, e2): coefficients and conditional variance
  void latent_regression(Eigen::Vector2d& b, double& tau2) const {
    Eigen::Matrix2d s11 = state_.sigma_e.topLeftCorner<2, 2>();
    Eigen::Vector2d s13 = state_.sigma_e.topRightCorner<2, 1>();
    Eigen::Matrix2d s11_inv = s11.inverse();
    b = s11_inv * s13;
    tau2 = state_.sigma_e(2, 2) - s13.dot(b);
    if (!(tau2 > 0.0))
      throw std::runtime_error(
          "sampler: conditional latent variance <= 0 (sigma_e not PD)");
  }

  void beta_system(Eigen::MatrixXd& precision, Eigen::VectorXd& rhs) const {
    Eigen::Matrix3d w = sigma_e_inverse();
    const Eigen::Index p_total = X_[0].cols() + X_[1].cols() + X_[2].cols();
    precision.setZero(p_total, p_total);
    rhs.setZero(p_total);
    // z_s = y_s - u broadcast
    Eigen::MatrixXd z(n_, 3);
    for (Eigen::Index i = 0; i < n_; ++i) {
      int j = school_of_[static_cast<std::size_t>(i)];
      z(i, 0) = y1_(i) - state_.u(j, 0);
      z(i, 1) = y2_(i) - state_.u(j, 1);
      z(i, 2) = state_.ystar(i) - state_.u(j, 2);
    }
    Eigen::Index off_r = 0;
    for (int r = 0; r < 3; ++r) {
      Eigen::Index off_s = 0;
      for (int s = 0; s < 3; ++s) {
        precision.block(off_r, off_s, X_[r].cols(), X_[s].cols()) =
            w(r, s) * gram_[r][s];
        off_s += X_[s].cols();
      }
      Eigen::VectorXd weighted = z * w.col(r);  // sum_s w(s,r) z_s, w symmetric
      rhs.segment(off_r, X_[r].cols()) = X_[r].transpose() * weighted;
      off_r += X_[r].cols();
    }
  }

  Eigen::Vector3d school_residual_sum(int j) const {
    Eigen::Vector3d rsum = Eigen::Vector3d::Zero();
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (school_of_[static_cast<std::size_t>(i)] != j) continue;
      rsum(0) += y1_(i) - fitted_(i, 0);
      rsum(1) += y2_(i) - fitted_(i, 1);
      rsum(2) += state_.ystar(i) - fitted_(i, 2);
    }
    return rsum;
  }

  Eigen::MatrixXd residual_matrix() const {
    Eigen::MatrixXd e(n_, 3);
    for (Eigen::Index i = 0; i < n_; ++i) {
      int j = school_of_[static_cast<std::size_t>(i)];
      e(i, 0) = y1_(i) - fitted_(i, 0) - state_.u(j, 0);
      e(i, 1) = y2_(i) - fitted_(i, 1) - state_.u(j, 1);
      e(i, 2) = state_.ystar(i) - fitted_(i, 2) - state_.u(j, 2);
    }
    return e;
  }

  ChainConfig cfg_;
  Rng rng_;
  Eigen::Index n_ = 0;
  int J_ = 0;
  std::vector<int> school_of_, school_size_;
  std::vector<std::string> school_ids_;
  std::array<Eigen::MatrixXd, 3> X_;
  std::array<std::array<Eigen::MatrixXd, 3>, 3> gram_;
  std::array<std::vector<std::string>, 3> column_names_;
  Eigen::VectorXd y1_, y2_;
  std::vector<int> y3_;
  Eigen::MatrixXd fitted_;  // N x 3, X_r * beta_r
  Eigen::Matrix3d S0_u_ = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d S0_e_ = Eigen::Matrix3d::Identity();
  ParameterState state_;
};

inline ChainResult run_chain(const Dataset& data, const DesignBlocks& design,
                             const ChainConfig& cfg,
                             const GibbsSampler::Observer& observer = {}) {
  GibbsSampler sampler(data, design, cfg);
  return sampler.run(observer);
}

}  // namespace sva
