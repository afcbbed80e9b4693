#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sva/csv.hpp"
#include "sva/dataset.hpp"
#include "sva/distributions.hpp"
#include "sva/rng.hpp"

namespace sva {

// Ground truth for the forward model plus the covariate generator knobs.
// sigma_e(2,2) must equal 1 (latent-probit identification).
struct TrueParameters {
  int num_schools = 100;
  int n_min = 50;
  int n_max = 50;
  std::vector<std::string> covariates;           // design covariates in use
  std::array<Eigen::VectorXd, 3> beta;           // intercept-first, 1+k each
  Eigen::Matrix3d omega_u = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d sigma_e = Eigen::Matrix3d::Identity();
  double log_offset = 1.0;

  // covariate generator: binary prevalences, categorical probabilities and
  // the prior-absence count distribution (folded normal, rounded)
  std::map<std::string, double> prevalence = {
      {"prior_excluded", 0.0062}, {"summer_born", 0.4225}, {"female", 0.4857},
      {"eal", 0.1455},            {"sen", 0.1279},         {"fsm", 0.2626}};
  std::array<double, 5> ethnicity_probs = {0.7692, 0.0566, 0.1075, 0.0462,
                                           0.0205};
  std::array<double, 4> school_type_probs = {0.31, 0.4367, 0.24, 0.0133};
  std::array<double, 3> admissions_probs = {0.91, 0.05, 0.04};
  std::array<double, 3> school_gender_probs = {0.88, 0.0667, 0.0533};
  double religious_prob = 0.19;
  double prior_absence_mean = 15.0;
  double prior_absence_sd = 15.0;

  void check() const {
    if (num_schools < 2) throw std::runtime_error("truth: num_schools < 2");
    if (n_min < 1 || n_max < n_min)
      throw std::runtime_error("truth: invalid school size range");
    if (std::abs(sigma_e(2, 2) - 1.0) > 1e-12)
      throw std::runtime_error("truth: sigma_e[3,3] must be 1");
    if (omega_u.llt().info() != Eigen::Success)
      throw std::runtime_error("truth: omega_u not positive definite");
    if (sigma_e.llt().info() != Eigen::Success)
      throw std::runtime_error("truth: sigma_e not positive definite");
    for (int r = 0; r < 3; ++r)
      if (beta[r].size() != static_cast<Eigen::Index>(covariates.size()) + 1)
        throw std::runtime_error("truth: beta length mismatch");
    for (const auto& [k, p] : prevalence)
      if (p < 0.0 || p > 1.0)
        throw std::runtime_error("truth: prevalence outside [0,1] for " + k);
  }
};

// One row of the ingest schema, pre-encoding.
struct RawStudentRow {
  std::string student_id, school_id;
  double attainment8 = 0.0;
  long total_absences = 0;
  int excluded = 0;
  double ks2_score = 0.0;
  long prior_absences = 0;
  int prior_excluded = 0, summer_born = 0, female = 0;
  std::string ethnicity = "white";
  int eal = 0, sen = 0, fsm = 0;
};

struct RawSchoolRow {
  std::string school_id, school_type, admissions, school_gender;
  int religious = 0;
};

struct Simulation {
  std::vector<RawStudentRow> students;
  std::vector<RawSchoolRow> schools;
  Eigen::MatrixXd u_true;          // J x 3
  std::vector<double> y2_true;     // latent (pre-rounding) log absences
  TrueParameters truth;
  std::uint64_t seed = 0;
};

namespace detail {

inline int draw_category(Rng& rng, const double* probs, int k) {
  double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    acc += probs[i];
    if (u <= acc) return i;
  }
  return k - 1;
}

}  // namespace detail

// Runs the model forward: school effects from omega_u, student residuals from
// sigma_e, binary outcome from the sign of the latent propensity. Absence
// counts are back-transformed as round(exp(y2)) - offset, floored at 0, so the
// emitted CSVs are valid ingest input.
inline Simulation generate_dataset(const TrueParameters& truth,
                                   std::uint64_t seed) {
  truth.check();
  Rng rng(seed);
  Simulation sim;
  sim.truth = truth;
  sim.seed = seed;
  const int J = truth.num_schools;
  Eigen::LLT<Eigen::Matrix3d> lu(truth.omega_u);
  Eigen::LLT<Eigen::Matrix3d> le(truth.sigma_e);
  Eigen::Matrix3d Lu = lu.matrixL();
  Eigen::Matrix3d Le = le.matrixL();

  sim.u_true.resize(J, 3);
  static const char* type_tokens[] = {"community", "academy", "sponsored",
                                      "studio_utc"};
  static const char* adm_tokens[] = {"comprehensive", "grammar",
                                     "secondary_modern"};
  static const char* gender_tokens[] = {"mixed", "boys", "girls"};
  static const char* eth_tokens[] = {"white", "black", "asian", "mixed",
                                     "other"};
  long next_student = 1;
  for (int j = 0; j < J; ++j) {
    RawSchoolRow sch;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "S%05d", j + 1);
    sch.school_id = buf;
    int type = detail::draw_category(rng, truth.school_type_probs.data(), 4);
    int adm = detail::draw_category(rng, truth.admissions_probs.data(), 3);
    int gender =
        detail::draw_category(rng, truth.school_gender_probs.data(), 3);
    sch.school_type = type_tokens[type];
    sch.admissions = adm_tokens[adm];
    sch.school_gender = gender_tokens[gender];
    sch.religious = rng.uniform() < truth.religious_prob ? 1 : 0;
    sim.schools.push_back(sch);

    Eigen::Vector3d zu;
    zu << rng.normal(), rng.normal(), rng.normal();
    Eigen::Vector3d u = Lu * zu;
    sim.u_true.row(j) = u.transpose();

    // values of the school-level design covariates for this school
    std::map<std::string, double> school_design = {
        {"sch_academy", type == 1 ? 1.0 : 0.0},
        {"sch_sponsored", type == 2 ? 1.0 : 0.0},
        {"sch_studio_utc", type == 3 ? 1.0 : 0.0},
        {"adm_grammar", adm == 1 ? 1.0 : 0.0},
        {"adm_secondary_modern", adm == 2 ? 1.0 : 0.0},
        {"gen_boys", gender == 1 ? 1.0 : 0.0},
        {"gen_girls", gender == 2 ? 1.0 : 0.0},
        {"religious", static_cast<double>(sch.religious)}};

    int n_j = truth.n_min == truth.n_max
                  ? truth.n_min
                  : rng.uniform_int(truth.n_min, truth.n_max);
    for (int i = 0; i < n_j; ++i) {
      RawStudentRow s;
      std::snprintf(buf, sizeof(buf), "P%08ld", next_student++);
      s.student_id = buf;
      s.school_id = sch.school_id;
      s.ks2_score = rng.normal();  // ingest re-centres; near-identity
      double pa = truth.prior_absence_mean +
                  truth.prior_absence_sd * rng.normal();
      s.prior_absences = std::lround(std::abs(pa));
      auto flip = [&](const char* name) {
        return rng.uniform() < truth.prevalence.at(name) ? 1 : 0;
      };
      s.prior_excluded = flip("prior_excluded");
      s.summer_born = flip("summer_born");
      s.female = flip("female");
      int eth = detail::draw_category(rng, truth.ethnicity_probs.data(), 5);
      s.ethnicity = eth_tokens[eth];
      s.eal = flip("eal");
      s.sen = flip("sen");
      s.fsm = flip("fsm");

      std::map<std::string, double> design = {
          {"prior_attainment", s.ks2_score},
          {"prior_absences", static_cast<double>(s.prior_absences)},
          {"prior_excluded", static_cast<double>(s.prior_excluded)},
          {"summer_born", static_cast<double>(s.summer_born)},
          {"female", static_cast<double>(s.female)},
          {"eth_black", eth == 1 ? 1.0 : 0.0},
          {"eth_asian", eth == 2 ? 1.0 : 0.0},
          {"eth_mixed", eth == 3 ? 1.0 : 0.0},
          {"eth_other", eth == 4 ? 1.0 : 0.0},
          {"eal", static_cast<double>(s.eal)},
          {"sen", static_cast<double>(s.sen)},
          {"fsm", static_cast<double>(s.fsm)}};
      for (const auto& [k, v] : school_design) design[k] = v;

      Eigen::Vector3d lp;
      for (int r = 0; r < 3; ++r) {
        double v = truth.beta[r](0);
        for (std::size_t c = 0; c < truth.covariates.size(); ++c)
          v += truth.beta[r](static_cast<Eigen::Index>(c) + 1) *
               design.at(truth.covariates[c]);
        lp(r) = v;
      }
      Eigen::Vector3d ze;
      ze << rng.normal(), rng.normal(), rng.normal();
      Eigen::Vector3d e = Le * ze;
      double y1 = lp(0) + u(0) + e(0);
      double y2 = lp(1) + u(1) + e(1);
      double y3s = lp(2) + u(2) + e(2);
      s.attainment8 = y1;
      long count = std::lround(std::exp(y2)) -
                   static_cast<long>(std::llround(truth.log_offset));
      s.total_absences = std::max(0L, count);
      s.excluded = y3s >= 0.0 ? 1 : 0;
      sim.y2_true.push_back(y2);
      sim.students.push_back(std::move(s));
    }
  }
  return sim;
}

inline void write_simulation_csvs(const Simulation& sim,
                                  const std::string& students_path,
                                  const std::string& schools_path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : sim.students)
    rows.push_back({s.student_id, s.school_id, format_double(s.attainment8),
                    std::to_string(s.total_absences),
                    std::to_string(s.excluded), format_double(s.ks2_score),
                    std::to_string(s.prior_absences),
                    std::to_string(s.prior_excluded),
                    std::to_string(s.summer_born), std::to_string(s.female),
                    s.ethnicity, std::to_string(s.eal), std::to_string(s.sen),
                    std::to_string(s.fsm)});
  write_csv(students_path,
            {"student_id", "school_id", "attainment8", "total_absences",
             "excluded", "ks2_score", "prior_absences", "prior_excluded",
             "summer_born", "female", "ethnicity", "eal", "sen", "fsm"},
            rows);
  rows.clear();
  for (const auto& s : sim.schools)
    rows.push_back({s.school_id, s.school_type, s.admissions, s.school_gender,
                    std::to_string(s.religious)});
  write_csv(schools_path,
            {"school_id", "school_type", "admissions", "school_gender",
             "religious"},
            rows);
}

inline nlohmann::json truth_to_json(const TrueParameters& t) {
  nlohmann::json j;
  j["num_schools"] = t.num_schools;
  j["n_min"] = t.n_min;
  j["n_max"] = t.n_max;
  j["covariates"] = t.covariates;
  for (int r = 0; r < 3; ++r) {
    std::vector<double> b(t.beta[r].data(), t.beta[r].data() + t.beta[r].size());
    j["beta" + std::to_string(r + 1)] = b;
  }
  auto mat = [](const Eigen::Matrix3d& m) {
    std::vector<double> v;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) v.push_back(m(a, b));
    return v;
  };
  j["omega_u"] = mat(t.omega_u);
  j["sigma_e"] = mat(t.sigma_e);
  j["log_offset"] = t.log_offset;
  for (const auto& [k, v] : t.prevalence) j["prevalence_" + k] = v;
  j["ethnicity_probs"] = t.ethnicity_probs;
  j["school_type_probs"] = t.school_type_probs;
  j["admissions_probs"] = t.admissions_probs;
  j["school_gender_probs"] = t.school_gender_probs;
  j["religious_prob"] = t.religious_prob;
  j["prior_absence_mean"] = t.prior_absence_mean;
  j["prior_absence_sd"] = t.prior_absence_sd;
  return j;
}

inline TrueParameters truth_from_json(const nlohmann::json& j) {
  TrueParameters t;
  t.num_schools = j.at("num_schools").get<int>();
  if (j.contains("n")) {
    t.n_min = t.n_max = j.at("n").get<int>();
  } else {
    t.n_min = j.at("n_min").get<int>();
    t.n_max = j.at("n_max").get<int>();
  }
  if (j.contains("covariates"))
    t.covariates = j.at("covariates").get<std::vector<std::string>>();
  for (int r = 0; r < 3; ++r) {
    auto b =
        j.at("beta" + std::to_string(r + 1)).get<std::vector<double>>();
    t.beta[r] = Eigen::Map<Eigen::VectorXd>(b.data(),
                                            static_cast<Eigen::Index>(b.size()));
  }
  auto mat = [&](const std::string& key) {
    auto v = j.at(key).get<std::vector<double>>();
    Eigen::Matrix3d m;
    if (v.size() == 9) {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) m(a, b) = v[3 * a + b];
    } else if (v.size() == 6) {  // lower triangle: 11,21,22,31,32,33
      m << v[0], v[1], v[3], v[1], v[2], v[4], v[3], v[4], v[5];
    } else {
      throw std::runtime_error("truth: " + key + " needs 6 or 9 entries");
    }
    return m;
  };
  t.omega_u = mat("omega_u");
  t.sigma_e = mat("sigma_e");
  if (j.contains("log_offset")) t.log_offset = j.at("log_offset").get<double>();
  for (auto& [k, v] : t.prevalence)
    if (j.contains("prevalence_" + k)) v = j.at("prevalence_" + k).get<double>();
  if (j.contains("prior_absence_mean"))
    t.prior_absence_mean = j.at("prior_absence_mean").get<double>();
  if (j.contains("prior_absence_sd"))
    t.prior_absence_sd = j.at("prior_absence_sd").get<double>();
  t.check();
  return t;
}

// One-way ANOVA variance components with the balanced formula applied at the
// mean group size. Used only for starting values.
inline std::pair<double, double> anova_variance_estimates(
    const std::vector<double>& y, const std::vector<int>& group, int J,
    double floor = 1e-4) {
  if (J < 2) throw std::runtime_error("anova_variance_estimates: J < 2");
  const std::size_t n = y.size();
  std::vector<double> sum(J, 0.0);
  std::vector<int> cnt(J, 0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum[group[i]] += y[i];
    ++cnt[group[i]];
    grand += y[i];
  }
  grand /= static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mj = sum[group[i]] / cnt[group[i]];
    double d = y[i] - mj;
    ssw += d * d;
  }
  for (int j = 0; j < J; ++j) {
    double mj = sum[j] / cnt[j];
    ssb += cnt[j] * (mj - grand) * (mj - grand);
  }
  double msb = ssb / (J - 1);
  double msw = n > static_cast<std::size_t>(J)
                   ? ssw / static_cast<double>(n - J)
                   : 0.0;
  double nbar = static_cast<double>(n) / J;
  double su2 = std::max((msb - msw) / nbar, floor);
  double se2 = std::max(msw, floor);
  return {su2, se2};
}

// Exact posterior of beta under a flat prior with known residual variance and
// no random effects: N(beta_gls, sigma2 (X'X)^-1). Verification oracle only.
struct ConjugatePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline ConjugatePosterior conjugate_beta_oracle(const Eigen::VectorXd& y,
                                                const Eigen::MatrixXd& X,
                                                double sigma2) {
  Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("conjugate_beta_oracle: singular X'X");
  ConjugatePosterior post;
  post.mean = llt.solve(X.transpose() * y);
  post.cov =
      sigma2 * llt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  return post;
}

}  // namespace sva
