#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sva {

// Names of the encoded design covariates, in canonical order. Student-level
// first (priors, then background dummies), school-level dummies last.
inline const std::vector<std::string>& student_covariate_names() {
  static const std::vector<std::string> names = {
      "prior_attainment", "prior_absences", "prior_excluded",
      "summer_born",      "female",         "eth_black",
      "eth_asian",        "eth_mixed",      "eth_other",
      "eal",              "sen",            "fsm"};
  return names;
}

inline const std::vector<std::string>& school_covariate_names() {
  static const std::vector<std::string> names = {
      "sch_academy", "sch_sponsored",        "sch_studio_utc",
      "adm_grammar", "adm_secondary_modern", "gen_boys",
      "gen_girls",   "religious"};
  return names;
}

struct StudentRecord {
  std::string student_id;
  std::string school_id;
  double y1 = 0.0;  // attainment score
  double y2 = 0.0;  // total absence sessions; log scale once transformed
  int y3 = 0;       // excluded indicator
  std::vector<double> covariates;  // aligned with Dataset::covariate_names
};

struct SchoolRecord {
  std::string school_id;
  std::vector<double> covariates;  // aligned with school_covariate_names()
};

struct Dataset {
  std::vector<StudentRecord> students;  // sorted by (school ordinal, id) once validated
  std::vector<SchoolRecord> schools;    // sorted by school_id once validated
  std::vector<std::string> covariate_names;
  std::vector<int> school_of;    // student -> school ordinal j in [0, J)
  std::vector<int> school_size;  // n_j
  bool validated = false;
  bool transformed = false;

  int num_schools() const { return static_cast<int>(schools.size()); }
  std::size_t num_students() const { return students.size(); }

  int covariate_index(const std::string& name) const {
    for (std::size_t i = 0; i < covariate_names.size(); ++i)
      if (covariate_names[i] == name) return static_cast<int>(i);
    throw std::runtime_error("unknown covariate name: " + name);
  }
};

// Checks the structural invariants, assigns school ordinals by ascending
// school_id and sorts students so each school's block is contiguous.
inline Dataset validate_dataset(Dataset raw) {
  if (raw.schools.size() < 2)
    throw std::runtime_error("validate_dataset: J < 2");
  std::sort(raw.schools.begin(), raw.schools.end(),
            [](const SchoolRecord& a, const SchoolRecord& b) {
              return a.school_id < b.school_id;
            });
  std::map<std::string, int> ordinal;
  for (std::size_t j = 0; j < raw.schools.size(); ++j) {
    if (!ordinal.emplace(raw.schools[j].school_id, static_cast<int>(j)).second)
      throw std::runtime_error("validate_dataset: duplicate school id '" +
                               raw.schools[j].school_id + "'");
  }
  std::set<std::string> student_ids;
  for (const auto& s : raw.students) {
    if (!student_ids.insert(s.student_id).second)
      throw std::runtime_error("validate_dataset: duplicate student id '" +
                               s.student_id + "'");
    if (ordinal.find(s.school_id) == ordinal.end())
      throw std::runtime_error("validate_dataset: student '" + s.student_id +
                               "' references unknown school '" + s.school_id +
                               "'");
    if (!std::isfinite(s.y1) || !std::isfinite(s.y2))
      throw std::runtime_error("validate_dataset: non-finite outcome for '" +
                               s.student_id + "'");
    if (s.y3 != 0 && s.y3 != 1)
      throw std::runtime_error("validate_dataset: y3 not in {0,1} for '" +
                               s.student_id + "'");
    if (s.covariates.size() != raw.covariate_names.size())
      throw std::runtime_error(
          "validate_dataset: covariate length mismatch for '" + s.student_id +
          "'");
    for (double v : s.covariates)
      if (!std::isfinite(v))
        throw std::runtime_error(
            "validate_dataset: non-finite covariate for '" + s.student_id +
            "'");
  }
  std::stable_sort(raw.students.begin(), raw.students.end(),
                   [&](const StudentRecord& a, const StudentRecord& b) {
                     int ja = ordinal.at(a.school_id);
                     int jb = ordinal.at(b.school_id);
                     if (ja != jb) return ja < jb;
                     return a.student_id < b.student_id;
                   });
  raw.school_of.resize(raw.students.size());
  raw.school_size.assign(raw.schools.size(), 0);
  for (std::size_t i = 0; i < raw.students.size(); ++i) {
    int j = ordinal.at(raw.students[i].school_id);
    raw.school_of[i] = j;
    ++raw.school_size[j];
  }
  for (std::size_t j = 0; j < raw.school_size.size(); ++j)
    if (raw.school_size[j] < 1)
      throw std::runtime_error("validate_dataset: school '" +
                               raw.schools[j].school_id + "' has no students");
  raw.validated = true;
  return raw;
}

enum class Preset { null_model, va, cva, cva_school, custom };

inline Preset parse_preset(const std::string& s) {
  if (s == "null") return Preset::null_model;
  if (s == "va") return Preset::va;
  if (s == "cva") return Preset::cva;
  if (s == "cva_school") return Preset::cva_school;
  if (s == "custom") return Preset::custom;
  throw std::runtime_error("unknown preset: " + s);
}

inline std::string preset_name(Preset p) {
  switch (p) {
    case Preset::null_model: return "null";
    case Preset::va: return "va";
    case Preset::cva: return "cva";
    case Preset::cva_school: return "cva_school";
    case Preset::custom: return "custom";
  }
  return "?";
}

// Covariate selection per equation. Presets use the same list for all three
// equations; custom specs may differ.
struct ModelSpec {
  Preset preset = Preset::null_model;
  std::array<std::vector<std::string>, 3> covariates;

  static ModelSpec make(Preset p) {
    ModelSpec spec;
    spec.preset = p;
    std::vector<std::string> names;
    switch (p) {
      case Preset::null_model:
        break;
      case Preset::va:
        names = {"prior_attainment", "prior_absences", "prior_excluded"};
        break;
      case Preset::cva:
        names = student_covariate_names();
        break;
      case Preset::cva_school:
        names = student_covariate_names();
        for (const auto& n : school_covariate_names()) names.push_back(n);
        break;
      case Preset::custom:
        throw std::runtime_error("custom ModelSpec requires explicit lists");
    }
    for (auto& eq : spec.covariates) eq = names;
    return spec;
  }

  static ModelSpec custom(std::array<std::vector<std::string>, 3> lists) {
    ModelSpec spec;
    spec.preset = Preset::custom;
    spec.covariates = std::move(lists);
    return spec;
  }
};

struct DesignBlocks {
  std::array<Eigen::MatrixXd, 3> X;                       // N x p_r
  std::array<std::vector<std::string>, 3> column_names;   // "intercept" first
};

// Builds the three per-equation design matrices (intercept-first, then spec
// order). Pure: identical inputs give identical matrices.
inline DesignBlocks build_design(const Dataset& data, const ModelSpec& spec) {
  if (!data.validated)
    throw std::runtime_error("build_design: dataset not validated");
  const Eigen::Index n = static_cast<Eigen::Index>(data.num_students());
  DesignBlocks design;
  for (int r = 0; r < 3; ++r) {
    const auto& names = spec.covariates[r];
    design.column_names[r].clear();
    design.column_names[r].push_back("intercept");
    design.X[r].resize(n, static_cast<Eigen::Index>(names.size()) + 1);
    design.X[r].col(0).setOnes();
    for (std::size_t c = 0; c < names.size(); ++c) {
      int idx = data.covariate_index(names[c]);  // throws on unknown name
      for (Eigen::Index i = 0; i < n; ++i)
        design.X[r](i, static_cast<Eigen::Index>(c) + 1) =
            data.students[static_cast<std::size_t>(i)]
                .covariates[static_cast<std::size_t>(idx)];
      double first = design.X[r](0, static_cast<Eigen::Index>(c) + 1);
      bool constant =
          (design.X[r].col(static_cast<Eigen::Index>(c) + 1).array() == first)
              .all();
      if (constant)
        throw std::runtime_error("build_design: covariate '" + names[c] +
                                 "' is constant (collinear with intercept)");
      design.column_names[r].push_back(names[c]);
    }
  }
  return design;
}

}  // namespace sva
