#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sva/csv.hpp"
#include "sva/dataset.hpp"

namespace sva {

struct TransformConfig {
  double log_offset = 1.0;
  bool standardize_prior_attainment = true;
};

namespace detail {

inline const std::vector<std::string>& students_header() {
  static const std::vector<std::string> h = {
      "student_id", "school_id",   "attainment8",    "total_absences",
      "excluded",   "ks2_score",   "prior_absences", "prior_excluded",
      "summer_born", "female",     "ethnicity",      "eal",
      "sen",        "fsm"};
  return h;
}

inline const std::vector<std::string>& schools_header() {
  static const std::vector<std::string> h = {
      "school_id", "school_type", "admissions", "school_gender", "religious"};
  return h;
}

inline int parse_binary(const std::string& s, const std::string& field,
                        long line) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw std::runtime_error("line " + std::to_string(line) + ": field '" +
                           field + "' must be 0 or 1, got '" + s + "'");
}

inline long parse_count(const std::string& s, const std::string& field,
                        long line) {
  long v;
  try {
    v = parse_long(s, field);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line) + ": field '" +
                             field + "' must be a non-negative integer, got '" +
                             s + "'");
  }
  if (v < 0)
    throw std::runtime_error("line " + std::to_string(line) + ": field '" +
                             field + "' is negative");
  return v;
}

// index of token in categories, 0 being the reference level
inline int category_index(const std::string& token,
                          const std::vector<std::string>& categories,
                          const std::string& field, long line) {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (token == categories[i]) return static_cast<int>(i);
  throw std::runtime_error("line " + std::to_string(line) +
                           ": unknown category '" + token + "' in field '" +
                           field + "'");
}

}  // namespace detail

// Reads students.csv and schools.csv, expands categoricals into reference-coded
// dummies, joins school covariates onto each student and validates the result.
// Outcomes and prior attainment are left on their raw scales; apply
// transform_outcomes before fitting.
inline Dataset load_join_encode(const std::string& students_path,
                                const std::string& schools_path) {
  CsvTable schools_csv = read_csv(schools_path);
  if (schools_csv.header != detail::schools_header())
    throw std::runtime_error(schools_path + ": unexpected header");
  static const std::vector<std::string> type_cats = {"community", "academy",
                                                     "sponsored", "studio_utc"};
  static const std::vector<std::string> adm_cats = {"comprehensive", "grammar",
                                                    "secondary_modern"};
  static const std::vector<std::string> gender_cats = {"mixed", "boys",
                                                       "girls"};
  std::map<std::string, SchoolRecord> school_table;
  long line = 1;
  for (const auto& row : schools_csv.rows) {
    ++line;
    SchoolRecord rec;
    rec.school_id = row[0];
    int type = detail::category_index(row[1], type_cats, "school_type", line);
    int adm = detail::category_index(row[2], adm_cats, "admissions", line);
    int gender =
        detail::category_index(row[3], gender_cats, "school_gender", line);
    int religious = detail::parse_binary(row[4], "religious", line);
    rec.covariates = {type == 1 ? 1.0 : 0.0,      type == 2 ? 1.0 : 0.0,
                      type == 3 ? 1.0 : 0.0,      adm == 1 ? 1.0 : 0.0,
                      adm == 2 ? 1.0 : 0.0,       gender == 1 ? 1.0 : 0.0,
                      gender == 2 ? 1.0 : 0.0,    static_cast<double>(religious)};
    if (!school_table.emplace(rec.school_id, rec).second)
      throw std::runtime_error(schools_path + ": line " +
                               std::to_string(line) + ": duplicate school id '" +
                               rec.school_id + "'");
  }

  CsvTable students_csv = read_csv(students_path);
  if (students_csv.header != detail::students_header())
    throw std::runtime_error(students_path + ": unexpected header");
  static const std::vector<std::string> eth_cats = {"white", "black", "asian",
                                                    "mixed", "other"};
  Dataset data;
  data.covariate_names = student_covariate_names();
  for (const auto& n : school_covariate_names())
    data.covariate_names.push_back(n);
  for (auto& [id, rec] : school_table) data.schools.push_back(rec);

  line = 1;
  for (const auto& row : students_csv.rows) {
    ++line;
    StudentRecord s;
    s.student_id = row[0];
    s.school_id = row[1];
    auto it = school_table.find(s.school_id);
    if (it == school_table.end())
      throw std::runtime_error(students_path + ": line " +
                               std::to_string(line) + ": school '" +
                               s.school_id + "' not present in schools file");
    s.y1 = parse_double(row[2], students_path + " line " +
                                    std::to_string(line) + " attainment8");
    s.y2 = static_cast<double>(
        detail::parse_count(row[3], "total_absences", line));
    s.y3 = detail::parse_binary(row[4], "excluded", line);
    double ks2 = parse_double(
        row[5], students_path + " line " + std::to_string(line) + " ks2_score");
    double prior_abs = static_cast<double>(
        detail::parse_count(row[6], "prior_absences", line));
    int prior_excl = detail::parse_binary(row[7], "prior_excluded", line);
    int summer = detail::parse_binary(row[8], "summer_born", line);
    int female = detail::parse_binary(row[9], "female", line);
    int eth = detail::category_index(row[10], eth_cats, "ethnicity", line);
    int eal = detail::parse_binary(row[11], "eal", line);
    int sen = detail::parse_binary(row[12], "sen", line);
    int fsm = detail::parse_binary(row[13], "fsm", line);
    s.covariates = {ks2,
                    prior_abs,
                    static_cast<double>(prior_excl),
                    static_cast<double>(summer),
                    static_cast<double>(female),
                    eth == 1 ? 1.0 : 0.0,
                    eth == 2 ? 1.0 : 0.0,
                    eth == 3 ? 1.0 : 0.0,
                    eth == 4 ? 1.0 : 0.0,
                    static_cast<double>(eal),
                    static_cast<double>(sen),
                    static_cast<double>(fsm)};
    for (double v : it->second.covariates) s.covariates.push_back(v);
    data.students.push_back(std::move(s));
  }
  return validate_dataset(std::move(data));
}

// Applies the outcome transformations: y2 = ln(total_absences + offset) and
// prior attainment replaced by its in-sample z-score (sample SD, divisor N-1).
// A dataset may be transformed only once.
inline Dataset transform_outcomes(Dataset data, const TransformConfig& cfg) {
  if (!data.validated)
    throw std::runtime_error("transform_outcomes: dataset not validated");
  if (data.transformed)
    throw std::runtime_error("transform_outcomes: dataset already transformed");
  if (cfg.log_offset < 0.0)
    throw std::runtime_error("transform_outcomes: negative log offset");
  const std::size_t n = data.num_students();
  if (cfg.log_offset == 0.0) {
    for (const auto& s : data.students)
      if (s.y2 == 0.0)
        throw std::runtime_error(
            "transform_outcomes: log offset 0 with zero absence count "
            "(student '" +
            s.student_id + "')");
  }
  for (auto& s : data.students) s.y2 = std::log(s.y2 + cfg.log_offset);

  if (cfg.standardize_prior_attainment) {
    const int idx = data.covariate_index("prior_attainment");
    double mean = 0.0;
    for (const auto& s : data.students) mean += s.covariates[idx];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : data.students) {
      double d = s.covariates[idx] - mean;
      ss += d * d;
    }
    if (n < 2 || ss == 0.0)
      throw std::runtime_error(
          "transform_outcomes: prior attainment has zero variance");
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    for (auto& s : data.students) s.covariates[idx] = (s.covariates[idx] - mean) / sd;
  }
  data.transformed = true;
  return data;
}

}  // namespace sva
