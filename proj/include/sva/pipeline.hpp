#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sva/csv.hpp"
#include "sva/dataset.hpp"
#include "sva/diagnostics.hpp"
#include "sva/ingest.hpp"
#include "sva/posthoc.hpp"
#include "sva/sampler.hpp"

namespace sva {

inline const std::array<std::string, 3>& response_names() {
  static const std::array<std::string, 3> names = {"attainment", "log_absences",
                                                   "exclusions"};
  return names;
}

struct FitOptions {
  std::string students_path;
  std::string schools_path;
  std::string out_dir;
  Preset preset = Preset::null_model;
  ChainConfig chain;
  TransformConfig transform;
  IntervalMode interval = IntervalMode::quantile;
  bool write_chains = false;
  bool write_traces = false;
};

namespace detail {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("[" + name + "] " + e.what());
  }
}

inline std::string tri_name(int col) {
  static const char* names[6] = {"1_1", "2_1", "2_2", "3_1", "3_2", "3_3"};
  return names[col];
}

// monitored scalars: every covariance entry, every coefficient, and five
// seeded school effects per response
struct Monitored {
  std::string name;
  std::vector<double> draws;
};

inline std::vector<Monitored> monitored_scalars(const ChainResult& chain) {
  std::vector<Monitored> out;
  for (int c = 0; c < 6; ++c)
    out.push_back({"omega_u." + tri_name(c), column_draws(chain.omega_draws, c)});
  for (int c = 0; c < 6; ++c) {
    if (c == 5) continue;  // sigma_e[3,3] is pinned to 1
    out.push_back({"sigma_e." + tri_name(c), column_draws(chain.sigma_draws, c)});
  }
  for (int r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < chain.beta_draws[r].cols(); ++c)
      out.push_back({"beta." + response_names()[r] + "." +
                         chain.column_names[r][static_cast<std::size_t>(c)],
                     column_draws(chain.beta_draws[r], static_cast<int>(c))});
  const int J = static_cast<int>(chain.school_ids.size());
  Rng pick(chain.seed ^ 0x9e3779b97f4a7c15ULL);
  std::set<int> chosen;
  int want = std::min(5, J);
  while (static_cast<int>(chosen.size()) < want)
    chosen.insert(pick.uniform_int(0, J - 1));
  for (int r = 0; r < 3; ++r)
    for (int j : chosen)
      out.push_back({"u." + response_names()[r] + "." +
                         chain.school_ids[static_cast<std::size_t>(j)],
                     column_draws(chain.u_draws[r], j)});
  return out;
}

}  // namespace detail

// fit.json: flat map with dotted keys (documented in the README).
inline nlohmann::json build_fit_json(const ChainResult& chain,
                                     const DesignBlocks& design, Preset preset,
                                     IntervalMode interval,
                                     const SchoolEffectSummary& schools) {
  nlohmann::json j;
  j["meta.preset"] = preset_name(preset);
  j["meta.seed"] = chain.seed;
  j["meta.burn_in"] = chain.burn_in;
  j["meta.iterations"] = chain.iterations;
  j["meta.thin"] = chain.thin;
  j["meta.n_draws"] = chain.n_draws;
  j["meta.schools"] = chain.school_ids.size();
  j["meta.students"] = static_cast<long>(design.X[0].rows());
  j["meta.interval"] =
      interval == IntervalMode::quantile ? "quantile" : "normal";

  StandardizedTable table = standardize_estimates(chain, design);
  auto fixed_var = fixed_part_variances(chain, design);
  CorrelationMatrices corr = school_correlations(chain);

  for (int r = 0; r < 3; ++r) {
    const std::string& resp = response_names()[r];
    for (Eigen::Index c = 0; c < chain.beta_draws[r].cols(); ++c) {
      auto s = summarize_draws(column_draws(chain.beta_draws[r],
                                            static_cast<int>(c)));
      const std::string key =
          resp + ".coef." + chain.column_names[r][static_cast<std::size_t>(c)];
      j[key + ".mean"] = s.mean;
      j[key + ".sd"] = s.sd;
      j[key + ".q025"] = s.q025;
      j[key + ".q975"] = s.q975;
      j[resp + ".coef_std." +
        chain.column_names[r][static_cast<std::size_t>(c)]] =
          table.response[r].beta_star[static_cast<std::size_t>(c)];
    }
    int vu = r == 0 ? 0 : (r == 1 ? 2 : 5);
    auto su = summarize_draws(column_draws(chain.omega_draws, vu));
    auto se = summarize_draws(column_draws(chain.sigma_draws, vu));
    j[resp + ".school_variance.mean"] = su.mean;
    j[resp + ".school_variance.sd"] = su.sd;
    j[resp + ".student_variance.mean"] = se.mean;
    j[resp + ".student_variance.sd"] = se.sd;
    j[resp + ".school_variance_std"] = table.response[r].school_variance_star;
    j[resp + ".student_variance_std"] = table.response[r].student_variance_star;
    j[resp + ".vpc"] = table.response[r].vpc;
    j[resp + ".r_squared"] = table.response[r].r_squared;
    j[resp + ".scaling_denominator"] = table.response[r].scaling_denominator;
    j[resp + ".fixed_part_variance"] = fixed_var[r];
    j["report.prop_significant." + resp] = schools.proportion_significant[r];
  }
  for (int c = 0; c < 6; ++c) {
    j["cov.school." + detail::tri_name(c) + ".mean"] =
        chain.omega_draws.col(c).mean();
    j["cov.student." + detail::tri_name(c) + ".mean"] =
        chain.sigma_draws.col(c).mean();
  }
  const char* pair_names[3] = {"1_2", "1_3", "2_3"};
  const int pr[3] = {0, 0, 1};
  const int ps[3] = {1, 2, 2};
  for (int k = 0; k < 3; ++k) {
    j[std::string("corr.school.") + pair_names[k]] = corr.school(ps[k], pr[k]);
    j[std::string("corr.student.") + pair_names[k]] = corr.student(ps[k], pr[k]);
  }
  return j;
}

inline void write_school_effects_csv(const std::string& path,
                                     const SchoolEffectSummary& schools) {
  std::vector<std::vector<std::string>> rows;
  for (int r = 0; r < 3; ++r)
    for (const auto& e : schools.response[r])
      rows.push_back({response_names()[r], e.school_id,
                      std::to_string(e.rank), format_double(e.mean),
                      format_double(e.sd), format_double(e.lower),
                      format_double(e.upper), e.significant ? "1" : "0"});
  write_csv(path,
            {"response", "school_id", "rank", "mean", "sd", "lower", "upper",
             "significant"},
            rows);
}

inline void write_diagnostics_csv(const std::string& path,
                                  const std::vector<ScalarDiagnostic>& diags) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : diags)
    rows.push_back({d.name, format_double(d.ess), format_double(d.geweke),
                    format_double(d.lag1), d.degenerate ? "1" : "0"});
  write_csv(path, {"name", "ess", "geweke_z", "lag1_autocorr", "degenerate"},
            rows);
}

// Runs the full fit pipeline and writes fit.json, school_effects.csv,
// diagnostics.csv and optional chain/trace CSVs into out_dir.
inline void run_fit(const FitOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);

  Dataset data = detail::stage("ingest", [&] {
    return transform_outcomes(
        load_join_encode(opt.students_path, opt.schools_path), opt.transform);
  });
  DesignBlocks design = detail::stage("design", [&] {
    return build_design(data, ModelSpec::make(opt.preset));
  });
  ChainResult chain = detail::stage(
      "sampler", [&] { return run_chain(data, design, opt.chain); });
  SchoolEffectSummary schools;
  nlohmann::json fit;
  detail::stage("posthoc", [&] {
    schools = summarize_school_effects(chain, opt.interval);
    fit = build_fit_json(chain, design, opt.preset, opt.interval, schools);
    return 0;
  });
  std::vector<ScalarDiagnostic> diags;
  detail::stage("diagnostics", [&] {
    for (const auto& m : detail::monitored_scalars(chain))
      diags.push_back(diagnose_scalar(m.name, m.draws));
    return 0;
  });
  detail::stage("emit", [&] {
    std::ofstream out(fs::path(opt.out_dir) / "fit.json");
    if (!out) throw std::runtime_error("cannot write fit.json");
    out << fit.dump(2) << '\n';
    write_school_effects_csv((fs::path(opt.out_dir) / "school_effects.csv").string(),
                             schools);
    write_diagnostics_csv((fs::path(opt.out_dir) / "diagnostics.csv").string(),
                          diags);
    if (opt.write_chains) {
      std::vector<std::string> header = {"draw"};
      auto scalars = detail::monitored_scalars(chain);
      for (const auto& m : scalars) header.push_back(m.name);
      std::vector<std::vector<std::string>> rows;
      for (int d = 0; d < chain.n_draws; ++d) {
        std::vector<std::string> row = {std::to_string(d)};
        for (const auto& m : scalars)
          row.push_back(format_double(m.draws[static_cast<std::size_t>(d)]));
        rows.push_back(std::move(row));
      }
      write_csv((fs::path(opt.out_dir) / "chains.csv").string(), header, rows);
    }
    if (opt.write_traces) {
      for (const auto& m : detail::monitored_scalars(chain)) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t d = 0; d < m.draws.size(); ++d)
          rows.push_back({std::to_string(d), format_double(m.draws[d])});
        write_csv((fs::path(opt.out_dir) / ("trace_" + m.name + ".csv")).string(),
                  {"iteration", "value"}, rows);
      }
    }
    return 0;
  });
}

}  // namespace sva
