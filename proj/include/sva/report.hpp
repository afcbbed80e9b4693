#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sva/csv.hpp"
#include "sva/pipeline.hpp"

namespace sva {

namespace report_detail {

struct EffectRow {
  std::string school_id;
  double mean, sd, lower, upper;
  int rank;
  bool significant;
};

struct FitOutputs {
  nlohmann::json fit;
  std::array<std::vector<EffectRow>, 3> effects;  // per response
};

inline FitOutputs read_fit_outputs(const std::string& fit_dir) {
  namespace fs = std::filesystem;
  FitOutputs out;
  std::ifstream in(fs::path(fit_dir) / "fit.json");
  if (!in)
    throw std::runtime_error("missing fit.json in " + fit_dir);
  in >> out.fit;
  CsvTable table = read_csv((fs::path(fit_dir) / "school_effects.csv").string());
  int c_resp = table.column("response");
  int c_id = table.column("school_id");
  int c_rank = table.column("rank");
  int c_mean = table.column("mean");
  int c_sd = table.column("sd");
  int c_lo = table.column("lower");
  int c_hi = table.column("upper");
  int c_sig = table.column("significant");
  for (const auto& row : table.rows) {
    int r = -1;
    for (int k = 0; k < 3; ++k)
      if (row[c_resp] == response_names()[k]) r = k;
    if (r < 0) throw std::runtime_error("unknown response in school_effects.csv");
    EffectRow e{row[c_id],
                parse_double(row[c_mean], "school_effects mean"),
                parse_double(row[c_sd], "school_effects sd"),
                parse_double(row[c_lo], "school_effects lower"),
                parse_double(row[c_hi], "school_effects upper"),
                static_cast<int>(parse_long(row[c_rank], "rank")),
                row[c_sig] == "1"};
    out.effects[r].push_back(e);
  }
  return out;
}

struct Scale {
  double lo, hi, px0, px1;
  double operator()(double v) const {
    if (hi == lo) return 0.5 * (px0 + px1);
    return px0 + (v - lo) / (hi - lo) * (px1 - px0);
  }
};

inline std::string svg_caterpillar(const std::vector<EffectRow>& sorted,
                                   const std::string& title) {
  const double w = 900, h = 420, ml = 60, mr = 20, mt = 40, mb = 30;
  double lo = 0.0, hi = 0.0;
  for (const auto& e : sorted) {
    lo = std::min(lo, e.lower);
    hi = std::max(hi, e.upper);
  }
  if (hi == lo) hi = lo + 1.0;
  Scale sx{1.0, static_cast<double>(std::max<std::size_t>(sorted.size(), 2)),
           ml, w - mr};
  Scale sy{lo, hi, h - mb, mt};
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n"
      << "<text x=\"" << ml << "\" y=\"20\" font-size=\"14\">" << title
      << "</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << sy(0.0) << "\" x2=\"" << w - mr
      << "\" y2=\"" << sy(0.0) << "\" stroke=\"#888\" stroke-dasharray=\"4\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << h - mb << "\" stroke=\"#000\"/>\n";
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto& e = sorted[k];
    double x = sx(static_cast<double>(k + 1));
    svg << "<line x1=\"" << format_double(x) << "\" y1=\""
        << format_double(sy(e.lower)) << "\" x2=\"" << format_double(x)
        << "\" y2=\"" << format_double(sy(e.upper))
        << "\" stroke=\"#69c\" stroke-width=\"1\"/>\n"
        << "<circle cx=\"" << format_double(x) << "\" cy=\""
        << format_double(sy(e.mean)) << "\" r=\"2\" fill=\""
        << (e.significant ? "#d33" : "#333") << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline std::string svg_scatter(const std::vector<EffectRow>& a,
                               const std::vector<EffectRow>& b,
                               const std::string& title, double corr) {
  const double w = 500, h = 500, ml = 60, mr = 20, mt = 40, mb = 40;
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    xlo = std::min(xlo, a[k].mean);
    xhi = std::max(xhi, a[k].mean);
    ylo = std::min(ylo, b[k].mean);
    yhi = std::max(yhi, b[k].mean);
  }
  if (xhi == xlo) xhi = xlo + 1.0;
  if (yhi == ylo) yhi = ylo + 1.0;
  Scale sx{xlo, xhi, ml, w - mr};
  Scale sy{ylo, yhi, h - mb, mt};
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n"
      << "<text x=\"" << ml << "\" y=\"20\" font-size=\"14\">" << title
      << " (school correlation " << format_double(corr) << ")</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
      << "\" y2=\"" << h - mb << "\" stroke=\"#000\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << h - mb << "\" stroke=\"#000\"/>\n";
  for (std::size_t k = 0; k < a.size(); ++k)
    svg << "<circle cx=\"" << format_double(sx(a[k].mean)) << "\" cy=\""
        << format_double(sy(b[k].mean)) << "\" r=\"2.5\" fill=\"#369\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace report_detail

// Emits the report bundle from a fit directory: per-response caterpillar CSVs
// and SVGs, pairwise school-effect scatter files, and report.md with the
// standardized coefficient/variance table.
inline void run_report(const std::string& fit_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  using namespace report_detail;
  FitOutputs fit = read_fit_outputs(fit_dir);
  fs::create_directories(out_dir);

  for (int r = 0; r < 3; ++r) {
    std::vector<EffectRow> sorted = fit.effects[r];
    std::sort(sorted.begin(), sorted.end(),
              [](const EffectRow& a, const EffectRow& b) {
                if (a.mean != b.mean) return a.mean < b.mean;
                return a.school_id < b.school_id;
              });
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : sorted)
      rows.push_back({std::to_string(e.rank), e.school_id,
                      format_double(e.mean), format_double(e.lower),
                      format_double(e.upper), e.significant ? "1" : "0"});
    std::string stem = "caterpillar_" + std::to_string(r + 1);
    write_csv((fs::path(out_dir) / (stem + ".csv")).string(),
              {"rank", "school_id", "mean", "lo", "hi", "significant"}, rows);
    std::ofstream svg(fs::path(out_dir) / (stem + ".svg"));
    svg << svg_caterpillar(sorted, "School effects: " + response_names()[r]);
  }

  const int pr[3] = {0, 0, 1};
  const int ps[3] = {1, 2, 2};
  const char* pair_keys[3] = {"1_2", "1_3", "2_3"};
  for (int k = 0; k < 3; ++k) {
    const auto& a = fit.effects[pr[k]];
    const auto& b = fit.effects[ps[k]];
    if (a.size() != b.size())
      throw std::runtime_error("report: inconsistent school counts");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < a.size(); ++i)
      rows.push_back({a[i].school_id, format_double(a[i].mean),
                      format_double(b[i].mean)});
    std::string stem = "scatter_" + std::to_string(pr[k] + 1) + "_" +
                       std::to_string(ps[k] + 1);
    write_csv((fs::path(out_dir) / (stem + ".csv")).string(),
              {"school_id", "mean_" + std::to_string(pr[k] + 1),
               "mean_" + std::to_string(ps[k] + 1)},
              rows);
    double corr = fit.fit.at(std::string("corr.school.") + pair_keys[k])
                      .get<double>();
    std::ofstream svg(fs::path(out_dir) / (stem + ".svg"));
    svg << svg_scatter(a, b,
                       response_names()[pr[k]] + " vs " + response_names()[ps[k]],
                       corr);
  }

  // report.md
  std::ofstream md(fs::path(out_dir) / "report.md");
  if (!md) throw std::runtime_error("report: cannot write report.md");
  std::string preset = fit.fit.at("meta.preset").get<std::string>();
  md << "# Model report (preset: " << preset << ")\n\n";
  md << "Coefficients standardised onto a common response scale (mean 0, SD 1).\n\n";
  md << "| | Attainment | Log Absences | Exclusions |\n|---|---|---|---|\n";
  // collect coefficient names from the first response in design order
  std::vector<std::string> coef_names;
  {
    std::string prefix = response_names()[0] + ".coef_std.";
    coef_names.push_back("intercept");
    for (auto it = fit.fit.begin(); it != fit.fit.end(); ++it)
      if (it.key().rfind(prefix, 0) == 0) {
        std::string name = it.key().substr(prefix.size());
        if (name != "intercept") coef_names.push_back(name);
      }
  }
  for (const auto& name : coef_names) {
    md << "| " << name;
    for (int r = 0; r < 3; ++r) {
      std::string key = response_names()[r] + ".coef_std." + name;
      md << " | " << (fit.fit.contains(key)
                          ? fmt3(fit.fit.at(key).get<double>())
                          : std::string("."));
    }
    md << " |\n";
  }
  auto stat_row = [&](const std::string& label, const std::string& suffix,
                      bool percent) {
    md << "| " << label;
    for (int r = 0; r < 3; ++r) {
      double v = fit.fit.at(response_names()[r] + suffix).get<double>();
      if (percent)
        md << " | " << fmt3(100.0 * v) << "%";
      else
        md << " | " << fmt3(v);
    }
    md << " |\n";
  };
  stat_row("School variance", ".school_variance_std", false);
  stat_row("Student variance", ".student_variance_std", false);
  stat_row("VPC", ".vpc", true);
  stat_row("R-Squared", ".r_squared", false);
  md << "\n## School effects\n\n";
  md << "% of schools significantly different from average (95% interval "
        "excludes zero):\n\n";
  for (int r = 0; r < 3; ++r) {
    double p = fit.fit.at("report.prop_significant." + response_names()[r])
                   .get<double>();
    md << "- " << response_names()[r] << ": " << fmt3(100.0 * p) << "%\n";
  }
  md << "\nCaterpillar data: caterpillar_1.csv .. caterpillar_3.csv; "
        "scatter data: scatter_1_2.csv, scatter_1_3.csv, scatter_2_3.csv.\n";
}

}  // namespace sva
