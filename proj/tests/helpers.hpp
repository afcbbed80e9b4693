#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sva/dataset.hpp"

namespace test_helpers {

// Validated covariate-free dataset from (y1, y2, y3) triples and per-student
// school ids.
inline sva::Dataset toy_dataset(const std::vector<std::array<double, 3>>& y,
                                const std::vector<std::string>& school_ids) {
  sva::Dataset data;
  std::vector<std::string> unique = school_ids;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (const auto& id : unique) data.schools.push_back({id, {}});
  for (std::size_t i = 0; i < y.size(); ++i) {
    sva::StudentRecord s;
    s.student_id = "P" + std::to_string(1000 + i);
    s.school_id = school_ids[i];
    s.y1 = y[i][0];
    s.y2 = y[i][1];
    s.y3 = static_cast<int>(y[i][2]);
    data.students.push_back(s);
  }
  return sva::validate_dataset(std::move(data));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sva_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace test_helpers
