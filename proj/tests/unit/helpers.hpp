#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "urbanfuse/core.hpp"

namespace uft {

inline urbanfuse::Report report(std::string id, std::string text, std::string_view when, double lat, double lon,
                                std::string main_class = "m0", std::string issue_class = "i0",
                                std::optional<std::string> image = std::nullopt) {
  urbanfuse::Report r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.timestamp = urbanfuse::LocalDateTime::parse(when);
  r.lat = lat;
  r.lon = lon;
  r.main_class = std::move(main_class);
  r.issue_class = std::move(issue_class);
  r.image_ref = std::move(image);
  return r;
}

/// Issue class i belongs to main class i % num_main.
inline urbanfuse::LabelTaxonomy taxonomy(std::size_t num_main, std::size_t num_issue) {
  std::vector<std::string> mains;
  for (std::size_t m = 0; m < num_main; ++m) mains.push_back("m" + std::to_string(m));
  std::vector<std::pair<std::string, std::string>> issues;
  for (std::size_t i = 0; i < num_issue; ++i) issues.emplace_back("i" + std::to_string(i), mains[i % num_main]);
  return urbanfuse::LabelTaxonomy(mains, issues);
}

/// `per_class` reports for each issue class, ids r000, r001, ...
inline urbanfuse::Dataset labelled(std::size_t num_main, std::size_t num_issue, std::size_t per_class) {
  urbanfuse::Dataset d;
  d.taxonomy = taxonomy(num_main, num_issue);
  std::size_t n = 0;
  for (std::size_t i = 0; i < num_issue; ++i) {
    for (std::size_t k = 0; k < per_class; ++k, ++n) {
      char id[16];
      std::snprintf(id, sizeof id, "r%03zu", n);
      d.reports.push_back(report(id, "word" + std::string(1, static_cast<char>('a' + i % 26)) + " street",
                                 "2019-03-04T10:15:00", 52.37 + 0.001 * static_cast<double>(n % 17),
                                 4.89 + 0.001 * static_cast<double>(n % 13), "m" + std::to_string(i % num_main),
                                 "i" + std::to_string(i)));
    }
  }
  return d;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("urbanfuse_unit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace uft
