#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tsel/fixtures.hpp"
#include "tsel/types.hpp"

namespace testing_support {

inline const tsel::FixtureBundle& fixtures() {
  static const tsel::FixtureBundle bundle = tsel::load_fixtures();
  return bundle;
}

/// Single-target table from a relevance list; intermediates are "a", "b", ...
inline tsel::TransferTable single_target(const std::vector<double>& scores, double baseline = 1.0) {
  std::vector<tsel::TaskId> ids;
  for (std::size_t i = 0; i < scores.size(); ++i) ids.push_back(std::string(1, static_cast<char>('a' + i)));
  return tsel::TransferTable("toy", ids, {"T"}, {baseline}, scores);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tsel-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
