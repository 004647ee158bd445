#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "tsel/types.hpp"

namespace tsel {

struct FixtureBundle {
  TransferTable roberta;
  TransferTable bert;
  Manifest manifest;
};

/// $TSEL_FIXTURE_DIR when set, otherwise the directory configured at build time.
std::filesystem::path fixture_dir();

/// Content hash (FNV-1a 64) of the frozen fixture files.
struct FixtureHashes {
  std::uint64_t roberta;
  std::uint64_t bert;
  std::uint64_t manifest;
};
const FixtureHashes& expected_fixture_hashes();

/// Loads and checks the bundled tables and manifest: content hashes, 42 x 11
/// shape, shared id sets, manifest coverage. Throws FixtureIntegrityError.
FixtureBundle load_fixtures(const std::optional<std::filesystem::path>& dir = std::nullopt);

}  // namespace tsel
