#include "tsel/fixtures.hpp"

#include <cstdlib>
#include <set>

#include "tsel/error.hpp"
#include "tsel/io.hpp"
#include "tsel/random.hpp"

#ifndef TSEL_DEFAULT_FIXTURE_DIR
#define TSEL_DEFAULT_FIXTURE_DIR "data/fixtures"
#endif

namespace tsel {

namespace {

// Frozen when the tables were transcribed. Any edit to the files must come
// with a fresh check of the headline statistics before these are updated.
constexpr FixtureHashes kHashes{0x4ca6fefb0497c1b7ULL, 0x00281bcbfc1a8a6cULL, 0x77abbbf73205a020ULL};

constexpr std::size_t kIntermediates = 42;
constexpr std::size_t kTargets = 11;

std::string load_checked(const std::filesystem::path& path, std::uint64_t expected) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw FixtureIntegrityError(e.what());
  }
  if (fnv1a(text) != expected) throw FixtureIntegrityError("content hash mismatch for fixture '" + path.string() + "'");
  return text;
}

template <typename Fn>
auto integrity(const std::filesystem::path& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const FixtureIntegrityError&) {
    throw;
  } catch (const Error& e) {
    throw FixtureIntegrityError("fixture '" + path.string() + "': " + e.what());
  }
}

void check_shape(const TransferTable& t, const std::string& name) {
  if (t.num_intermediates() != kIntermediates || t.num_targets() != kTargets) {
    throw FixtureIntegrityError(name + " fixture has " + std::to_string(t.num_intermediates()) + " x " +
                                std::to_string(t.num_targets()) + " cells, expected 42 x 11");
  }
}

}  // namespace

std::filesystem::path fixture_dir() {
  if (const char* env = std::getenv("TSEL_FIXTURE_DIR"); env != nullptr && *env != '\0') return env;
  return TSEL_DEFAULT_FIXTURE_DIR;
}

const FixtureHashes& expected_fixture_hashes() { return kHashes; }

FixtureBundle load_fixtures(const std::optional<std::filesystem::path>& dir) {
  const std::filesystem::path root = dir.value_or(fixture_dir());
  const auto rp = root / "roberta.tsv";
  const auto bp = root / "bert.tsv";
  const auto mp = root / "manifest.tsv";
  FixtureBundle b;
  b.roberta = integrity(rp, [&] { return parse_transfer_table(load_checked(rp, kHashes.roberta)); });
  b.bert = integrity(bp, [&] { return parse_transfer_table(load_checked(bp, kHashes.bert)); });
  b.manifest = integrity(mp, [&] { return parse_manifest(load_checked(mp, kHashes.manifest)); });

  check_shape(b.roberta, "RoBERTa");
  check_shape(b.bert, "BERT");
  auto as_set = [](const std::vector<TaskId>& v) { return std::set<TaskId>(v.begin(), v.end()); };
  if (as_set(b.roberta.intermediates()) != as_set(b.bert.intermediates()) ||
      as_set(b.roberta.targets()) != as_set(b.bert.targets())) {
    throw FixtureIntegrityError("RoBERTa and BERT fixtures disagree on their id sets");
  }
  for (const auto* ids : {&b.roberta.intermediates(), &b.roberta.targets()}) {
    for (const auto& id : *ids) {
      if (!b.manifest.contains(id)) throw FixtureIntegrityError("manifest has no entry for '" + id + "'");
    }
  }
  if (b.manifest.size() != kIntermediates + kTargets) {
    throw FixtureIntegrityError("manifest lists " + std::to_string(b.manifest.size()) + " tasks, expected 53");
  }
  return b;
}

}  // namespace tsel
