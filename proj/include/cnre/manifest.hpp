#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/dataset.hpp"

namespace cnre {

struct BehaviorFile {
  std::string name;
  std::filesystem::path path;  // resolved against the manifest's directory
};

struct SweepSpec {
  std::vector<std::vector<std::size_t>> layer_grid;
  std::vector<double> drop_fractions;
  double user_fraction = 0.5;
  std::uint64_t seed = 7;
};

/// A reproducible run: data files, behavior order, every training setting,
/// evaluation cutoffs and the output directory. JSON on disk; unknown keys are
/// rejected at every level.
struct RunManifest {
  std::vector<BehaviorFile> behaviors;  // listed order; the last one is the target
  /// "spec" keeps the listed order, "auto" uses the conversion order, or an
  /// explicit list of behavior names.
  std::string order = "spec";
  std::vector<std::string> order_list;
  TrainConfig train;
  std::uint64_t split_seed = 13;
  std::vector<std::size_t> ks{10, 50};
  std::filesystem::path out = "out";
  SweepSpec sweep;
};

/// Throws ParseError for malformed JSON, unknown keys, bad values or a missing
/// data file (the offending path is named).
RunManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
RunManifest load_manifest(const std::filesystem::path& path);

std::string to_json(const RunManifest& manifest);

/// Loads the behavior files and applies the requested order.
InteractionDataset load_run_dataset(const RunManifest& manifest);

}  // namespace cnre
