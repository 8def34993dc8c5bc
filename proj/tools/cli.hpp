#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fracbench/io/results.hpp"

namespace fracbench::cli {

// Exit codes of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitInternalError = 2;

// {"kind": "ct"|"xray", "ground_truth": dir,
//  "teams": [{"name": ..., "predictions": dir, "runtime_s": s}, ...]}
// Directories are relative to the manifest file. Cases are the ground-truth
// files (.mha for ct, .tif/.tiff for xray); predictions share the file name.
struct TeamEntry {
  std::string name;
  std::filesystem::path predictions;
  double runtime_s = 0.0;
};

struct StudyManifest {
  std::string kind = "ct";
  std::filesystem::path ground_truth;
  std::vector<TeamEntry> teams;
};

StudyManifest read_manifest(const std::filesystem::path& path);

struct EvaluateResult {
  io::Study study;
  std::vector<std::string> warnings;
};

// Scores every team on every case; a missing prediction file is scored as an
// empty prediction and reported as a warning.
EvaluateResult evaluate_study(const StudyManifest& manifest, unsigned jobs);

// Parses arguments and runs one subcommand. Diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fracbench::cli
