#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "config.hpp"
#include "json.hpp"

namespace cutoff::cli {

inline constexpr const char* kOutputRootVariable = "CUTOFF_LAB_OUTPUT_ROOT";

// Files of one run, held in memory until the run has succeeded.
class OutputSet {
 public:
  // `name` must be a plain file name; paths are rejected.
  void add(const std::string& name, std::string content);
  const std::vector<std::pair<std::string, std::string>>& files() const noexcept { return files_; }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string sha256_hex(std::string_view data);

// run.output if set, else $CUTOFF_LAB_OUTPUT_ROOT/<command>, else ./cutoff-lab-out/<command>.
std::filesystem::path output_directory(const RunConfig& cfg);

// Manifest fields common to every run, before output digests are known.
nlohmann::ordered_json manifest_skeleton(const RunConfig& cfg);

// Writes every file (via a temporary name and rename) and then manifest.json
// with the digests of all files filled in. Returns the manifest written.
nlohmann::ordered_json commit(const std::filesystem::path& dir, const OutputSet& outputs,
                              nlohmann::ordered_json manifest);

}  // namespace cutoff::cli
