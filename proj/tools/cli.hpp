#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace noiseal::cli {

// Stable exit-code contract.
enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeError = 2 };

// Entry point of the noiseal tool. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Records artifacts (paths relative to out_dir) in out_dir/manifest.json,
// merging with entries written by earlier commands.
void update_manifest(const std::filesystem::path& out_dir, const std::string& command,
                     const std::vector<std::string>& artifacts);

}  // namespace noiseal::cli
