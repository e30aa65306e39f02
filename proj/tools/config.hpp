#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noiseal/data.hpp"
#include "noiseal/pipeline.hpp"

namespace noiseal::cli {

// Experiment settings plus dataset locations. Loaded from one JSON file;
// command-line flags are applied on top before validation.
struct CliConfig {
    std::filesystem::path train, dev, test;
    std::optional<DatasetFormat> format;  // default: from each file's extension
    std::size_t num_classes = 0;          // 0 = infer from the training labels
    std::vector<std::string> class_names;
    std::filesystem::path out_dir = "out";
    bool traces = false;
    ExperimentConfig experiment;
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> oracle;  // simulated[:acc=X] | remote | none
    std::optional<std::filesystem::path> out_dir;
    std::optional<bool> traces;
};

// Parses the JSON text, applies overrides, then checks every key, value and
// path. Throws ConfigError listing all problems at once.
CliConfig parse_cli_config(const std::string& json_text, const ConfigOverrides& overrides = {},
                           const std::filesystem::path& base_dir = {});
CliConfig load_cli_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// "simulated", "simulated:acc=0.8", "remote", "none" / "identity".
OracleConfig parse_oracle_flag(const std::string& flag);

struct LoadedSplits {
    LabeledDataset train, dev, test;
};

LoadedSplits load_splits(const CliConfig& cfg);

}  // namespace noiseal::cli
