#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noiseal/error.hpp"

namespace noiseal::cli {

using nlohmann::json;

namespace {

// Collects every problem instead of stopping at the first one.
class Reader {
public:
    explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

    void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
        for (const auto& [key, value] : obj.items()) {
            if (!known.count(key)) errors_.push_back("unknown key '" + where + key + "'");
        }
    }

    template <typename T>
    void get(const json& obj, const std::string& key, T& out, const std::string& where = {}) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        const bool ok = [&] {
            if constexpr (std::is_same_v<T, bool>) return v.is_boolean();
            else if constexpr (std::is_same_v<T, std::string>) return v.is_string();
            else if constexpr (std::is_floating_point_v<T>) return v.is_number();
            else if constexpr (std::is_unsigned_v<T>) return v.is_number_unsigned();
            else if constexpr (std::is_integral_v<T>) return v.is_number_integer();
            else return false;
        }();
        if (!ok) {
            errors_.push_back("key '" + where + key + "' has the wrong type (" + std::string(v.type_name()) + ")");
            return;
        }
        out = v.get<T>();
    }

    std::vector<std::string>& errors() { return errors_; }

private:
    std::vector<std::string>& errors_;
};

const std::set<std::string> kTopKeys = {
    "train", "dev", "test", "format", "num_classes", "class_names", "out_dir", "traces",
    "epochs", "warmup_epochs", "steps_per_epoch", "batch_size", "hidden_width", "lambda_strong",
    "lambda_weak", "phi", "demonstrations", "vote_runs", "log_zero", "alpha", "lr_strong", "lr_weak",
    "noise", "oracle", "task_description", "label_noun", "chain_of_thought", "seed"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void read_noise(Reader& r, const json& j, NoiseSpec& noise) {
    if (!j.is_object()) {
        r.errors().push_back("key 'noise' must be an object");
        return;
    }
    r.reject_unknown(j, {"kind", "rate", "seed", "transition"}, "noise.");
    std::string kind;
    r.get(j, "kind", kind, "noise.");
    if (!kind.empty()) {
        try {
            noise.kind = parse_noise_kind(kind);
        } catch (const std::exception& e) {
            r.errors().push_back(std::string("noise.kind: ") + e.what());
        }
    }
    r.get(j, "rate", noise.rate, "noise.");
    r.get(j, "seed", noise.seed, "noise.");
    if (j.contains("transition") && !j["transition"].is_null()) {
        try {
            noise.transition = j["transition"].get<TransitionMatrix>();
        } catch (const json::exception&) {
            r.errors().push_back("noise.transition must be a matrix of numbers");
        }
    }
}

void read_oracle(Reader& r, const json& j, OracleConfig& oracle) {
    if (!j.is_object()) {
        r.errors().push_back("key 'oracle' must be an object");
        return;
    }
    r.reject_unknown(j, {"kind", "accuracy"}, "oracle.");
    std::string kind;
    r.get(j, "kind", kind, "oracle.");
    if (!kind.empty()) {
        try {
            oracle.kind = parse_oracle_kind(kind);
        } catch (const std::exception& e) {
            r.errors().push_back(std::string("oracle.kind: ") + e.what());
        }
    }
    r.get(j, "accuracy", oracle.accuracy, "oracle.");
}

}  // namespace

OracleConfig parse_oracle_flag(const std::string& flag) {
    OracleConfig out;
    const auto colon = flag.find(':');
    out.kind = parse_oracle_kind(flag.substr(0, colon));
    if (colon == std::string::npos) return out;
    const std::string rest = flag.substr(colon + 1);
    if (out.kind != OracleKind::simulated || rest.rfind("acc=", 0) != 0) {
        throw ConfigError("bad --oracle value '" + flag + "' (expected simulated:acc=X)");
    }
    try {
        std::size_t used = 0;
        out.accuracy = std::stod(rest.substr(4), &used);
        if (used != rest.size() - 4) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        throw ConfigError("bad oracle accuracy in '" + flag + "'");
    }
    return out;
}

CliConfig parse_cli_config(const std::string& json_text, const ConfigOverrides& overrides,
                           const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    std::vector<std::string> errors;
    Reader r(errors);
    CliConfig cfg;
    ExperimentConfig& x = cfg.experiment;
    r.reject_unknown(j, kTopKeys, "");

    std::string train, dev, test, format, out_dir;
    r.get(j, "train", train);
    r.get(j, "dev", dev);
    r.get(j, "test", test);
    r.get(j, "format", format);
    r.get(j, "out_dir", out_dir);
    r.get(j, "num_classes", cfg.num_classes);
    if (j.contains("class_names")) {
        try {
            cfg.class_names = j["class_names"].get<std::vector<std::string>>();
        } catch (const json::exception&) {
            errors.push_back("key 'class_names' must be an array of strings");
        }
    }
    r.get(j, "traces", cfg.traces);
    r.get(j, "epochs", x.epochs);
    r.get(j, "warmup_epochs", x.warmup_epochs);
    r.get(j, "steps_per_epoch", x.steps_per_epoch);
    r.get(j, "batch_size", x.batch_size);
    r.get(j, "hidden_width", x.hidden_width);
    r.get(j, "lambda_strong", x.lambda_strong);
    r.get(j, "lambda_weak", x.lambda_weak);
    r.get(j, "phi", x.phi);
    r.get(j, "demonstrations", x.demonstrations);
    r.get(j, "vote_runs", x.vote_runs);
    r.get(j, "log_zero", x.log_zero);
    r.get(j, "alpha", x.alpha);
    r.get(j, "lr_strong", x.lr_strong);
    r.get(j, "lr_weak", x.lr_weak);
    r.get(j, "task_description", x.task_description);
    r.get(j, "label_noun", x.label_noun);
    r.get(j, "chain_of_thought", x.chain_of_thought);
    r.get(j, "seed", x.seed);
    if (j.contains("noise")) read_noise(r, j["noise"], x.noise);
    if (j.contains("oracle")) read_oracle(r, j["oracle"], x.oracle);

    if (!format.empty()) {
        try {
            cfg.format = parse_format(format);
        } catch (const std::exception& e) {
            errors.push_back(std::string("format: ") + e.what());
        }
    }
    if (!out_dir.empty()) cfg.out_dir = resolve(base_dir, out_dir);

    // Flags win over the file.
    if (overrides.seed) x.seed = *overrides.seed;
    if (overrides.oracle) {
        try {
            x.oracle = parse_oracle_flag(*overrides.oracle);
        } catch (const std::exception& e) {
            errors.push_back(e.what());
        }
    }
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.traces) cfg.traces = *overrides.traces;

    auto need_path = [&](const std::string& key, const std::string& value, std::filesystem::path& dst) {
        if (value.empty()) {
            errors.push_back("missing required key '" + key + "'");
            return;
        }
        dst = resolve(base_dir, value);
        if (!std::filesystem::is_regular_file(dst)) {
            errors.push_back("key '" + key + "': file not found: " + dst.string());
        }
    };
    need_path("train", train, cfg.train);
    need_path("dev", dev, cfg.dev);
    need_path("test", test, cfg.test);
    if (!cfg.class_names.empty() && cfg.num_classes && cfg.class_names.size() != cfg.num_classes) {
        errors.push_back("class_names has " + std::to_string(cfg.class_names.size()) + " entries but num_classes is " +
                         std::to_string(cfg.num_classes));
    }
    for (const auto& v : x.violations()) errors.push_back(v);

    if (!errors.empty()) {
        std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" +
                          (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

CliConfig load_cli_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_cli_config(ss.str(), overrides, path.parent_path());
}

LoadedSplits load_splits(const CliConfig& cfg) {
    auto fmt = [&](const std::filesystem::path& p) { return cfg.format ? *cfg.format : format_from_extension(p); };
    LabeledDataset train = load_dataset(cfg.train, fmt(cfg.train), cfg.num_classes, cfg.class_names);
    const std::size_t k = train.num_classes();
    LabeledDataset dev = load_dataset(cfg.dev, fmt(cfg.dev), k, train.class_names());
    LabeledDataset test = load_dataset(cfg.test, fmt(cfg.test), k, train.class_names());
    if (dev.feature_dim() != train.feature_dim() || test.feature_dim() != train.feature_dim()) {
        throw ConfigError("train, dev and test feature dimensions differ");
    }
    return {std::move(train), std::move(dev), std::move(test)};
}

}  // namespace noiseal::cli
