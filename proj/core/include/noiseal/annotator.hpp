#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noiseal/data.hpp"

namespace noiseal {

// One oracle query. `runs` independent answers are requested at once; `seed`
// makes stochastic oracles reproducible.
struct OracleRequest {
    SampleId sample_id = 0;
    std::string prompt;
    std::vector<std::string> class_names;
    int runs = 1;
    std::uint64_t seed = 0;
};

// Annotation source. Returns exactly `runs` answers; std::nullopt marks a run
// that failed or produced no recognizable class.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual std::vector<std::optional<int>> answer(const OracleRequest& request) = 0;
};

// Answers with the true label w.p. `accuracy`, otherwise a uniformly drawn
// different class. Ignores prompt content.
class SimulatedOracle final : public Oracle {
public:
    // Reads the hidden true labels of `ds` (observed labels where none are stored).
    SimulatedOracle(const LabeledDataset& ds, double accuracy, std::uint64_t seed);
    SimulatedOracle(std::unordered_map<SampleId, int> truth, std::size_t num_classes, double accuracy,
                    std::uint64_t seed);

    double accuracy() const noexcept { return accuracy_; }
    std::vector<std::optional<int>> answer(const OracleRequest& request) override;

private:
    std::unordered_map<SampleId, int> truth_;
    std::size_t num_classes_;
    double accuracy_;
    std::uint64_t seed_;
};

// HTTP client for an external labeling service.
//
// Request:  {"prompt": str, "classes": [str...], "n": int, "temperature": 0.5}
// Response: {"answers": [str...]}
// Answers are matched to class names case-insensitively; unmatched answers
// become std::nullopt. The bearer token is sent when non-empty.
class RemoteOracle final : public Oracle {
public:
    RemoteOracle(std::string endpoint, std::string token = {}, double timeout_seconds = 60.0);
    // Reads ORACLE_ENDPOINT and ORACLE_TOKEN.
    static RemoteOracle from_environment();

    std::vector<std::optional<int>> answer(const OracleRequest& request) override;

    static std::string encode_request(const OracleRequest& request, double temperature = 0.5);
    static std::vector<std::optional<int>> decode_response(const std::string& body,
                                                           std::span<const std::string> class_names);

private:
    std::string scheme_host_port_;
    std::string path_;
    std::string token_;
    double timeout_seconds_;
};

// Case-insensitive exact match after trimming whitespace and trailing punctuation.
std::optional<int> match_class_name(std::string_view answer, std::span<const std::string> class_names);

struct Demonstration {
    std::string text;
    std::string label;
};

struct PromptSpec {
    std::string task_description;
    std::vector<Demonstration> demonstrations;
    std::string input;
    std::vector<std::string> class_names;
    std::string label_noun = "label";
    bool chain_of_thought = true;
};

inline constexpr const char* kStepByStepSuffix = "Let's think step-by-step.";

// Task block, optional demonstrations (Text / Candidate <noun>s / The <noun> is),
// the input with candidates, and the step-by-step suffix when enabled.
std::string build_prompt(const PromptSpec& spec);

// Text of a sample for prompts: its raw text, or its features to 4 decimals.
std::string render_sample(const Sample& s);

// Top-k of `clean_ids` by cosine similarity to `query`, most similar first;
// equal similarities are ordered by ascending id.
std::vector<SampleId> select_demonstrations(std::span<const double> query, const LabeledDataset& ds,
                                            std::span<const SampleId> clean_ids, std::size_t k);

struct VoteResult {
    int label = 0;
    std::vector<int> tally;  // votes per class
    int failed_runs = 0;
};

// Plurality over the valid answers; ties go to the smallest class index.
// Throws when every run failed.
VoteResult majority_vote(std::span<const std::optional<int>> answers, std::size_t num_classes);
VoteResult query_with_voting(Oracle& oracle, const OracleRequest& request);

struct CorrectionRecord {
    SampleId id;
    int old_label;
    int new_label;
    std::vector<int> tally;
    bool cached;
};

struct AnnotatorConfig {
    std::size_t demonstrations = 5;
    int vote_runs = 5;
    std::string task_description =
        "You are a text classifier and your task is to classify a given text according to candidate "
        "labels. The true label must be one of the candidate labels.";
    std::string label_noun = "label";
    bool chain_of_thought = true;
    std::uint64_t seed = 0;
};

// Relabels purified samples through an oracle with nearest-neighbour
// demonstrations drawn from the clean set. Answers are cached per sample id,
// so a sample is never sent to the oracle twice.
class Annotator {
public:
    Annotator(Oracle& oracle, AnnotatorConfig config);

    // Overwrites labels[id] for every id in `purified`. `labels` holds the
    // current observed labels indexed by sample id; demonstrations render with them.
    std::vector<CorrectionRecord> correct_purified(const LabeledDataset& ds, std::span<const SampleId> purified,
                                                   std::span<const SampleId> clean, std::vector<int>& labels);

    PromptSpec prompt_for(const LabeledDataset& ds, const Sample& query, std::span<const SampleId> clean,
                          std::span<const int> labels) const;

    std::size_t oracle_calls() const noexcept { return oracle_calls_; }
    std::size_t failed_runs() const noexcept { return failed_runs_; }
    std::size_t cache_size() const noexcept { return cache_.size(); }
    const AnnotatorConfig& config() const noexcept { return config_; }

private:
    Oracle& oracle_;
    AnnotatorConfig config_;
    std::map<SampleId, VoteResult> cache_;
    std::size_t oracle_calls_ = 0;
    std::size_t failed_runs_ = 0;
};

}  // namespace noiseal
