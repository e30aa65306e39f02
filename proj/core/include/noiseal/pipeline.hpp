#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noiseal/annotator.hpp"
#include "noiseal/data.hpp"
#include "noiseal/learner.hpp"
#include "noiseal/noise.hpp"
#include "noiseal/selection.hpp"

namespace noiseal {

enum class OracleKind { simulated, remote, identity };

std::string to_string(OracleKind kind);
OracleKind parse_oracle_kind(const std::string& name);

struct OracleConfig {
    OracleKind kind = OracleKind::simulated;
    double accuracy = 0.9;  // simulated only
};

struct ExperimentConfig {
    int epochs = 6;
    int warmup_epochs = 2;
    int steps_per_epoch = 40;
    std::size_t batch_size = 0;  // 0 = full batch
    std::size_t hidden_width = 64;
    double lambda_strong = 0.96;
    double lambda_weak = 0.5;
    double phi = 0.1;
    std::size_t demonstrations = 5;
    int vote_runs = 5;
    double log_zero = -4.0;
    double alpha = 0.75;
    double lr_strong = 0.5;
    double lr_weak = 1.0;
    NoiseSpec noise;  // applied to the training set when rate > 0
    OracleConfig oracle;
    std::string task_description = AnnotatorConfig{}.task_description;
    std::string label_noun = "label";
    bool chain_of_thought = true;
    std::uint64_t seed = 0;

    // Every violated constraint, one message each; empty when valid.
    std::vector<std::string> violations() const;
    void validate() const;
};

// Correct-label count of one subset, measured against hidden true labels.
struct SubsetStats {
    std::size_t size = 0;
    std::size_t correct = 0;
    std::optional<double> ratio;  // empty for an empty subset
};

struct SubsetAudit {
    SubsetStats consistency, discrepancy, clean, hard, purified;
};

// Requires true labels on every sample of `ds`. `labels` are the observed labels
// to audit (indexed by id); the overload without it uses ds's own labels.
SubsetAudit subset_audit(const PartitionResult& part, const LabeledDataset& ds, std::span<const int> labels);
SubsetAudit subset_audit(const PartitionResult& part, const LabeledDataset& ds);

struct LossBreakdown {
    double clean = 0.0;
    double purified = 0.0;
    double hard = 0.0;
    double total = 0.0;
};

struct EpochReport {
    int epoch = 0;  // 1-based
    bool warmup = false;
    std::size_t size_c = 0, size_i = 0, size_r = 0, size_h = 0, size_p = 0;
    std::optional<SubsetAudit> audit_before_correction;
    std::optional<SubsetAudit> audit_after_correction;
    std::optional<double> gmm_mean_clean, gmm_mean_noisy;
    LossBreakdown losses;  // at the first step of the epoch's training pass
    double dev_accuracy_strong = 0.0;
    double dev_accuracy_weak = 0.0;
    double test_accuracy_strong = 0.0;
    std::size_t oracle_calls = 0;  // cumulative
    std::size_t corrections = 0;   // labels changed this epoch
    bool correction_skipped = false;  // clean set smaller than the demonstration count
};

struct RunReport {
    ExperimentConfig config;
    std::vector<EpochReport> epochs;
    double final_test_accuracy = 0.0;
    int best_dev_epoch = 0;
    double best_dev_test_accuracy = 0.0;
    std::size_t oracle_calls = 0;
    bool audited = false;

    std::string to_json() const;
};

struct BaselineReport {
    ExperimentConfig config;
    std::vector<double> dev_accuracy;
    std::vector<double> test_accuracy;
    double final_test_accuracy = 0.0;
    int best_dev_epoch = 0;
    double best_dev_test_accuracy = 0.0;

    std::string to_json() const;
};

// One row per (epoch, sample) for downstream loss/confidence histograms.
struct SampleTrace {
    int epoch;
    SampleId id;
    double strong_loss;
    double conf_strong;
    double conf_weak;
    double tau_strong;
    double tau_weak;
    std::optional<double> clean_probability;
    char subset;  // 'R', 'H', 'P', 'I' (discrepant, not hard), '-' (no set), 'W' (warmup)
    int observed_label;
    std::optional<int> true_label;
};

std::string traces_to_csv(const std::vector<SampleTrace>& traces);

struct RunResult {
    RunReport report;
    std::vector<SampleTrace> traces;
    CoPredictionNetwork network;
};

CoPredictionNetwork make_network(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t num_classes);

// Plain CE on all observed labels for both learners; no selection, no oracle.
void warmup(CoPredictionNetwork& net, const LabeledDataset& ds, int warmup_epochs, int steps_per_epoch,
            double lr_strong, double lr_weak);

// Fraction of argmax predictions equal to the labels (ties -> smallest class).
double evaluate(const Learner& learner, const LabeledDataset& ds);

// Full pipeline. Applies cfg.noise to `train` when its rate is positive and
// builds the oracle from cfg.oracle unless one is supplied.
RunResult run_noiseal(const ExperimentConfig& cfg, const LabeledDataset& train, const LabeledDataset& dev,
                      const LabeledDataset& test, Oracle* oracle = nullptr, bool collect_traces = false);

// Strong learner alone, plain CE on observed labels, same epochs and step budget.
BaselineReport run_baseline(const ExperimentConfig& cfg, const LabeledDataset& train, const LabeledDataset& dev,
                            const LabeledDataset& test);

// The training set the pipeline actually uses (noise applied per cfg.noise).
LabeledDataset prepare_training_set(const ExperimentConfig& cfg, const LabeledDataset& train);

std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace noiseal
