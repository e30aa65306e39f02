#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace noiseal {

using SampleId = std::int64_t;

// One training example. The hidden true label is only reachable through
// AuditAccess so that training code cannot read it by accident.
class Sample {
public:
    Sample(SampleId id, std::vector<double> features, int label,
           std::optional<int> true_label = std::nullopt,
           std::optional<std::string> text = std::nullopt);

    SampleId id() const noexcept { return id_; }
    std::span<const double> features() const noexcept { return features_; }
    int label() const noexcept { return label_; }
    const std::optional<std::string>& text() const noexcept { return text_; }

    // Copy with a new observed label; the pre-change observed label becomes the true label.
    Sample with_noisy_label(int new_label) const;
    Sample with_id(SampleId id) const;

private:
    friend class AuditAccess;

    SampleId id_;
    std::vector<double> features_;
    int label_;
    std::optional<int> true_label_;
    std::optional<std::string> text_;
};

// Immutable collection of samples with dense ids 0..N-1.
class LabeledDataset {
public:
    // Validates labels, dimensions and ids; throws Error on any violation.
    LabeledDataset(std::vector<Sample> samples, std::size_t num_classes, std::size_t feature_dim,
                   std::vector<std::string> class_names = {});

    // Reassigns ids 0..N-1 in the given order before validating.
    static LabeledDataset renumbered(std::vector<Sample> samples, std::size_t num_classes,
                                     std::size_t feature_dim,
                                     std::vector<std::string> class_names = {});

    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    const Sample& at(SampleId id) const;

    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

    std::vector<int> labels() const;

private:
    std::vector<Sample> samples_;
    std::size_t num_classes_;
    std::size_t feature_dim_;
    std::vector<std::string> class_names_;
};

// The only path to ground-truth labels. Used by noise auditing, subset audits
// and the simulated oracle; never by training.
class AuditAccess {
public:
    static std::optional<int> true_label(const Sample& s) noexcept { return s.true_label_; }
    static bool has_true_labels(const LabeledDataset& ds) noexcept;
    // True label where present, observed label otherwise.
    static int reference_label(const Sample& s) noexcept {
        return s.true_label_.value_or(s.label_);
    }
};

// Validated class-probability vector: entries in [0,1] summing to 1 within 1e-9.
class ProbabilityVector {
public:
    explicit ProbabilityVector(std::vector<double> entries);

    static ProbabilityVector one_hot(std::size_t num_classes, int label);
    static ProbabilityVector uniform(std::size_t num_classes);

    std::size_t size() const noexcept { return entries_.size(); }
    double operator[](std::size_t k) const { return entries_[k]; }
    std::span<const double> entries() const noexcept { return entries_; }
    double max() const;
    // Smallest index among the maximal entries.
    int argmax() const;

private:
    std::vector<double> entries_;
};

enum class DatasetFormat { jsonl, csv };

DatasetFormat parse_format(const std::string& name);
DatasetFormat format_from_extension(const std::filesystem::path& path);

// Reads a dataset. When num_classes is 0 it is inferred as 1 + the largest label seen.
LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                            std::size_t num_classes = 0,
                            std::vector<std::string> class_names = {});

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, DatasetFormat format);
std::string to_jsonl(const LabeledDataset& ds);

struct SplitFractions {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    LabeledDataset train;
    LabeledDataset dev;
    LabeledDataset test;
};

// Seeded shuffle then floor-and-distribute sizing. Sample ids are renumbered per split.
DatasetSplit split_dataset(const LabeledDataset& ds, SplitFractions fractions, std::uint64_t seed);

// Split sizes: floor(f_i * N), then leftover units go to the largest fractional
// remainders (ties to the earlier split).
std::vector<std::size_t> split_sizes(std::size_t n, std::span<const double> fractions);

// Cosine similarity; zero-norm inputs yield 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace noiseal
