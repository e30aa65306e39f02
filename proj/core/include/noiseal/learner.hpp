#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noiseal/data.hpp"

namespace noiseal {

enum class LearnerKind { strong, weak };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(const std::string& name);

// Contiguous slice [offset, offset + width) of the input features a learner sees.
struct FeatureView {
    std::size_t offset = 0;
    std::size_t width = 0;

    friend bool operator==(const FeatureView&, const FeatureView&) = default;
};

// Probabilities are floored at this value before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

// Max-logit-stabilized softmax. Throws on non-finite logits.
ProbabilityVector softmax(std::span<const double> logits);

// A single classifier of the co-prediction pair.
//
// strong: tanh hidden layer of width h over the full feature vector, then an
//         affine head to K logits.
// weak:   affine map from a reduced feature view to K logits.
//
// Parameters live in one flat buffer so gradients and checkpoints are plain
// vectors of the same length. Layout:
//   strong: W1[h x v] | b1[h] | W2[K x h] | b2[K]
//   weak:   W[K x v]  | b[K]
// where v is the feature view width.
class Learner {
public:
    static Learner strong(std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                          std::uint64_t seed);
    // Default view: the first max(1, floor(d/2)) coordinates.
    static Learner weak(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed,
                        std::optional<FeatureView> view = std::nullopt);

    LearnerKind kind() const noexcept { return kind_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t hidden_width() const noexcept { return hidden_; }
    std::size_t num_classes() const noexcept { return classes_; }
    const FeatureView& view() const noexcept { return view_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> mutable_parameters() noexcept { return params_; }

    std::vector<double> logits(std::span<const double> features) const;
    ProbabilityVector predict(std::span<const double> features) const;
    ProbabilityVector predict(const Sample& s) const { return predict(s.features()); }

    // Post-tanh hidden activation (strong learner only).
    std::vector<double> embed(std::span<const double> features) const;
    // Classifier head applied directly to an embedding (strong learner only).
    std::vector<double> head_logits(std::span<const double> embedding) const;

    // Backpropagation. Each call adds d(objective)/d(parameters) into `grad`
    // given the objective's derivative with respect to the logits.
    void accumulate_gradient(std::span<const double> features, std::span<const double> dlogits,
                             std::span<double> grad) const;
    // Head-only backprop from embedding-space logits; optionally returns d/d(embedding).
    void accumulate_head_gradient(std::span<const double> embedding,
                                  std::span<const double> dlogits, std::span<double> grad,
                                  std::span<double> dembedding = {}) const;
    // Backprop of d/d(embedding) through the hidden layer into W1, b1.
    void accumulate_embedding_gradient(std::span<const double> features,
                                       std::span<const double> dembedding,
                                       std::span<double> grad) const;

    // params -= lr * grad. Throws if the gradient holds a non-finite value.
    void apply_gradient(std::span<const double> grad, double lr);

    std::string checkpoint_json() const;
    static Learner from_checkpoint_json(const std::string& text);
    void save_checkpoint(const std::filesystem::path& path) const;
    static Learner load_checkpoint(const std::filesystem::path& path);

private:
    Learner(LearnerKind kind, std::size_t input_dim, std::size_t hidden, std::size_t classes,
            FeatureView view, std::uint64_t seed);

    void require_strong(const char* op) const;
    void check_features(std::span<const double> features) const;
    std::span<const double> viewed(std::span<const double> features) const;

    // Offsets into params_.
    std::size_t w1() const noexcept { return 0; }
    std::size_t b1() const noexcept { return hidden_ * view_.width; }
    std::size_t w2() const noexcept { return b1() + hidden_; }
    std::size_t b2() const noexcept { return w2() + classes_ * hidden_; }
    std::size_t weak_b() const noexcept { return classes_ * view_.width; }

    LearnerKind kind_;
    std::size_t input_dim_;
    std::size_t hidden_;
    std::size_t classes_;
    FeatureView view_;
    std::uint64_t seed_;
    std::vector<double> params_;
};

// −log p(label; x) with the probability floor; never negative.
double per_sample_loss(const Learner& learner, std::span<const double> features, int label);
inline double per_sample_loss(const Learner& learner, const Sample& s) {
    return per_sample_loss(learner, s.features(), s.label());
}

struct TrainExample {
    std::span<const double> features;
    ProbabilityVector target;
    double weight = 1.0;
};

// One full-gradient step on sum_i weight_i * CE(target_i, p(x_i)).
// Returns the pre-step objective.
double train_step(Learner& learner, std::span<const TrainExample> batch, double lr);

// Objective and gradient of the weighted soft-target cross-entropy, without updating.
double cross_entropy_objective(const Learner& learner, std::span<const TrainExample> batch,
                               std::vector<double>* grad);

// The strong/weak pair. The two learners never share parameters or feature views.
struct CoPredictionNetwork {
    Learner strong;
    Learner weak;

    CoPredictionNetwork(Learner strong_learner, Learner weak_learner);
};

}  // namespace noiseal
