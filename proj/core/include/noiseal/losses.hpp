#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noiseal/data.hpp"
#include "noiseal/learner.hpp"
#include "noiseal/rng.hpp"

namespace noiseal {

// A features view paired with the label the objective should use (the
// observed label, or the oracle label for purified samples).
struct TrainItem {
    std::span<const double> features;
    int label;
};

// Value of one subset objective plus its gradient for each learner. A gradient
// is empty when the term does not depend on that learner.
struct LossEvaluation {
    double value = 0.0;
    std::vector<double> grad_strong;
    std::vector<double> grad_weak;
};

// Clean-set objective: -(1/N) sum_R [log p_s(y) + log p_w(y)].
LossEvaluation loss_clean(const CoPredictionNetwork& net, std::span<const TrainItem> clean,
                          std::size_t dataset_size, bool with_gradient = true);

// Reversed cross-entropy with log 0 := A (A < 0). Per sample and learner this
// equals -A * (1 - p(y)); both learners contribute, normalized by N.
LossEvaluation loss_purified(const CoPredictionNetwork& net, std::span<const TrainItem> purified,
                             std::size_t dataset_size, double log_zero = -4.0, bool with_gradient = true);

// Reversed CE summed over classes from its definition: -sum_k p_k log q_k with
// q one-hot at `label` and log 0 := A.
double reversed_cross_entropy(const ProbabilityVector& p, int label, double log_zero);
// Closed form -A * (1 - p_label).
double reversed_cross_entropy_closed_form(const ProbabilityVector& p, int label, double log_zero);
// -log max(p_label, floor).
double standard_cross_entropy(const ProbabilityVector& p, int label);

// Symmetric-loss constant -(K-1)A of reversed CE.
double symmetry_constant(std::size_t num_classes, double log_zero);

struct MixedSample {
    std::vector<double> embedding;
    ProbabilityVector target;
    double lambda_prime;
};

// lambda ~ Beta(alpha, alpha), returns max(lambda, 1 - lambda).
double draw_mix_coefficient(double alpha, Rng& rng);

// Convex mix of two embeddings/one-hot targets with weight lambda' on `first`.
MixedSample mix_embeddings(std::span<const double> first_embedding, int first_label,
                           std::span<const double> second_embedding, int second_label,
                           std::size_t num_classes, double lambda_prime);

// EmbMix of two samples through the strong learner's hidden layer; deterministic per seed.
MixedSample embmix(const TrainItem& first, const TrainItem& second, const Learner& strong, double alpha,
                   std::uint64_t seed);

// Pairing and mixing weights used by loss_hard: element i of H is mixed with
// partner[i] (drawn uniformly with replacement) using lambda_prime[i].
struct HardMixPlan {
    std::vector<std::size_t> partner;
    std::vector<double> lambda_prime;
};

HardMixPlan plan_hard_mix(std::size_t hard_size, double alpha, std::uint64_t seed);

// Mixed cross-entropy of the strong learner's head on EmbMix'd embeddings,
// normalized by N. Fewer than two hard samples yields 0.
LossEvaluation loss_hard(const Learner& strong, std::span<const TrainItem> hard, double alpha,
                         std::size_t dataset_size, std::uint64_t seed, bool with_gradient = true);
LossEvaluation loss_hard(const Learner& strong, std::span<const TrainItem> hard, const HardMixPlan& plan,
                         std::size_t dataset_size, bool with_gradient = true);

inline double total_loss(double clean, double purified, double hard) { return clean + purified + hard; }

// Element-wise sum of gradient buffers; empty operands count as zero.
std::vector<double> add_gradients(std::size_t size, std::initializer_list<const std::vector<double>*> grads);

enum class LossFamily { reversed_ce, standard_ce };

std::string to_string(LossFamily family);

// Single-learner objective (1/n) sum l(f(x), y) under `family` over `items`.
// Adds the gradient into *grad (resized to the parameter count) when non-null.
double learner_objective(LossFamily family, const Learner& learner, std::span<const TrainItem> items,
                         double log_zero = -4.0, std::vector<double>* grad = nullptr);

struct SymmetryReport {
    LossFamily family;
    std::size_t num_classes;
    double log_zero;
    std::size_t trials;
    double expected_constant;  // NaN for standard CE
    double max_deviation;      // from expected_constant (reversed CE only)
    double mean_sum;
    double variance_of_sums;   // across trials
    double seconds;

    bool constant() const;
    std::string to_json() const;
};

// Sums the loss over every label for `trials` random probability vectors.
SymmetryReport verify_symmetry(LossFamily family, std::size_t num_classes, double log_zero,
                               std::size_t trials, std::uint64_t seed = 0);

}  // namespace noiseal
