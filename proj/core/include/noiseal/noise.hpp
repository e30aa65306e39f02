#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noiseal/data.hpp"
#include "noiseal/learner.hpp"

namespace noiseal {

enum class NoiseKind { symmetric, asymmetric, instance_dependent };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

using TransitionMatrix = std::vector<std::vector<double>>;

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double rate = 0.0;
    std::optional<TransitionMatrix> transition;
    std::uint64_t seed = 0;

    // Throws Error when rate is outside [0,1) or the transition is not row-stochastic.
    void validate(std::size_t num_classes) const;
};

// Each label flips w.p. rate to a uniformly drawn different class.
LabeledDataset inject_symmetric(const LabeledDataset& ds, double rate, std::uint64_t seed);

// Label i becomes j w.p. transition[i][j]. The diagonal must equal 1 - rate.
LabeledDataset inject_asymmetric(const LabeledDataset& ds, double rate,
                                 const TransitionMatrix& transition, std::uint64_t seed);

// i -> (i + 1) mod K with probability rate.
TransitionMatrix cyclic_transition(std::size_t num_classes, double rate);

// Repeatedly picks a random not-yet-flipped sample whose scorer argmax differs from
// its label and relabels it to that argmax, until ceil(rate * N) flips.
LabeledDataset inject_instance_dependent(const LabeledDataset& ds, double rate, const Learner& scorer,
                                         std::uint64_t seed);

// The default scorer: a weak learner trained with plain CE on the clean labels.
Learner train_default_scorer(const LabeledDataset& ds, std::uint64_t seed, int epochs = 2,
                             int steps_per_epoch = 50, double lr = 0.5);

// Dispatches on spec.kind. Asymmetric without a matrix uses cyclic_transition.
// Instance-dependent without a scorer trains the default scorer.
LabeledDataset inject(const LabeledDataset& ds, const NoiseSpec& spec,
                      const Learner* scorer = nullptr);

// counts[true][observed] over samples carrying a true label.
std::vector<std::vector<std::size_t>> noise_confusion(const LabeledDataset& ds);
double realized_noise_rate(const LabeledDataset& ds);

}  // namespace noiseal
