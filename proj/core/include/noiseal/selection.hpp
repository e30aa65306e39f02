#pragma once

#include <cstddef>
#include <string>
#include <span>
#include <unordered_map>
#include <vector>

#include "noiseal/data.hpp"
#include "noiseal/learner.hpp"

namespace noiseal {

// Per-sample, per-learner exponential moving average of the max confidence.
// Every (id, learner) pair starts at 0.
class ThresholdState {
public:
    ThresholdState(double lambda_strong, double lambda_weak);

    double lambda(LearnerKind kind) const noexcept;
    // tau <- lambda * p_t + (1 - lambda) * tau_prev. Returns the new tau.
    double update(SampleId id, LearnerKind kind, double p_t);
    double tau(SampleId id, LearnerKind kind) const;
    std::size_t tracked() const noexcept { return tau_.size(); }

private:
    static std::uint64_t key(SampleId id, LearnerKind kind) noexcept {
        return (static_cast<std::uint64_t>(id) << 1) | (kind == LearnerKind::weak ? 1u : 0u);
    }

    double lambda_strong_;
    double lambda_weak_;
    std::unordered_map<std::uint64_t, double> tau_;
};

struct GmmOptions {
    double tolerance = 1e-6;
    int max_iterations = 200;
    double variance_floor = 1e-6;
};

// Two-component 1-D Gaussian mixture over per-sample losses. Component 0 is the
// clean (smaller-mean) component.
struct GmmFit {
    double mean[2] = {0.0, 0.0};
    double variance[2] = {1.0, 1.0};
    double weight[2] = {0.5, 0.5};
    int iterations = 0;
    bool converged = false;
    // Data log-likelihood at the initial parameters and after every EM iteration.
    std::vector<double> log_likelihood;

    double mean_clean() const noexcept { return mean[0]; }
    double mean_noisy() const noexcept { return mean[1]; }
};

// EM from a median-split initialization. Throws on fewer than 4 values or
// when every loss is identical ("degenerate loss distribution").
GmmFit fit_loss_gmm(std::span<const double> losses, const GmmOptions& options = {});

double gmm_log_likelihood(const GmmFit& fit, std::span<const double> losses);

// Posterior of the clean component at `loss`, clamped to [0,1].
double clean_probability(const GmmFit& fit, double loss);

struct PartitionResult {
    std::vector<SampleId> consistency;  // C
    std::vector<SampleId> discrepancy;  // I
    std::vector<SampleId> clean;        // R
    std::vector<SampleId> hard;         // H
    std::vector<SampleId> purified;     // P
    double phi = 0.0;
};

using ScoreMap = std::unordered_map<SampleId, double>;

// conf_weak/conf_strong are the confidences on each sample's observed label.
// Comparisons against tau are strict; o is compared as o >= phi.
PartitionResult partition(std::span<const SampleId> ids, const ScoreMap& conf_weak,
                          const ScoreMap& conf_strong, const ThresholdState& state,
                          const ScoreMap& clean_prob, double phi);

// Checks the set algebra (C and I disjoint, R u P = C, R n P empty, H within I,
// every id sorted and unique). Returns an empty string when valid.
std::string check_partition(const PartitionResult& part);

}  // namespace noiseal
