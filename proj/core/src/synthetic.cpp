#include "noiseal/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "noiseal/error.hpp"
#include "noiseal/rng.hpp"

namespace noiseal::synthetic {

namespace {

std::vector<std::string> names(std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back("class_" + std::to_string(i));
    return out;
}

}  // namespace

LabeledDataset make_blobs(const BlobSpec& spec) {
    if (spec.classes == 0 || spec.dim == 0 || spec.samples == 0) {
        throw Error("blob spec needs positive samples, classes and dim");
    }
    Rng rng = make_rng(spec.seed, "synthetic/blobs");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> centers(spec.classes, std::vector<double>(spec.dim));
    for (auto& c : centers) {
        double norm = 0.0;
        for (double& v : c) {
            v = gauss(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : c) v *= spec.separation / norm;
    }
    std::vector<Sample> samples;
    samples.reserve(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        // Round-robin labels keep classes balanced.
        const std::size_t label = i % spec.classes;
        std::vector<double> x(spec.dim);
        for (std::size_t j = 0; j < spec.dim; ++j) x[j] = centers[label][j] + spec.spread * gauss(rng);
        samples.emplace_back(static_cast<SampleId>(i), std::move(x), static_cast<int>(label), static_cast<int>(label));
    }
    return LabeledDataset(std::move(samples), spec.classes, spec.dim, names(spec.classes));
}

LabeledDataset make_separable_2d(std::size_t samples, std::uint64_t seed) {
    // Class shares 1/2, 1/3, 1/6 with distinct spreads; gaps between clusters
    // exceed six standard deviations so the set is separable in practice.
    struct Cluster {
        double cx, cy, sd, share;
    };
    constexpr Cluster clusters[3] = {{-2.0, 0.0, 0.35, 0.5}, {2.0, 0.5, 0.25, 1.0 / 3.0}, {0.0, 3.0, 0.2, 1.0 / 6.0}};
    Rng rng = make_rng(seed, "synthetic/separable2d");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Sample> out;
    out.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
        int label = u < clusters[0].share ? 0 : (u < clusters[0].share + clusters[1].share ? 1 : 2);
        const auto& c = clusters[label];
        out.emplace_back(static_cast<SampleId>(i),
                         std::vector<double>{c.cx + c.sd * gauss(rng), c.cy + c.sd * gauss(rng)}, label, label);
    }
    return LabeledDataset(std::move(out), 3, 2, names(3));
}

LabeledDataset make_rings(std::size_t samples, std::uint64_t seed, std::size_t extra_dims) {
    Rng rng = make_rng(seed, "synthetic/rings");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Sample> out;
    out.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const int label = static_cast<int>(i % 2);
        const double radius = label == 0 ? 1.0 : 2.5;
        const double angle = 2.0 * std::numbers::pi * uniform01(rng);
        std::vector<double> x{radius * std::cos(angle) + 0.1 * gauss(rng),
                              radius * std::sin(angle) + 0.1 * gauss(rng)};
        for (std::size_t j = 0; j < extra_dims; ++j) x.push_back(0.1 * gauss(rng));
        out.emplace_back(static_cast<SampleId>(i), std::move(x), label, label);
    }
    return LabeledDataset(std::move(out), 2, 2 + extra_dims, names(2));
}

}  // namespace noiseal::synthetic
