#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "noiseal/data.hpp"

namespace noiseal::synthetic {

// Gaussian clusters around random class centers, the desk-scale stand-in for
// precomputed sentence embeddings. All labels are clean and recorded as the
// true labels. The defaults are the reference benchmark.
struct BlobSpec {
    std::size_t samples = 2000;
    std::size_t classes = 4;
    std::size_t dim = 64;
    double separation = 3.0;  // norm of every class center
    double spread = 1.0;      // per-coordinate standard deviation
    std::uint64_t seed = 0;
};

LabeledDataset make_blobs(const BlobSpec& spec);

// Three separable 2-D clusters of unequal size and spread (600 samples by default).
LabeledDataset make_separable_2d(std::size_t samples, std::uint64_t seed);

// Two interleaved classes on concentric rings in 2-D plus `extra_dims` noise
// coordinates; not linearly separable.
LabeledDataset make_rings(std::size_t samples, std::uint64_t seed, std::size_t extra_dims = 0);

}  // namespace noiseal::synthetic
