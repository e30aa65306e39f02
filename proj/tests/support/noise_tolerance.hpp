#pragma once

// Clean-versus-noisy decision agreement of the weak (convex) learner trained
// under one loss family. Shared by the unit and acceptance suites.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "noiseal/learner.hpp"
#include "noiseal/losses.hpp"
#include "noiseal/noise.hpp"
#include "noiseal/synthetic.hpp"

namespace noiseal::test {

struct ToleranceSetup {
    std::size_t samples = 600;
    double noise_rate = 0.3;
    int steps = 1500;
    double lr = 2.0;
    std::size_t grid = 100;
    double x_lo = -4.0, x_hi = 4.0, y_lo = -2.0, y_hi = 5.0;
    std::uint64_t seed = 1;
};

inline Learner fit_weak(LossFamily family, const LabeledDataset& ds, const ToleranceSetup& s) {
    Learner l = Learner::weak(2, ds.num_classes(), s.seed, FeatureView{0, 2});
    std::vector<TrainItem> items;
    items.reserve(ds.size());
    for (const auto& x : ds) items.push_back({x.features(), x.label()});
    // Reversed CE has gradients bounded by |A|; both families share the schedule.
    std::vector<double> grad;
    for (int t = 0; t < s.steps; ++t) {
        std::fill(grad.begin(), grad.end(), 0.0);
        learner_objective(family, l, items, -4.0, &grad);
        l.apply_gradient(grad, s.lr);
    }
    return l;
}

// Fraction of grid points where the clean-trained and noisy-trained rules agree.
inline double decision_agreement(LossFamily family, const ToleranceSetup& s) {
    const auto clean = synthetic::make_separable_2d(s.samples, s.seed);
    const auto noisy = inject_symmetric(clean, s.noise_rate, s.seed + 100);
    const Learner a = fit_weak(family, clean, s);
    const Learner b = fit_weak(family, noisy, s);
    std::size_t agree = 0;
    std::vector<double> x(2);
    for (std::size_t i = 0; i < s.grid; ++i) {
        for (std::size_t j = 0; j < s.grid; ++j) {
            x[0] = s.x_lo + (s.x_hi - s.x_lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(s.grid);
            x[1] = s.y_lo + (s.y_hi - s.y_lo) * (static_cast<double>(j) + 0.5) / static_cast<double>(s.grid);
            agree += a.predict(x).argmax() == b.predict(x).argmax();
        }
    }
    return static_cast<double>(agree) / static_cast<double>(s.grid * s.grid);
}

}  // namespace noiseal::test
