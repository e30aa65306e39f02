#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "noiseal/learner.hpp"
#include "noiseal/losses.hpp"
#include "noiseal/rng.hpp"
#include "noiseal/selection.hpp"
#include "noiseal/synthetic.hpp"

namespace {

using namespace noiseal;
using synthetic::make_blobs;

// Loss values drawn from a clean/noisy mixture, roughly what the strong learner produces.
std::vector<double> mixture_losses(std::size_t n) {
    Rng rng = make_rng(7, "bench-gmm");
    std::normal_distribution<double> clean(0.1, 0.05), noisy(2.0, 0.5);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (i % 5 < 3) ? clean(rng) : noisy(rng);
    return out;
}

void BM_FitLossGmm(benchmark::State& state) {
    const auto losses = mixture_losses(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        GmmFit fit = fit_loss_gmm(losses);
        benchmark::DoNotOptimize(fit.mean[0]);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitLossGmm)->Arg(1600)->Arg(16000);

void BM_Partition(benchmark::State& state) {
    const auto n = static_cast<SampleId>(state.range(0));
    Rng rng = make_rng(11, "bench-partition");
    std::vector<SampleId> ids(static_cast<std::size_t>(n));
    ScoreMap weak, strong, clean;
    ThresholdState tau(0.9, 0.9);
    for (SampleId id = 0; id < n; ++id) {
        ids[static_cast<std::size_t>(id)] = id;
        weak[id] = uniform01(rng);
        strong[id] = uniform01(rng);
        clean[id] = uniform01(rng);
        tau.update(id, LearnerKind::weak, uniform01(rng));
        tau.update(id, LearnerKind::strong, uniform01(rng));
    }
    for (auto _ : state) {
        PartitionResult part = partition(ids, weak, strong, tau, clean, 0.5);
        benchmark::DoNotOptimize(part.clean.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Partition)->Arg(1600)->Arg(16000);

// One full-batch step at the reference shape: 1600 x 64 features, 4 classes.
void BM_TrainStepStrong(benchmark::State& state) {
    const LabeledDataset ds = make_blobs({.samples = 1600, .classes = 4, .dim = 64, .seed = 3});
    Learner learner = Learner::strong(64, static_cast<std::size_t>(state.range(0)), 4, 3);
    std::vector<TrainExample> batch;
    for (const Sample& s : ds) batch.push_back({s.features(), ProbabilityVector::one_hot(4, s.label()), 1.0});
    for (auto _ : state) benchmark::DoNotOptimize(train_step(learner, batch, 0.05));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch.size()));
}
BENCHMARK(BM_TrainStepStrong)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_LossHard(benchmark::State& state) {
    const LabeledDataset ds = make_blobs({.samples = static_cast<std::size_t>(state.range(0)),
                                          .classes = 4, .dim = 64, .seed = 5});
    const Learner strong = Learner::strong(64, 128, 4, 5);
    std::vector<TrainItem> hard;
    for (const Sample& s : ds) hard.push_back({s.features(), s.label()});
    std::uint64_t seed = 0;
    for (auto _ : state) {
        LossEvaluation ev = loss_hard(strong, hard, 0.75, 2000, ++seed);
        benchmark::DoNotOptimize(ev);
    }
}
BENCHMARK(BM_LossHard)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
