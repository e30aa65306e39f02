#include "noiseal/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noiseal/error.hpp"
#include "noiseal/rng.hpp"

namespace noiseal {

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::symmetric: return "symmetric";
        case NoiseKind::asymmetric: return "asymmetric";
        case NoiseKind::instance_dependent: return "instance_dependent";
    }
    return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "symmetric" || name == "sym") return NoiseKind::symmetric;
    if (name == "asymmetric" || name == "asym") return NoiseKind::asymmetric;
    if (name == "instance_dependent" || name == "idn") return NoiseKind::instance_dependent;
    throw ConfigError("unknown noise kind '" + name + "'");
}

namespace {

void check_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error("noise rate must lie in [0,1), got " + std::to_string(rate));
}

void check_transition(const TransitionMatrix& t, std::size_t k, double rate) {
    if (t.size() != k) throw Error("transition matrix must be " + std::to_string(k) + "x" + std::to_string(k));
    for (std::size_t i = 0; i < k; ++i) {
        if (t[i].size() != k) throw Error("transition row " + std::to_string(i) + " has wrong length");
        double sum = 0.0;
        for (double v : t[i]) {
            if (!(v >= 0.0 && v <= 1.0)) throw Error("transition entries must lie in [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw Error("transition row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        if (std::abs(t[i][i] - (1.0 - rate)) > 1e-9) {
            throw Error("transition diagonal entry " + std::to_string(i) + " is " + std::to_string(t[i][i]) +
                        ", expected 1 - rate = " + std::to_string(1.0 - rate));
        }
    }
}

LabeledDataset rebuild(const LabeledDataset& ds, std::vector<Sample> samples) {
    return LabeledDataset(std::move(samples), ds.num_classes(), ds.feature_dim(), ds.class_names());
}

}  // namespace

void NoiseSpec::validate(std::size_t num_classes) const {
    check_rate(rate);
    if (transition) check_transition(*transition, num_classes, rate);
}

LabeledDataset inject_symmetric(const LabeledDataset& ds, double rate, std::uint64_t seed) {
    check_rate(rate);
    const std::size_t k = ds.num_classes();
    if (k < 2 && rate > 0.0) throw Error("symmetric noise needs at least 2 classes");
    Rng rng = make_rng(seed, "noise/symmetric");
    std::vector<Sample> out;
    out.reserve(ds.size());
    for (const auto& s : ds) {
        const bool flip = uniform01(rng) < rate;
        int label = s.label();
        if (flip) {
            // Uniform over the K-1 other classes.
            int other = static_cast<int>(uniform_index(rng, k - 1));
            label = other >= s.label() ? other + 1 : other;
        }
        out.push_back(s.with_noisy_label(label));
    }
    return rebuild(ds, std::move(out));
}

TransitionMatrix cyclic_transition(std::size_t num_classes, double rate) {
    check_rate(rate);
    TransitionMatrix t(num_classes, std::vector<double>(num_classes, 0.0));
    if (num_classes == 1) {
        t[0][0] = 1.0;
        return t;
    }
    for (std::size_t i = 0; i < num_classes; ++i) {
        t[i][i] = 1.0 - rate;
        t[i][(i + 1) % num_classes] += rate;
    }
    return t;
}

LabeledDataset inject_asymmetric(const LabeledDataset& ds, double rate,
                                 const TransitionMatrix& transition, std::uint64_t seed) {
    check_rate(rate);
    check_transition(transition, ds.num_classes(), rate);
    Rng rng = make_rng(seed, "noise/asymmetric");
    std::vector<Sample> out;
    out.reserve(ds.size());
    for (const auto& s : ds) {
        const auto& row = transition[static_cast<std::size_t>(s.label())];
        const double u = uniform01(rng);
        double acc = 0.0;
        int label = static_cast<int>(row.size()) - 1;
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc += row[j];
            if (u < acc) {
                label = static_cast<int>(j);
                break;
            }
        }
        out.push_back(s.with_noisy_label(label));
    }
    return rebuild(ds, std::move(out));
}

LabeledDataset inject_instance_dependent(const LabeledDataset& ds, double rate, const Learner& scorer,
                                         std::uint64_t seed) {
    check_rate(rate);
    const auto target = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(ds.size()) - 1e-9));
    std::vector<std::size_t> eligible;
    std::vector<int> predicted(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        predicted[i] = scorer.predict(ds[i]).argmax();
        if (predicted[i] != ds[i].label()) eligible.push_back(i);
    }
    if (target > eligible.size()) {
        throw Error("instance-dependent noise: requested " + std::to_string(target) + " flips but only " +
                    std::to_string(eligible.size()) + " samples disagree with the scorer (max rate " +
                    std::to_string(static_cast<double>(eligible.size()) / static_cast<double>(ds.size())) + ")");
    }
    Rng rng = make_rng(seed, "noise/idn");
    // Drawing without replacement: a partial Fisher-Yates over the eligible pool.
    for (std::size_t i = 0; i < target; ++i) {
        std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
    }
    std::vector<bool> flip(ds.size(), false);
    for (std::size_t i = 0; i < target; ++i) flip[eligible[i]] = true;
    std::vector<Sample> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out.push_back(ds[i].with_noisy_label(flip[i] ? predicted[i] : ds[i].label()));
    }
    return rebuild(ds, std::move(out));
}

Learner train_default_scorer(const LabeledDataset& ds, std::uint64_t seed, int epochs,
                             int steps_per_epoch, double lr) {
    Learner scorer = Learner::weak(ds.feature_dim(), ds.num_classes(), derive_seed(seed, "noise/scorer"));
    std::vector<TrainExample> batch;
    batch.reserve(ds.size());
    const double w = 1.0 / static_cast<double>(std::max<std::size_t>(1, ds.size()));
    for (const auto& s : ds) {
        batch.push_back({s.features(), ProbabilityVector::one_hot(ds.num_classes(), s.label()), w});
    }
    for (int e = 0; e < epochs; ++e) {
        for (int step = 0; step < steps_per_epoch; ++step) train_step(scorer, batch, lr);
    }
    return scorer;
}

LabeledDataset inject(const LabeledDataset& ds, const NoiseSpec& spec, const Learner* scorer) {
    spec.validate(ds.num_classes());
    switch (spec.kind) {
        case NoiseKind::symmetric:
            return inject_symmetric(ds, spec.rate, spec.seed);
        case NoiseKind::asymmetric: {
            const auto t = spec.transition ? *spec.transition : cyclic_transition(ds.num_classes(), spec.rate);
            return inject_asymmetric(ds, spec.rate, t, spec.seed);
        }
        case NoiseKind::instance_dependent: {
            if (scorer) return inject_instance_dependent(ds, spec.rate, *scorer, spec.seed);
            const Learner trained = train_default_scorer(ds, spec.seed);
            return inject_instance_dependent(ds, spec.rate, trained, spec.seed);
        }
    }
    throw Error("unhandled noise kind");
}

std::vector<std::vector<std::size_t>> noise_confusion(const LabeledDataset& ds) {
    const std::size_t k = ds.num_classes();
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k, 0));
    for (const auto& s : ds) {
        if (auto t = AuditAccess::true_label(s)) {
            ++counts[static_cast<std::size_t>(*t)][static_cast<std::size_t>(s.label())];
        }
    }
    return counts;
}

double realized_noise_rate(const LabeledDataset& ds) {
    std::size_t flipped = 0, known = 0;
    for (const auto& s : ds) {
        if (auto t = AuditAccess::true_label(s)) {
            ++known;
            flipped += (*t != s.label());
        }
    }
    return known ? static_cast<double>(flipped) / static_cast<double>(known) : 0.0;
}

}  // namespace noiseal
