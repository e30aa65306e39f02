#include "noiseal/losses.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "noiseal/error.hpp"

namespace noiseal {

namespace {

double inv_n(std::size_t dataset_size) {
    if (dataset_size == 0) throw Error("dataset size N must be positive");
    return 1.0 / static_cast<double>(dataset_size);
}

void check_label(int label, std::size_t k) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
        throw Error("label " + std::to_string(label) + " out of range for " + std::to_string(k) + " classes");
    }
}

}  // namespace

LossEvaluation loss_clean(const CoPredictionNetwork& net, std::span<const TrainItem> clean,
                          std::size_t dataset_size, bool with_gradient) {
    LossEvaluation out;
    const double scale = inv_n(dataset_size);
    if (with_gradient) {
        out.grad_strong.assign(net.strong.parameter_count(), 0.0);
        out.grad_weak.assign(net.weak.parameter_count(), 0.0);
    }
    const std::size_t K = net.strong.num_classes();
    std::vector<double> dz(K);
    for (const auto& item : clean) {
        check_label(item.label, K);
        const auto y = static_cast<std::size_t>(item.label);
        for (const Learner* l : {&net.strong, &net.weak}) {
            const auto p = l->predict(item.features);
            out.value -= scale * std::log(std::max(p[y], kProbabilityFloor));
            if (!with_gradient) continue;
            for (std::size_t k = 0; k < K; ++k) dz[k] = scale * (p[k] - (k == y ? 1.0 : 0.0));
            l->accumulate_gradient(item.features, dz, l == &net.strong ? out.grad_strong : out.grad_weak);
        }
    }
    return out;
}

LossEvaluation loss_purified(const CoPredictionNetwork& net, std::span<const TrainItem> purified,
                             std::size_t dataset_size, double log_zero, bool with_gradient) {
    if (!(log_zero < 0.0)) throw Error("reversed CE constant A must be negative");
    LossEvaluation out;
    const double scale = inv_n(dataset_size);
    if (with_gradient) {
        out.grad_strong.assign(net.strong.parameter_count(), 0.0);
        out.grad_weak.assign(net.weak.parameter_count(), 0.0);
    }
    const std::size_t K = net.strong.num_classes();
    std::vector<double> dz(K);
    for (const auto& item : purified) {
        check_label(item.label, K);
        const auto y = static_cast<std::size_t>(item.label);
        for (const Learner* l : {&net.strong, &net.weak}) {
            const auto p = l->predict(item.features);
            out.value += scale * -log_zero * (1.0 - p[y]);
            if (!with_gradient) continue;
            // d/dz_k of -A(1 - p_y) = A * p_y * (delta_yk - p_k).
            for (std::size_t k = 0; k < K; ++k) dz[k] = scale * log_zero * p[y] * ((k == y ? 1.0 : 0.0) - p[k]);
            l->accumulate_gradient(item.features, dz, l == &net.strong ? out.grad_strong : out.grad_weak);
        }
    }
    return out;
}

double reversed_cross_entropy(const ProbabilityVector& p, int label, double log_zero) {
    check_label(label, p.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double log_q = static_cast<int>(k) == label ? 0.0 : log_zero;  // log 1 = 0, log 0 := A
        sum -= p[k] * log_q;
    }
    return sum;
}

double reversed_cross_entropy_closed_form(const ProbabilityVector& p, int label, double log_zero) {
    check_label(label, p.size());
    return -log_zero * (1.0 - p[static_cast<std::size_t>(label)]);
}

double standard_cross_entropy(const ProbabilityVector& p, int label) {
    check_label(label, p.size());
    return -std::log(std::max(p[static_cast<std::size_t>(label)], kProbabilityFloor));
}

double symmetry_constant(std::size_t num_classes, double log_zero) {
    return -static_cast<double>(num_classes - 1) * log_zero;
}

double draw_mix_coefficient(double alpha, Rng& rng) {
    if (!(alpha > 0.0)) throw Error("Beta concentration alpha must be positive");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    const double a = gamma(rng);
    const double b = gamma(rng);
    const double lambda = (a + b) > 0.0 ? a / (a + b) : 0.5;
    return std::max(lambda, 1.0 - lambda);
}

MixedSample mix_embeddings(std::span<const double> first_embedding, int first_label,
                           std::span<const double> second_embedding, int second_label,
                           std::size_t num_classes, double lambda_prime) {
    if (first_embedding.size() != second_embedding.size()) throw Error("embedding widths differ");
    check_label(first_label, num_classes);
    check_label(second_label, num_classes);
    std::vector<double> e(first_embedding.size());
    for (std::size_t j = 0; j < e.size(); ++j) {
        e[j] = lambda_prime * first_embedding[j] + (1.0 - lambda_prime) * second_embedding[j];
    }
    std::vector<double> y(num_classes, 0.0);
    y[static_cast<std::size_t>(first_label)] += lambda_prime;
    y[static_cast<std::size_t>(second_label)] += 1.0 - lambda_prime;
    return MixedSample{std::move(e), ProbabilityVector(std::move(y)), lambda_prime};
}

MixedSample embmix(const TrainItem& first, const TrainItem& second, const Learner& strong, double alpha,
                   std::uint64_t seed) {
    Rng rng = make_rng(seed, "losses/embmix");
    const double lambda_prime = draw_mix_coefficient(alpha, rng);
    return mix_embeddings(strong.embed(first.features), first.label, strong.embed(second.features),
                          second.label, strong.num_classes(), lambda_prime);
}

HardMixPlan plan_hard_mix(std::size_t hard_size, double alpha, std::uint64_t seed) {
    HardMixPlan plan;
    if (hard_size < 2) return plan;
    Rng rng = make_rng(seed, "losses/hard-mix");
    plan.partner.reserve(hard_size);
    plan.lambda_prime.reserve(hard_size);
    for (std::size_t i = 0; i < hard_size; ++i) {
        plan.partner.push_back(static_cast<std::size_t>(uniform_index(rng, hard_size)));
        plan.lambda_prime.push_back(draw_mix_coefficient(alpha, rng));
    }
    return plan;
}

LossEvaluation loss_hard(const Learner& strong, std::span<const TrainItem> hard, double alpha,
                         std::size_t dataset_size, std::uint64_t seed, bool with_gradient) {
    return loss_hard(strong, hard, plan_hard_mix(hard.size(), alpha, seed), dataset_size, with_gradient);
}

LossEvaluation loss_hard(const Learner& strong, std::span<const TrainItem> hard, const HardMixPlan& plan,
                         std::size_t dataset_size, bool with_gradient) {
    LossEvaluation out;
    const double scale = inv_n(dataset_size);
    if (with_gradient) out.grad_strong.assign(strong.parameter_count(), 0.0);
    if (hard.size() < 2) return out;
    if (plan.partner.size() != hard.size() || plan.lambda_prime.size() != hard.size()) {
        throw Error("hard-set mix plan does not match the hard set size");
    }
    const std::size_t K = strong.num_classes();
    const std::size_t h = strong.hidden_width();
    std::vector<std::vector<double>> emb;
    emb.reserve(hard.size());
    for (const auto& item : hard) emb.push_back(strong.embed(item.features));

    std::vector<double> dz(K);
    std::vector<double> de(h), de_part(h);
    for (std::size_t i = 0; i < hard.size(); ++i) {
        const std::size_t j = plan.partner.at(i);
        const double lam = plan.lambda_prime[i];
        const auto mixed = mix_embeddings(emb[i], hard[i].label, emb[j], hard[j].label, K, lam);
        const auto p = softmax(strong.head_logits(mixed.embedding));
        for (std::size_t k = 0; k < K; ++k) {
            if (mixed.target[k] > 0.0) out.value -= scale * mixed.target[k] * std::log(std::max(p[k], kProbabilityFloor));
        }
        if (!with_gradient) continue;
        for (std::size_t k = 0; k < K; ++k) dz[k] = scale * (p[k] - mixed.target[k]);
        std::fill(de.begin(), de.end(), 0.0);
        strong.accumulate_head_gradient(mixed.embedding, dz, out.grad_strong, de);
        // e' = lam * e_i + (1 - lam) * e_j; gradient flows back into both encodings.
        for (std::size_t t = 0; t < h; ++t) de_part[t] = lam * de[t];
        strong.accumulate_embedding_gradient(hard[i].features, de_part, out.grad_strong);
        for (std::size_t t = 0; t < h; ++t) de_part[t] = (1.0 - lam) * de[t];
        strong.accumulate_embedding_gradient(hard[j].features, de_part, out.grad_strong);
    }
    return out;
}

std::vector<double> add_gradients(std::size_t size, std::initializer_list<const std::vector<double>*> grads) {
    std::vector<double> sum(size, 0.0);
    for (const auto* g : grads) {
        if (!g || g->empty()) continue;
        if (g->size() != size) throw Error("gradient size mismatch while summing loss terms");
        for (std::size_t i = 0; i < size; ++i) sum[i] += (*g)[i];
    }
    return sum;
}

std::string to_string(LossFamily family) {
    return family == LossFamily::reversed_ce ? "reversed_ce" : "standard_ce";
}

double learner_objective(LossFamily family, const Learner& learner, std::span<const TrainItem> items,
                         double log_zero, std::vector<double>* grad) {
    if (items.empty()) throw Error("learner objective needs at least one item");
    if (family == LossFamily::reversed_ce && !(log_zero < 0.0)) throw Error("reversed CE constant A must be negative");
    const std::size_t K = learner.num_classes();
    const double scale = 1.0 / static_cast<double>(items.size());
    if (grad) grad->resize(learner.parameter_count(), 0.0);
    std::vector<double> dz(K);
    double value = 0.0;
    for (const auto& item : items) {
        check_label(item.label, K);
        const auto y = static_cast<std::size_t>(item.label);
        const auto p = learner.predict(item.features);
        if (family == LossFamily::reversed_ce) {
            value += scale * -log_zero * (1.0 - p[y]);
            for (std::size_t k = 0; k < K; ++k) dz[k] = scale * log_zero * p[y] * ((k == y ? 1.0 : 0.0) - p[k]);
        } else {
            value -= scale * std::log(std::max(p[y], kProbabilityFloor));
            for (std::size_t k = 0; k < K; ++k) dz[k] = scale * (p[k] - (k == y ? 1.0 : 0.0));
        }
        if (grad) learner.accumulate_gradient(item.features, dz, *grad);
    }
    return value;
}

bool SymmetryReport::constant() const {
    return family == LossFamily::reversed_ce ? max_deviation < 1e-9 : variance_of_sums == 0.0;
}

std::string SymmetryReport::to_json() const {
    nlohmann::json j;
    j["family"] = noiseal::to_string(family);
    j["K"] = num_classes;
    j["A"] = log_zero;
    j["trials"] = trials;
    j["expected_constant"] = std::isnan(expected_constant) ? nlohmann::json(nullptr) : nlohmann::json(expected_constant);
    j["max_deviation"] = std::isnan(max_deviation) ? nlohmann::json(nullptr) : nlohmann::json(max_deviation);
    j["mean_sum"] = mean_sum;
    j["variance_of_sums"] = variance_of_sums;
    j["constant"] = constant();
    return j.dump(2);
}

SymmetryReport verify_symmetry(LossFamily family, std::size_t num_classes, double log_zero,
                               std::size_t trials, std::uint64_t seed) {
    if (trials == 0) throw Error("verify_symmetry needs at least one trial");
    if (num_classes < 2) throw Error("verify_symmetry needs at least two classes");
    const auto start = std::chrono::steady_clock::now();
    Rng rng = make_rng(seed, "losses/verify-symmetry");
    std::exponential_distribution<double> expo(1.0);
    SymmetryReport r{family, num_classes, log_zero, trials,
                     family == LossFamily::reversed_ce ? symmetry_constant(num_classes, log_zero)
                                                       : std::numeric_limits<double>::quiet_NaN(),
                     family == LossFamily::reversed_ce ? 0.0 : std::numeric_limits<double>::quiet_NaN(),
                     0.0, 0.0, 0.0};
    // Welford accumulation of the per-trial sums.
    double mean = 0.0, m2 = 0.0;
    std::vector<double> w(num_classes);
    for (std::size_t t = 0; t < trials; ++t) {
        // Dirichlet(1) sample: normalized exponentials.
        double total = 0.0;
        for (double& v : w) {
            v = expo(rng);
            total += v;
        }
        for (double& v : w) v /= total;
        const ProbabilityVector p(w);
        double sum = 0.0;
        for (std::size_t y = 0; y < num_classes; ++y) {
            sum += family == LossFamily::reversed_ce ? reversed_cross_entropy(p, static_cast<int>(y), log_zero)
                                                     : standard_cross_entropy(p, static_cast<int>(y));
        }
        if (family == LossFamily::reversed_ce) {
            r.max_deviation = std::max(r.max_deviation, std::abs(sum - r.expected_constant));
        }
        const double delta = sum - mean;
        mean += delta / static_cast<double>(t + 1);
        m2 += delta * (sum - mean);
    }
    r.mean_sum = mean;
    r.variance_of_sums = trials > 1 ? m2 / static_cast<double>(trials - 1) : 0.0;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace noiseal
