#include "noiseal/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noiseal/error.hpp"
#include "noiseal/rng.hpp"

namespace noiseal {

std::string to_string(LearnerKind kind) {
    return kind == LearnerKind::strong ? "strong" : "weak";
}

LearnerKind parse_learner_kind(const std::string& name) {
    if (name == "strong") return LearnerKind::strong;
    if (name == "weak") return LearnerKind::weak;
    throw Error("unknown learner kind '" + name + "'");
}

ProbabilityVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw Error("softmax of empty logits");
    double top = -INFINITY;
    for (double z : logits) {
        if (!std::isfinite(z)) throw Error("non-finite logit " + std::to_string(z));
        top = std::max(top, z);
    }
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - top);
        sum += p[k];
    }
    for (double& v : p) v /= sum;
    return ProbabilityVector(std::move(p));
}

Learner::Learner(LearnerKind kind, std::size_t input_dim, std::size_t hidden, std::size_t classes,
                 FeatureView view, std::uint64_t seed)
    : kind_(kind), input_dim_(input_dim), hidden_(hidden), classes_(classes), view_(view), seed_(seed) {
    if (input_dim_ == 0 || classes_ == 0) throw Error("learner needs positive input and class counts");
    if (view_.width == 0 || view_.offset + view_.width > input_dim_) {
        throw Error("feature view [" + std::to_string(view_.offset) + ", " +
                    std::to_string(view_.offset + view_.width) + ") outside input dimension " +
                    std::to_string(input_dim_));
    }
    Rng rng = make_rng(seed_, to_string(kind_));
    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every layer.
    auto fill = [&](std::size_t count, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) params_.push_back((2.0 * uniform01(rng) - 1.0) * bound);
    };
    if (kind_ == LearnerKind::strong) {
        if (hidden_ == 0) throw Error("strong learner needs a positive hidden width");
        fill(hidden_ * view_.width, view_.width);
        fill(hidden_, view_.width);
        fill(classes_ * hidden_, hidden_);
        fill(classes_, hidden_);
    } else {
        fill(classes_ * view_.width, view_.width);
        fill(classes_, view_.width);
    }
}

Learner Learner::strong(std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                        std::uint64_t seed) {
    return Learner(LearnerKind::strong, input_dim, hidden, num_classes, FeatureView{0, input_dim}, seed);
}

Learner Learner::weak(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed,
                      std::optional<FeatureView> view) {
    FeatureView v = view.value_or(FeatureView{0, std::max<std::size_t>(1, input_dim / 2)});
    return Learner(LearnerKind::weak, input_dim, 0, num_classes, v, seed);
}

void Learner::require_strong(const char* op) const {
    if (kind_ != LearnerKind::strong) {
        throw Error(std::string(op) + " requires the strong learner (the weak learner has no hidden layer)");
    }
}

void Learner::check_features(std::span<const double> features) const {
    if (features.size() != input_dim_) {
        throw Error("feature dimension " + std::to_string(features.size()) + " != learner input " +
                    std::to_string(input_dim_));
    }
}

std::span<const double> Learner::viewed(std::span<const double> features) const {
    check_features(features);
    return features.subspan(view_.offset, view_.width);
}

std::vector<double> Learner::embed(std::span<const double> features) const {
    require_strong("embed");
    const auto x = viewed(features);
    std::vector<double> e(hidden_);
    const double* W = params_.data() + w1();
    const double* b = params_.data() + b1();
    for (std::size_t j = 0; j < hidden_; ++j) {
        double a = b[j];
        const double* row = W + j * view_.width;
        for (std::size_t i = 0; i < view_.width; ++i) a += row[i] * x[i];
        e[j] = std::tanh(a);
    }
    return e;
}

std::vector<double> Learner::head_logits(std::span<const double> embedding) const {
    require_strong("head_logits");
    if (embedding.size() != hidden_) throw Error("embedding width mismatch");
    std::vector<double> z(classes_);
    const double* W = params_.data() + w2();
    const double* b = params_.data() + b2();
    for (std::size_t k = 0; k < classes_; ++k) {
        double a = b[k];
        const double* row = W + k * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) a += row[j] * embedding[j];
        z[k] = a;
    }
    return z;
}

std::vector<double> Learner::logits(std::span<const double> features) const {
    if (kind_ == LearnerKind::strong) return head_logits(embed(features));
    const auto x = viewed(features);
    std::vector<double> z(classes_);
    const double* W = params_.data();
    const double* b = params_.data() + weak_b();
    for (std::size_t k = 0; k < classes_; ++k) {
        double a = b[k];
        const double* row = W + k * view_.width;
        for (std::size_t i = 0; i < view_.width; ++i) a += row[i] * x[i];
        z[k] = a;
    }
    return z;
}

ProbabilityVector Learner::predict(std::span<const double> features) const {
    return softmax(logits(features));
}

void Learner::accumulate_head_gradient(std::span<const double> embedding,
                                       std::span<const double> dlogits, std::span<double> grad,
                                       std::span<double> dembedding) const {
    require_strong("accumulate_head_gradient");
    const double* W = params_.data() + w2();
    double* gW = grad.data() + w2();
    double* gb = grad.data() + b2();
    for (std::size_t k = 0; k < classes_; ++k) {
        const double g = dlogits[k];
        if (g == 0.0) continue;
        gb[k] += g;
        double* grow = gW + k * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) grow[j] += g * embedding[j];
        if (!dembedding.empty()) {
            const double* row = W + k * hidden_;
            for (std::size_t j = 0; j < hidden_; ++j) dembedding[j] += g * row[j];
        }
    }
}

void Learner::accumulate_embedding_gradient(std::span<const double> features,
                                            std::span<const double> dembedding,
                                            std::span<double> grad) const {
    require_strong("accumulate_embedding_gradient");
    const auto x = viewed(features);
    const auto e = embed(features);
    double* gW = grad.data() + w1();
    double* gb = grad.data() + b1();
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double da = dembedding[j] * (1.0 - e[j] * e[j]);
        if (da == 0.0) continue;
        gb[j] += da;
        double* grow = gW + j * view_.width;
        for (std::size_t i = 0; i < view_.width; ++i) grow[i] += da * x[i];
    }
}

void Learner::accumulate_gradient(std::span<const double> features, std::span<const double> dlogits,
                                  std::span<double> grad) const {
    if (grad.size() != params_.size()) throw Error("gradient buffer size mismatch");
    if (dlogits.size() != classes_) throw Error("logit gradient size mismatch");
    if (kind_ == LearnerKind::strong) {
        const auto e = embed(features);
        std::vector<double> de(hidden_, 0.0);
        accumulate_head_gradient(e, dlogits, grad, de);
        accumulate_embedding_gradient(features, de, grad);
        return;
    }
    const auto x = viewed(features);
    double* gW = grad.data();
    double* gb = grad.data() + weak_b();
    for (std::size_t k = 0; k < classes_; ++k) {
        const double g = dlogits[k];
        if (g == 0.0) continue;
        gb[k] += g;
        double* grow = gW + k * view_.width;
        for (std::size_t i = 0; i < view_.width; ++i) grow[i] += g * x[i];
    }
}

void Learner::apply_gradient(std::span<const double> grad, double lr) {
    if (grad.size() != params_.size()) throw Error("gradient buffer size mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw Error("non-finite gradient at " + to_string(kind_) + " parameter " +
                        std::to_string(i) + " (value " + std::to_string(grad[i]) + ")");
        }
    }
    for (std::size_t i = 0; i < grad.size(); ++i) params_[i] -= lr * grad[i];
}

std::string Learner::checkpoint_json() const {
    nlohmann::json j;
    j["header"] = {{"kind", to_string(kind_)},
                   {"d", input_dim_},
                   {"h", hidden_},
                   {"K", classes_},
                   {"seed", seed_},
                   {"view_offset", view_.offset},
                   {"view_width", view_.width}};
    j["parameters"] = params_;
    return j.dump();
}

Learner Learner::from_checkpoint_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        const auto& h = j.at("header");
        Learner l(parse_learner_kind(h.at("kind").get<std::string>()), h.at("d").get<std::size_t>(),
                  h.at("h").get<std::size_t>(), h.at("K").get<std::size_t>(),
                  FeatureView{h.at("view_offset").get<std::size_t>(), h.at("view_width").get<std::size_t>()},
                  h.at("seed").get<std::uint64_t>());
        auto params = j.at("parameters").get<std::vector<double>>();
        if (params.size() != l.params_.size()) {
            throw Error("checkpoint has " + std::to_string(params.size()) + " parameters, expected " +
                        std::to_string(l.params_.size()));
        }
        l.params_ = std::move(params);
        return l;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed checkpoint: ") + e.what());
    }
}

void Learner::save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out << checkpoint_json() << '\n';
}

Learner Learner::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_checkpoint_json(ss.str());
}

double per_sample_loss(const Learner& learner, std::span<const double> features, int label) {
    const auto p = learner.predict(features);
    if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
        throw Error("label " + std::to_string(label) + " out of range");
    }
    return std::max(0.0, -std::log(std::max(p[static_cast<std::size_t>(label)], kProbabilityFloor)));
}

double cross_entropy_objective(const Learner& learner, std::span<const TrainExample> batch,
                               std::vector<double>* grad) {
    if (grad) grad->assign(learner.parameter_count(), 0.0);
    const std::size_t K = learner.num_classes();
    double total = 0.0;
    std::vector<double> dz(K);
    for (const auto& ex : batch) {
        if (ex.target.size() != K) throw Error("target distribution has wrong class count");
        if (ex.weight == 0.0) continue;
        const auto p = learner.predict(ex.features);
        double ce = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (ex.target[k] > 0.0) ce -= ex.target[k] * std::log(std::max(p[k], kProbabilityFloor));
        }
        total += ex.weight * ce;
        if (grad) {
            // d/dz of soft-target CE with a normalized target is p - t.
            for (std::size_t k = 0; k < K; ++k) dz[k] = ex.weight * (p[k] - ex.target[k]);
            learner.accumulate_gradient(ex.features, dz, *grad);
        }
    }
    return total;
}

double train_step(Learner& learner, std::span<const TrainExample> batch, double lr) {
    if (!(lr >= 0.0)) throw Error("learning rate must be non-negative");
    std::vector<double> grad;
    const double loss = cross_entropy_objective(learner, batch, &grad);
    if (lr > 0.0) learner.apply_gradient(grad, lr);
    return loss;
}

CoPredictionNetwork::CoPredictionNetwork(Learner strong_learner, Learner weak_learner)
    : strong(std::move(strong_learner)), weak(std::move(weak_learner)) {
    if (strong.kind() != LearnerKind::strong || weak.kind() != LearnerKind::weak) {
        throw Error("co-prediction network needs one strong and one weak learner");
    }
    if (strong.num_classes() != weak.num_classes() || strong.input_dim() != weak.input_dim()) {
        throw Error("co-prediction learners disagree on input dimension or class count");
    }
    if (strong.view() == weak.view()) throw Error("co-prediction learners must use different feature views");
    if (strong.parameter_count() <= weak.parameter_count()) {
        throw Error("strong learner must have more parameters than the weak learner");
    }
}

}  // namespace noiseal
