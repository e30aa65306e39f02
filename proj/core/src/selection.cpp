#include "noiseal/selection.hpp"

#include <algorithm>
#include <functional>
#include <iterator>
#include <cmath>
#include <numbers>

#include "noiseal/error.hpp"

namespace noiseal {

ThresholdState::ThresholdState(double lambda_strong, double lambda_weak)
    : lambda_strong_(lambda_strong), lambda_weak_(lambda_weak) {
    for (double l : {lambda_strong, lambda_weak}) {
        if (!(l > 0.0 && l <= 1.0)) throw Error("threshold lambda must lie in (0,1], got " + std::to_string(l));
    }
}

double ThresholdState::lambda(LearnerKind kind) const noexcept {
    return kind == LearnerKind::strong ? lambda_strong_ : lambda_weak_;
}

double ThresholdState::update(SampleId id, LearnerKind kind, double p_t) {
    if (!(p_t >= 0.0 && p_t <= 1.0)) throw Error("confidence " + std::to_string(p_t) + " outside [0,1]");
    const double l = lambda(kind);
    double& tau = tau_[key(id, kind)];  // unseen pairs start at 0
    tau = std::clamp(l * p_t + (1.0 - l) * tau, 0.0, 1.0);
    return tau;
}

double ThresholdState::tau(SampleId id, LearnerKind kind) const {
    auto it = tau_.find(key(id, kind));
    return it == tau_.end() ? 0.0 : it->second;
}

namespace {

double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -INFINITY) return -INFINITY;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double gmm_log_likelihood(const GmmFit& fit, std::span<const double> losses) {
    double ll = 0.0;
    for (double x : losses) {
        ll += log_sum_exp(std::log(fit.weight[0]) + log_normal_pdf(x, fit.mean[0], fit.variance[0]),
                          std::log(fit.weight[1]) + log_normal_pdf(x, fit.mean[1], fit.variance[1]));
    }
    return ll;
}

GmmFit fit_loss_gmm(std::span<const double> losses, const GmmOptions& options) {
    const std::size_t n = losses.size();
    if (n < 4) throw Error("GMM fit needs at least 4 losses, got " + std::to_string(n));
    for (double x : losses) {
        if (!std::isfinite(x)) throw Error("GMM fit received a non-finite loss");
    }
    const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    if (*lo == *hi) throw Error("degenerate loss distribution");

    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());
    GmmFit fit;
    const std::size_t half = n / 2;
    auto moments = [&](std::size_t begin, std::size_t end, int c) {
        double m = 0.0;
        for (std::size_t i = begin; i < end; ++i) m += sorted[i];
        m /= static_cast<double>(end - begin);
        double v = 0.0;
        for (std::size_t i = begin; i < end; ++i) v += (sorted[i] - m) * (sorted[i] - m);
        fit.mean[c] = m;
        fit.variance[c] = std::max(v / static_cast<double>(end - begin), options.variance_floor);
    };
    moments(0, half, 0);
    moments(half, n, 1);

    std::vector<double> resp(n);
    double ll = gmm_log_likelihood(fit, losses);
    fit.log_likelihood.push_back(ll);
    for (int it = 0; it < options.max_iterations; ++it) {
        // E-step: responsibility of component 0.
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::log(fit.weight[0]) + log_normal_pdf(losses[i], fit.mean[0], fit.variance[0]);
            const double b = std::log(fit.weight[1]) + log_normal_pdf(losses[i], fit.mean[1], fit.variance[1]);
            resp[i] = std::exp(a - log_sum_exp(a, b));
        }
        // M-step.
        for (int c = 0; c < 2; ++c) {
            double nk = 0.0, sx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = c == 0 ? resp[i] : 1.0 - resp[i];
                nk += r;
                sx += r * losses[i];
            }
            if (nk <= 1e-300) continue;  // empty component keeps its parameters
            const double m = sx / nk;
            double sv = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = c == 0 ? resp[i] : 1.0 - resp[i];
                sv += r * (losses[i] - m) * (losses[i] - m);
            }
            fit.mean[c] = m;
            fit.variance[c] = std::max(sv / nk, options.variance_floor);
            fit.weight[c] = nk / static_cast<double>(n);
        }
        const double wsum = fit.weight[0] + fit.weight[1];
        fit.weight[0] /= wsum;
        fit.weight[1] /= wsum;

        const double next = gmm_log_likelihood(fit, losses);
        fit.log_likelihood.push_back(next);
        fit.iterations = it + 1;
        const double delta = next - ll;
        ll = next;
        if (std::abs(delta) < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (fit.mean[0] > fit.mean[1]) {
        std::swap(fit.mean[0], fit.mean[1]);
        std::swap(fit.variance[0], fit.variance[1]);
        std::swap(fit.weight[0], fit.weight[1]);
    }
    return fit;
}

double clean_probability(const GmmFit& fit, double loss) {
    const double a = std::log(fit.weight[0]) + log_normal_pdf(loss, fit.mean[0], fit.variance[0]);
    const double b = std::log(fit.weight[1]) + log_normal_pdf(loss, fit.mean[1], fit.variance[1]);
    const double denom = log_sum_exp(a, b);
    if (denom == -INFINITY) return fit.weight[0];
    return std::clamp(std::exp(a - denom), 0.0, 1.0);
}

namespace {

double lookup(const ScoreMap& m, SampleId id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw Error(std::string("partition: missing ") + what + " for sample " + std::to_string(id));
    return it->second;
}

}  // namespace

PartitionResult partition(std::span<const SampleId> ids, const ScoreMap& conf_weak,
                          const ScoreMap& conf_strong, const ThresholdState& state,
                          const ScoreMap& clean_prob, double phi) {
    PartitionResult out;
    out.phi = phi;
    std::vector<SampleId> order(ids.begin(), ids.end());
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    for (SampleId id : order) {
        const bool weak_above = lookup(conf_weak, id, "weak confidence") > state.tau(id, LearnerKind::weak);
        const bool strong_above = lookup(conf_strong, id, "strong confidence") > state.tau(id, LearnerKind::strong);
        const double o = lookup(clean_prob, id, "clean probability");
        if (weak_above && strong_above) {
            out.consistency.push_back(id);
            (o >= phi ? out.clean : out.purified).push_back(id);
        } else if (weak_above || strong_above) {
            out.discrepancy.push_back(id);
            if (o >= phi) out.hard.push_back(id);
        }
    }
    return out;
}

std::string check_partition(const PartitionResult& part) {
    auto sorted_unique = [](const std::vector<SampleId>& v) {
        return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
    };
    for (const auto* v : {&part.consistency, &part.discrepancy, &part.clean, &part.hard, &part.purified}) {
        if (!sorted_unique(*v)) return "set not sorted/unique";
    }
    auto intersect = [](const std::vector<SampleId>& a, const std::vector<SampleId>& b) {
        std::vector<SampleId> out;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        return out;
    };
    if (!intersect(part.consistency, part.discrepancy).empty()) return "C and I intersect";
    if (!intersect(part.clean, part.purified).empty()) return "R and P intersect";
    std::vector<SampleId> rp;
    std::set_union(part.clean.begin(), part.clean.end(), part.purified.begin(), part.purified.end(),
                   std::back_inserter(rp));
    if (rp != part.consistency) return "R u P != C";
    if (!std::includes(part.discrepancy.begin(), part.discrepancy.end(), part.hard.begin(), part.hard.end())) {
        return "H not within I";
    }
    if (!intersect(part.hard, part.clean).empty() || !intersect(part.hard, part.purified).empty()) {
        return "H overlaps R or P";
    }
    return {};
}

}  // namespace noiseal
