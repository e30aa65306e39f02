// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "noise_tolerance.hpp"
#include "noiseal/annotator.hpp"
#include "noiseal/losses.hpp"
#include "noiseal/noise.hpp"
#include "noiseal/pipeline.hpp"
#include "noiseal/selection.hpp"
#include "noiseal/synthetic.hpp"
#include "test_support.hpp"

using namespace noiseal;
using nlohmann::json;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double three_sigma(double p, std::size_t n) { return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

// ---- 1 ---------------------------------------------------------------------

Verdict symmetry_constant_check() {
    test::TempDir dir("accept_verify");
    std::ostringstream out, err;
    const int code = cli::run({"noiseal", "verify-loss", "--k", "2,4,6,20", "--a", "-4", "--trials", "10000",
                               "--family", "both", "--out-dir", dir.path().string()},
                              out, err);
    const json reports = json::parse(test::read_file(dir / "verify_loss.json"));
    bool ok = code == 0 && reports.size() == 8;
    double worst = 0.0, min_var = INFINITY;
    for (const auto& r : reports) {
        if (r["family"] == "reversed_ce") {
            const double expected = -(r["K"].get<double>() - 1.0) * -4.0;
            ok = ok && r["expected_constant"].get<double>() == expected && r["max_deviation"].get<double>() < 1e-9;
            worst = std::max(worst, r["max_deviation"].get<double>());
        } else {
            ok = ok && r["variance_of_sums"].get<double>() > 0.0;
            min_var = std::min(min_var, r["variance_of_sums"].get<double>());
        }
    }
    return {ok, "max RCE deviation " + fmt("%.2e", worst) + ", min CE variance " + fmt("%.3g", min_var)};
}

// ---- 2 ---------------------------------------------------------------------

Verdict noise_tolerance_check() {
    const test::ToleranceSetup setup;
    const double rce = test::decision_agreement(LossFamily::reversed_ce, setup);
    const double ce = test::decision_agreement(LossFamily::standard_ce, setup);
    return {rce >= 0.90 && ce < rce, "grid agreement reversed_ce " + fmt("%.4f", rce) + ", standard_ce " + fmt("%.4f", ce)};
}

// ---- 3 ---------------------------------------------------------------------

Verdict gmm_check() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> a(0.05, 0.05), b(2.0, 0.05);
    std::vector<double> x;
    for (int i = 0; i < 500; ++i) x.push_back(a(rng));
    for (int i = 0; i < 500; ++i) x.push_back(b(rng));
    std::shuffle(x.begin(), x.end(), rng);
    const GmmFit g = fit_loss_gmm(x);
    bool monotone = true;
    for (std::size_t i = 1; i < g.log_likelihood.size(); ++i) monotone = monotone && g.log_likelihood[i] >= g.log_likelihood[i - 1] - 1e-9;
    const double oc = clean_probability(g, g.mean_clean()), on = clean_probability(g, g.mean_noisy());
    const bool ok = std::abs(g.mean[0] - 0.05) <= 0.2 * 0.05 && std::abs(g.mean[1] - 2.0) <= 0.2 * 2.0 &&
                    std::abs(g.weight[0] - 0.5) <= 0.05 && std::abs(g.weight[1] - 0.5) <= 0.05 && monotone &&
                    oc >= 0.99 && on <= 0.01;
    return {ok, "means (" + fmt("%.4f", g.mean[0]) + ", " + fmt("%.4f", g.mean[1]) + "), weights (" +
                    fmt("%.3f", g.weight[0]) + ", " + fmt("%.3f", g.weight[1]) + "), o(clean) " + fmt("%.4f", oc) +
                    ", o(noisy) " + fmt("%.2e", on) + (monotone ? ", EM monotone" : ", EM NOT monotone")};
}

// ---- 4 ---------------------------------------------------------------------

Verdict partition_check() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u;
    std::size_t failures = 0;
    const int cases = 10000;
    for (int c = 0; c < cases; ++c) {
        ThresholdState s(0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng));
        const std::size_t n = 1 + c % 24;
        std::vector<SampleId> ids;
        ScoreMap cw, cs, o;
        for (std::size_t i = 0; i < n; ++i) {
            const SampleId id = static_cast<SampleId>(i * 7 + c % 5);
            ids.push_back(id);
            s.update(id, LearnerKind::weak, u(rng));
            s.update(id, LearnerKind::strong, u(rng));
            // Every fourth sample sits exactly on a threshold.
            cw[id] = i % 4 == 0 ? s.tau(id, LearnerKind::weak) : u(rng);
            cs[id] = i % 4 == 1 ? s.tau(id, LearnerKind::strong) : u(rng);
            o[id] = u(rng);
        }
        const double phi = u(rng);
        const auto p = partition(ids, cw, cs, s, o, phi);
        bool ok = check_partition(p).empty();
        auto shuffled = ids;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto q = partition(shuffled, cw, cs, s, o, phi);
        ok = ok && q.consistency == p.consistency && q.discrepancy == p.discrepancy && q.clean == p.clean &&
             q.hard == p.hard && q.purified == p.purified;
        // Brute-force classifier with strict threshold comparisons.
        for (SampleId id : ids) {
            const bool w = cw[id] > s.tau(id, LearnerKind::weak), st = cs[id] > s.tau(id, LearnerKind::strong);
            const bool cl = o[id] >= phi;
            auto in = [&](const std::vector<SampleId>& v) { return std::binary_search(v.begin(), v.end(), id); };
            ok = ok && in(p.consistency) == (w && st) && in(p.discrepancy) == (w != st) &&
                 in(p.clean) == (w && st && cl) && in(p.purified) == (w && st && !cl) && in(p.hard) == (w != st && cl);
        }
        failures += !ok;
    }
    // The 8-case truth table.
    ThresholdState s(1.0, 1.0);
    std::vector<SampleId> ids;
    ScoreMap cw, cs, o;
    std::size_t table_bad = 0;
    for (int m = 0; m < 8; ++m) {
        const SampleId id = static_cast<SampleId>(m);
        s.update(id, LearnerKind::weak, 0.5);
        s.update(id, LearnerKind::strong, 0.5);
        cw[id] = (m & 1) ? 0.9 : 0.1;
        cs[id] = (m & 2) ? 0.9 : 0.1;
        o[id] = (m & 4) ? 0.8 : 0.05;
        ids.push_back(id);
    }
    const auto p = partition(ids, cw, cs, s, o, 0.1);
    for (int m = 0; m < 8; ++m) {
        const bool w = m & 1, st = m & 2, cl = m & 4;
        auto in = [&](const std::vector<SampleId>& v) { return std::count(v.begin(), v.end(), m) == 1; };
        table_bad += !(in(p.clean) == (w && st && cl) && in(p.purified) == (w && st && !cl) &&
                       in(p.hard) == (w != st && cl) && in(p.discrepancy) == (w != st));
    }
    return {failures == 0 && table_bad == 0,
            std::to_string(cases) + " random cases, " + std::to_string(failures) + " violations; truth table " +
                std::to_string(8 - table_bad) + "/8"};
}

// ---- 5 ---------------------------------------------------------------------

bool confusion_within(const LabeledDataset& noisy, const std::vector<std::vector<double>>& expected, double* worst) {
    const auto counts = noise_confusion(noisy);
    bool ok = true;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        std::size_t row = 0;
        for (auto v : counts[i]) row += v;
        for (std::size_t j = 0; j < counts.size(); ++j) {
            const double got = static_cast<double>(counts[i][j]) / static_cast<double>(row);
            const double bound = std::max(three_sigma(expected[i][j], row), 1e-12);
            *worst = std::max(*worst, std::abs(got - expected[i][j]) / bound);
            ok = ok && std::abs(got - expected[i][j]) <= bound;
        }
    }
    return ok;
}

Verdict noise_check() {
    const std::size_t n = 10000, k = 4;
    const auto ds = synthetic::make_blobs({.samples = n, .classes = k, .dim = 8, .seed = 55});
    double worst = 0.0;
    std::vector<std::vector<double>> sym(k, std::vector<double>(k, 0.4 / 3.0));
    for (std::size_t i = 0; i < k; ++i) sym[i][i] = 0.6;
    const bool sym_ok = confusion_within(inject_symmetric(ds, 0.4, 1), sym, &worst);
    const auto cyc = cyclic_transition(k, 0.3);
    const bool asym_ok = confusion_within(inject_asymmetric(ds, 0.3, cyc, 2), cyc, &worst);

    const auto hard = synthetic::make_blobs({.samples = 2000, .classes = k, .dim = 8, .separation = 1.0, .seed = 56});
    const Learner scorer = train_default_scorer(hard, 3);
    const double eps = 0.15;
    const auto idn = inject_instance_dependent(hard, eps, scorer, 4);
    std::size_t flips = 0;
    bool idn_ok = true;
    for (std::size_t i = 0; i < hard.size(); ++i) {
        if (idn[i].label() == hard[i].label()) continue;
        ++flips;
        idn_ok = idn_ok && idn[i].label() == scorer.predict(hard[i]).argmax() &&
                 idn[i].label() != AuditAccess::true_label(idn[i]);
    }
    const auto target = static_cast<std::size_t>(std::ceil(eps * static_cast<double>(hard.size())));
    idn_ok = idn_ok && flips == target;
    return {sym_ok && asym_ok && idn_ok,
            "worst cell " + fmt("%.2f", worst) + " sigma/3; IDN flips " + std::to_string(flips) + " of target " +
                std::to_string(target) + (idn_ok ? ", all toward scorer argmax" : ", MISMATCH")};
}

// ---- 6 ---------------------------------------------------------------------

Verdict voting_check() {
    const std::size_t n = 2000;
    std::unordered_map<SampleId, int> truth;
    for (std::size_t i = 0; i < n; ++i) truth[static_cast<SampleId>(i)] = static_cast<int>(i % 2);
    SimulatedOracle oracle(truth, 2, 0.8, 6);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = static_cast<SampleId>(i);
        ok += query_with_voting(oracle, {id, "", {"negative", "positive"}, 5, 0}).label == truth[id];
    }
    const double acc = static_cast<double>(ok) / n;
    return {std::abs(acc - 0.942) <= 0.02, "voted accuracy " + fmt("%.4f", acc) + " (closed form 0.94208)"};
}

// ---- 7, 8, 9, 11: reference benchmark --------------------------------------

struct SeedRuns {
    std::uint64_t seed;
    RunReport full;
    BaselineReport baseline;
    RunReport identity;
    std::string rerun_json;
};

ExperimentConfig reference_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.noise = {NoiseKind::symmetric, 0.4, std::nullopt, seed};
    cfg.oracle = {OracleKind::simulated, 0.9};
    return cfg;
}

DatasetSplit reference_splits(std::uint64_t seed) {
    return split_dataset(synthetic::make_blobs({.samples = 2000, .classes = 4, .dim = 64, .seed = seed}),
                         {0.8, 0.1, 0.1}, seed);
}

std::vector<SeedRuns> g_runs;
double g_seconds_full_and_baseline = 0.0;

void ensure_benchmark_runs() {
    if (!g_runs.empty()) return;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = reference_splits(seed);
        const auto cfg = reference_config(seed);
        SeedRuns r{seed, {}, {}, {}, {}};
        const auto t0 = std::chrono::steady_clock::now();
        r.full = run_noiseal(cfg, s.train, s.dev, s.test).report;
        r.baseline = run_baseline(cfg, s.train, s.dev, s.test);
        g_seconds_full_and_baseline += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        g_runs.push_back(std::move(r));
    }
}

Verdict denoising_check() {
    ensure_benchmark_runs();
    double full = 0.0, base = 0.0;
    std::string per_seed;
    for (const auto& r : g_runs) {
        full += r.full.best_dev_test_accuracy / 5.0;
        base += r.baseline.best_dev_test_accuracy / 5.0;
    }
    const double gain = 100.0 * (full - base);
    return {gain >= 5.0 && g_seconds_full_and_baseline < 300.0,
            "best-dev test accuracy NoiseAL " + fmt("%.4f", full) + " vs baseline " + fmt("%.4f", base) + ", gain " +
                fmt("%+.2f", gain) + " pt over 5 seeds (" + fmt("%.1f", g_seconds_full_and_baseline) + " s)"};
}

Verdict audit_check() {
    ensure_benchmark_runs();
    double min_r = 1.0, min_p = 1.0;
    bool ok = true;
    for (const auto& r : g_runs) {
        const auto& last = r.full.epochs.back();
        if (!last.audit_after_correction || !last.audit_after_correction->clean.ratio) {
            ok = false;
            continue;
        }
        min_r = std::min(min_r, *last.audit_after_correction->clean.ratio);
        // An empty P leaves nothing to correct and counts as vacuously correct.
        if (last.audit_after_correction->purified.ratio) min_p = std::min(min_p, *last.audit_after_correction->purified.ratio);
    }
    ok = ok && min_r >= 0.95 && min_p >= 0.90;
    return {ok, "final-epoch worst seed: R ratio " + fmt("%.4f", min_r) + ", corrected P ratio " + fmt("%.4f", min_p)};
}

Verdict determinism_check() {
    ensure_benchmark_runs();
    std::size_t identical = 0;
    for (auto& r : g_runs) {
        const auto s = reference_splits(r.seed);
        const auto again = run_noiseal(reference_config(r.seed), s.train, s.dev, s.test).report.to_json();
        identical += again == r.full.to_json();
    }
    return {identical == g_runs.size(), std::to_string(identical) + "/" + std::to_string(g_runs.size()) +
                                            " seeds produced byte-identical run reports"};
}

Verdict ablation_check() {
    ensure_benchmark_runs();
    const auto t0 = std::chrono::steady_clock::now();
    double full = 0.0, ident = 0.0;
    for (const auto& r : g_runs) {
        const auto s = reference_splits(r.seed);
        auto cfg = reference_config(r.seed);
        cfg.oracle.kind = OracleKind::identity;
        const auto rep = run_noiseal(cfg, s.train, s.dev, s.test).report;
        full += r.full.final_test_accuracy / 5.0;
        ident += rep.final_test_accuracy / 5.0;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ident < full && secs < 600.0, "mean final accuracy full " + fmt("%.4f", full) + " vs identity relabeling " +
                                              fmt("%.4f", ident) + " (" + fmt("%.1f", secs) + " s)"};
}

// ---- 10 --------------------------------------------------------------------

Verdict gradient_check() {
    std::mt19937_64 rng(10);
    std::size_t probes = 0, bad = 0;
    double worst = 0.0;
    auto probe = [&](Learner& l, const std::vector<double>& grad, const std::function<double()>& f) {
        std::uniform_int_distribution<std::size_t> pick(0, l.parameter_count() - 1);
        for (int i = 0; i < 15; ++i) {
            const std::size_t c = pick(rng);
            const double e = test::relative_error(grad[c], test::central_difference(l, c, f));
            worst = std::max(worst, e);
            bad += e >= 1e-4;
            ++probes;
        }
    };
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const std::size_t k = 2 + seed % 4, d = 3 + seed % 5;
        const auto ds = synthetic::make_blobs({.samples = 12, .classes = k, .dim = d, .separation = 1.5, .seed = seed});
        CoPredictionNetwork net(Learner::strong(d, 3 + seed % 6, k, seed), Learner::weak(d, k, seed + 50));
        std::vector<TrainItem> items;
        for (const auto& s : ds) items.push_back({s.features(), s.label()});
        const std::size_t n = 30;
        const auto lr = loss_clean(net, items, n);
        probe(net.strong, lr.grad_strong, [&] { return loss_clean(net, items, n, false).value; });
        probe(net.weak, lr.grad_weak, [&] { return loss_clean(net, items, n, false).value; });
        const auto lp = loss_purified(net, items, n, -4.0);
        probe(net.strong, lp.grad_strong, [&] { return loss_purified(net, items, n, -4.0, false).value; });
        probe(net.weak, lp.grad_weak, [&] { return loss_purified(net, items, n, -4.0, false).value; });
        const auto plan = plan_hard_mix(items.size(), 0.75, seed);
        const auto lh = loss_hard(net.strong, items, plan, n);
        probe(net.strong, lh.grad_strong, [&] { return loss_hard(net.strong, items, plan, n, false).value; });
    }
    return {bad == 0, std::to_string(probes) + " coordinates probed across L_R, L_P, L_H; worst relative error " +
                          fmt("%.2e", worst)};
}

struct Criterion {
    int number;
    const char* name;
    double limit_seconds;  // 0 = no separate limit
    std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "symmetry constant of reversed CE", 1.0, symmetry_constant_check},
        {2, "noise-tolerance decision agreement", 30.0, noise_tolerance_check},
        {3, "GMM recovery on a planted mixture", 1.0, gmm_check},
        {4, "partition algebra", 5.0, partition_check},
        {5, "noise injectors", 10.0, noise_check},
        {6, "majority voting accuracy", 5.0, voting_check},
        {7, "end-to-end denoising gain", 0.0, denoising_check},
        {8, "subset audit quality", 0.0, audit_check},
        {9, "determinism of the reference run", 0.0, determinism_check},
        {10, "gradient correctness", 10.0, gradient_check},
        {11, "ablation without relabeling", 0.0, ablation_check},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.number)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_seconds > 0.0 && secs >= c.limit_seconds) {
            v.pass = false;
            v.detail += "; exceeded " + fmt("%.0f", c.limit_seconds) + " s limit";
        }
        failed += !v.pass;
        std::printf("%s  criterion %2d  %-36s %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", c.number, c.name,
                    v.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
