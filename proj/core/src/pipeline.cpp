#include "noiseal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include <nlohmann/json.hpp>

#include "noiseal/error.hpp"
#include "noiseal/losses.hpp"
#include "noiseal/rng.hpp"

namespace noiseal {

using nlohmann::json;

std::string to_string(OracleKind kind) {
    switch (kind) {
        case OracleKind::simulated: return "simulated";
        case OracleKind::remote: return "remote";
        case OracleKind::identity: return "identity";
    }
    return "unknown";
}

OracleKind parse_oracle_kind(const std::string& name) {
    if (name == "simulated") return OracleKind::simulated;
    if (name == "remote") return OracleKind::remote;
    if (name == "identity" || name == "none") return OracleKind::identity;
    throw ConfigError("unknown oracle kind '" + name + "'");
}

std::vector<std::string> ExperimentConfig::violations() const {
    std::vector<std::string> v;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) v.push_back(msg);
    };
    need(epochs >= 1, "epochs must be >= 1");
    need(warmup_epochs >= 0, "warmup_epochs must be >= 0");
    need(warmup_epochs < epochs, "warmup_epochs must be smaller than epochs");
    need(steps_per_epoch >= 1, "steps_per_epoch must be >= 1");
    need(hidden_width >= 1, "hidden_width must be >= 1");
    need(lambda_strong > 0.0 && lambda_strong < 1.0, "lambda_strong must lie in (0,1)");
    need(lambda_weak > 0.0 && lambda_weak < 1.0, "lambda_weak must lie in (0,1)");
    need(phi > 0.0 && phi < 1.0, "phi must lie in (0,1)");
    need(demonstrations >= 1, "demonstrations must be >= 1");
    need(vote_runs >= 1, "vote_runs must be >= 1");
    need(log_zero < 0.0, "log_zero (A) must be negative");
    need(alpha > 0.0, "alpha must be positive");
    need(lr_strong > 0.0, "lr_strong must be positive");
    need(lr_weak > 0.0, "lr_weak must be positive");
    need(noise.rate >= 0.0 && noise.rate < 1.0, "noise.rate must lie in [0,1)");
    need(oracle.accuracy >= 0.0 && oracle.accuracy <= 1.0, "oracle.accuracy must lie in [0,1]");
    return v;
}

void ExperimentConfig::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid experiment config:";
    for (const auto& m : v) msg += "\n  - " + m;
    throw ConfigError(msg);
}

namespace {

SubsetStats stats_for(const std::vector<SampleId>& ids, const LabeledDataset& ds, std::span<const int> labels) {
    SubsetStats s;
    s.size = ids.size();
    for (SampleId id : ids) {
        const auto truth = AuditAccess::true_label(ds.at(id));
        s.correct += labels[static_cast<std::size_t>(id)] == *truth;
    }
    if (s.size) s.ratio = static_cast<double>(s.correct) / static_cast<double>(s.size);
    return s;
}

}  // namespace

SubsetAudit subset_audit(const PartitionResult& part, const LabeledDataset& ds, std::span<const int> labels) {
    if (!AuditAccess::has_true_labels(ds)) throw Error("subset audit requires true labels on every sample");
    if (labels.size() != ds.size()) throw Error("audit label buffer does not match the dataset size");
    return SubsetAudit{stats_for(part.consistency, ds, labels), stats_for(part.discrepancy, ds, labels),
                       stats_for(part.clean, ds, labels), stats_for(part.hard, ds, labels),
                       stats_for(part.purified, ds, labels)};
}

SubsetAudit subset_audit(const PartitionResult& part, const LabeledDataset& ds) {
    const auto labels = ds.labels();
    return subset_audit(part, ds, labels);
}

CoPredictionNetwork make_network(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t num_classes) {
    return CoPredictionNetwork(
        Learner::strong(input_dim, cfg.hidden_width, num_classes, derive_seed(cfg.seed, "learner/strong")),
        Learner::weak(input_dim, num_classes, derive_seed(cfg.seed, "learner/weak")));
}

namespace {

std::vector<TrainExample> ce_batch(const LabeledDataset& ds, std::span<const int> labels) {
    std::vector<TrainExample> batch;
    batch.reserve(ds.size());
    const double w = 1.0 / static_cast<double>(ds.size());
    for (const auto& s : ds) {
        batch.push_back({s.features(), ProbabilityVector::one_hot(ds.num_classes(),
                                                                  labels[static_cast<std::size_t>(s.id())]), w});
    }
    return batch;
}

}  // namespace

void warmup(CoPredictionNetwork& net, const LabeledDataset& ds, int warmup_epochs, int steps_per_epoch,
            double lr_strong, double lr_weak) {
    if (warmup_epochs < 0) throw Error("warmup_epochs must be non-negative");
    if (warmup_epochs == 0 || ds.empty()) return;
    const auto labels = ds.labels();
    const auto batch = ce_batch(ds, labels);
    for (int e = 0; e < warmup_epochs; ++e) {
        for (int step = 0; step < steps_per_epoch; ++step) {
            train_step(net.strong, batch, lr_strong);
            train_step(net.weak, batch, lr_weak);
        }
    }
}

double evaluate(const Learner& learner, const LabeledDataset& ds) {
    if (ds.empty()) throw Error("cannot evaluate on an empty dataset");
    std::size_t correct = 0;
    for (const auto& s : ds) correct += learner.predict(s).argmax() == s.label();
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

LabeledDataset prepare_training_set(const ExperimentConfig& cfg, const LabeledDataset& train) {
    if (cfg.noise.rate <= 0.0) return train;
    NoiseSpec spec = cfg.noise;
    spec.seed = derive_seed(cfg.seed, "noise", {cfg.noise.seed});
    return inject(train, spec);
}

namespace {

// Stage guard: rethrows any library error tagged with epoch and stage.
template <typename F>
auto staged(int epoch, const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw Error("epoch " + std::to_string(epoch) + ", stage " + stage + ": " + e.what());
    }
}

int pick_best_dev(const std::vector<double>& dev) {
    int best = 0;
    for (std::size_t i = 1; i < dev.size(); ++i) {
        if (dev[i] > dev[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed, int step) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (batch_size == 0 || batch_size >= n) return idx;
    Rng rng = make_rng(seed, "pipeline/batch", {static_cast<std::uint64_t>(step)});
    for (std::size_t i = 0; i < batch_size; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    idx.resize(batch_size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

RunResult run_noiseal(const ExperimentConfig& cfg, const LabeledDataset& train_in, const LabeledDataset& dev,
                      const LabeledDataset& test, Oracle* oracle, bool collect_traces) {
    cfg.validate();
    if (train_in.size() < 10) throw ConfigError("training set needs at least 10 samples");
    if (dev.empty() || test.empty()) throw ConfigError("dev and test sets must be non-empty");

    const LabeledDataset train = staged(0, "noise", [&] { return prepare_training_set(cfg, train_in); });
    const std::size_t N = train.size();
    const std::size_t K = train.num_classes();
    const bool audited = AuditAccess::has_true_labels(train);

    std::unique_ptr<Oracle> owned_oracle;
    if (!oracle && cfg.oracle.kind != OracleKind::identity) {
        if (cfg.oracle.kind == OracleKind::simulated) {
            owned_oracle = std::make_unique<SimulatedOracle>(train, cfg.oracle.accuracy, derive_seed(cfg.seed, "oracle"));
        } else {
            owned_oracle = std::make_unique<RemoteOracle>(RemoteOracle::from_environment());
        }
        oracle = owned_oracle.get();
    }
    std::optional<Annotator> annotator;
    if (oracle) {
        AnnotatorConfig acfg;
        acfg.demonstrations = cfg.demonstrations;
        acfg.vote_runs = cfg.vote_runs;
        acfg.task_description = cfg.task_description;
        acfg.label_noun = cfg.label_noun;
        acfg.chain_of_thought = cfg.chain_of_thought;
        acfg.seed = derive_seed(cfg.seed, "annotator");
        annotator.emplace(*oracle, acfg);
    }

    RunResult result{RunReport{}, {}, make_network(cfg, train.feature_dim(), K)};
    CoPredictionNetwork& net = result.network;
    RunReport& report = result.report;
    report.config = cfg;
    report.audited = audited;

    std::vector<int> labels = train.labels();
    ThresholdState thresholds(cfg.lambda_strong, cfg.lambda_weak);
    std::vector<SampleId> ids(N);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<double> dev_history;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochReport er;
        er.epoch = epoch;
        er.warmup = epoch <= cfg.warmup_epochs;

        // (1) confidences on observed labels, max confidences, strong CE.
        ScoreMap conf_s, conf_w, clean_prob;
        std::vector<double> losses(N), max_s(N), max_w(N);
        staged(epoch, "confidence", [&] {
            for (std::size_t i = 0; i < N; ++i) {
                const auto& x = train[i].features();
                const auto ps = net.strong.predict(x);
                const auto pw = net.weak.predict(x);
                const auto y = static_cast<std::size_t>(labels[i]);
                conf_s[ids[i]] = ps[y];
                conf_w[ids[i]] = pw[y];
                max_s[i] = ps.max();
                max_w[i] = pw.max();
                losses[i] = std::max(0.0, -std::log(std::max(ps[y], kProbabilityFloor)));
            }
        });
        // (2) dynamic thresholds.
        staged(epoch, "threshold", [&] {
            for (std::size_t i = 0; i < N; ++i) {
                thresholds.update(ids[i], LearnerKind::strong, max_s[i]);
                thresholds.update(ids[i], LearnerKind::weak, max_w[i]);
            }
        });

        PartitionResult part;
        if (!er.warmup) {
            // (3) loss mixture and clean probabilities.
            const GmmFit gmm = staged(epoch, "gmm", [&] { return fit_loss_gmm(losses); });
            er.gmm_mean_clean = gmm.mean_clean();
            er.gmm_mean_noisy = gmm.mean_noisy();
            for (std::size_t i = 0; i < N; ++i) clean_prob[ids[i]] = clean_probability(gmm, losses[i]);
            // (4) partition.
            part = staged(epoch, "partition",
                          [&] { return partition(ids, conf_w, conf_s, thresholds, clean_prob, cfg.phi); });
            er.size_c = part.consistency.size();
            er.size_i = part.discrepancy.size();
            er.size_r = part.clean.size();
            er.size_h = part.hard.size();
            er.size_p = part.purified.size();
            if (audited) er.audit_before_correction = subset_audit(part, train, labels);
            // (5) purified-set relabeling.
            if (annotator && !part.purified.empty()) {
                if (part.clean.size() < cfg.demonstrations) {
                    er.correction_skipped = true;
                } else {
                    const auto records = staged(epoch, "annotate", [&] {
                        return annotator->correct_purified(train, part.purified, part.clean, labels);
                    });
                    for (const auto& r : records) er.corrections += r.old_label != r.new_label;
                }
            }
            if (audited) er.audit_after_correction = subset_audit(part, train, labels);
        }

        if (collect_traces) {
            std::vector<char> tag(N, er.warmup ? 'W' : '-');
            if (!er.warmup) {
                for (SampleId id : part.discrepancy) tag[static_cast<std::size_t>(id)] = 'I';
                for (SampleId id : part.hard) tag[static_cast<std::size_t>(id)] = 'H';
                for (SampleId id : part.clean) tag[static_cast<std::size_t>(id)] = 'R';
                for (SampleId id : part.purified) tag[static_cast<std::size_t>(id)] = 'P';
            }
            for (std::size_t i = 0; i < N; ++i) {
                std::optional<double> o;
                if (!er.warmup) o = clean_prob[ids[i]];
                result.traces.push_back({epoch, ids[i], losses[i], conf_s[ids[i]], conf_w[ids[i]],
                                         thresholds.tau(ids[i], LearnerKind::strong),
                                         thresholds.tau(ids[i], LearnerKind::weak), o, tag[i], labels[i],
                                         AuditAccess::true_label(train[i])});
            }
        }

        // (6) training pass.
        staged(epoch, "train", [&] {
            if (er.warmup) {
                const auto batch = ce_batch(train, labels);
                for (int step = 0; step < cfg.steps_per_epoch; ++step) {
                    const double ls = train_step(net.strong, batch, cfg.lr_strong);
                    const double lw = train_step(net.weak, batch, cfg.lr_weak);
                    if (step == 0) er.losses = {ls + lw, 0.0, 0.0, ls + lw};
                }
                return;
            }
            std::vector<char> member(N, 0);  // 1 = R, 2 = P, 3 = H
            for (SampleId id : part.clean) member[static_cast<std::size_t>(id)] = 1;
            for (SampleId id : part.purified) member[static_cast<std::size_t>(id)] = 2;
            for (SampleId id : part.hard) member[static_cast<std::size_t>(id)] = 3;
            for (int step = 0; step < cfg.steps_per_epoch; ++step) {
                const auto batch = batch_indices(N, cfg.batch_size, derive_seed(cfg.seed, "epoch", {static_cast<std::uint64_t>(epoch)}), step);
                std::vector<TrainItem> r_items, p_items, h_items;
                for (std::size_t i : batch) {
                    const TrainItem item{train[i].features(), labels[i]};
                    if (member[i] == 1) r_items.push_back(item);
                    else if (member[i] == 2) p_items.push_back(item);
                    else if (member[i] == 3) h_items.push_back(item);
                }
                const std::size_t n_eff = batch.size();
                const auto lr = loss_clean(net, r_items, n_eff);
                const auto lp = loss_purified(net, p_items, n_eff, cfg.log_zero);
                const auto lh = loss_hard(net.strong, h_items, cfg.alpha, n_eff,
                                          derive_seed(cfg.seed, "embmix",
                                                      {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step)}));
                if (step == 0) er.losses = {lr.value, lp.value, lh.value, total_loss(lr.value, lp.value, lh.value)};
                const auto gs = add_gradients(net.strong.parameter_count(), {&lr.grad_strong, &lp.grad_strong, &lh.grad_strong});
                const auto gw = add_gradients(net.weak.parameter_count(), {&lr.grad_weak, &lp.grad_weak});
                net.strong.apply_gradient(gs, cfg.lr_strong);
                net.weak.apply_gradient(gw, cfg.lr_weak);
            }
        });

        // (7) evaluation and report.
        staged(epoch, "evaluate", [&] {
            er.dev_accuracy_strong = evaluate(net.strong, dev);
            er.dev_accuracy_weak = evaluate(net.weak, dev);
            er.test_accuracy_strong = evaluate(net.strong, test);
        });
        er.oracle_calls = annotator ? annotator->oracle_calls() : 0;
        dev_history.push_back(er.dev_accuracy_strong);
        report.epochs.push_back(std::move(er));
    }

    report.final_test_accuracy = report.epochs.back().test_accuracy_strong;
    const int best = pick_best_dev(dev_history);
    report.best_dev_epoch = best + 1;
    report.best_dev_test_accuracy = report.epochs[static_cast<std::size_t>(best)].test_accuracy_strong;
    report.oracle_calls = annotator ? annotator->oracle_calls() : 0;
    return result;
}

BaselineReport run_baseline(const ExperimentConfig& cfg, const LabeledDataset& train_in, const LabeledDataset& dev,
                            const LabeledDataset& test) {
    cfg.validate();
    if (dev.empty() || test.empty()) throw ConfigError("dev and test sets must be non-empty");
    const LabeledDataset train = prepare_training_set(cfg, train_in);
    // Same initialization as the pipeline's strong learner.
    Learner strong = make_network(cfg, train.feature_dim(), train.num_classes()).strong;
    const auto labels = train.labels();
    const auto batch = ce_batch(train, labels);
    BaselineReport report;
    report.config = cfg;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        staged(epoch, "baseline-train", [&] {
            for (int step = 0; step < cfg.steps_per_epoch; ++step) train_step(strong, batch, cfg.lr_strong);
        });
        report.dev_accuracy.push_back(evaluate(strong, dev));
        report.test_accuracy.push_back(evaluate(strong, test));
    }
    report.final_test_accuracy = report.test_accuracy.back();
    const int best = pick_best_dev(report.dev_accuracy);
    report.best_dev_epoch = best + 1;
    report.best_dev_test_accuracy = report.test_accuracy[static_cast<std::size_t>(best)];
    return report;
}

namespace {

json stats_json(const SubsetStats& s) {
    return json{{"size", s.size}, {"correct", s.correct}, {"ratio", s.ratio ? json(*s.ratio) : json(nullptr)}};
}

json audit_json(const SubsetAudit& a) {
    return json{{"C", stats_json(a.consistency)}, {"I", stats_json(a.discrepancy)}, {"R", stats_json(a.clean)},
                {"H", stats_json(a.hard)}, {"P", stats_json(a.purified)}};
}

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    json noise{{"kind", to_string(cfg.noise.kind)}, {"rate", cfg.noise.rate}, {"seed", cfg.noise.seed}};
    noise["transition"] = cfg.noise.transition ? json(*cfg.noise.transition) : json(nullptr);
    json j{{"epochs", cfg.epochs},
           {"warmup_epochs", cfg.warmup_epochs},
           {"steps_per_epoch", cfg.steps_per_epoch},
           {"batch_size", cfg.batch_size},
           {"hidden_width", cfg.hidden_width},
           {"lambda_strong", cfg.lambda_strong},
           {"lambda_weak", cfg.lambda_weak},
           {"phi", cfg.phi},
           {"demonstrations", cfg.demonstrations},
           {"vote_runs", cfg.vote_runs},
           {"log_zero", cfg.log_zero},
           {"alpha", cfg.alpha},
           {"lr_strong", cfg.lr_strong},
           {"lr_weak", cfg.lr_weak},
           {"noise", noise},
           {"oracle", {{"kind", to_string(cfg.oracle.kind)}, {"accuracy", cfg.oracle.accuracy}}},
           {"task_description", cfg.task_description},
           {"label_noun", cfg.label_noun},
           {"chain_of_thought", cfg.chain_of_thought},
           {"seed", cfg.seed}};
    return j.dump();
}

std::string RunReport::to_json() const {
    json j;
    j["config"] = json::parse(config_to_json(config));
    j["seed"] = config.seed;
    j["audited"] = audited;
    json epochs_json = json::array();
    for (const auto& e : epochs) {
        json ej{{"epoch", e.epoch},
                {"warmup", e.warmup},
                {"sizes", {{"C", e.size_c}, {"I", e.size_i}, {"R", e.size_r}, {"H", e.size_h}, {"P", e.size_p}}},
                {"gmm_mean_clean", opt(e.gmm_mean_clean)},
                {"gmm_mean_noisy", opt(e.gmm_mean_noisy)},
                {"losses", {{"L_R", e.losses.clean}, {"L_P", e.losses.purified}, {"L_H", e.losses.hard}, {"L", e.losses.total}}},
                {"dev_accuracy", {{"strong", e.dev_accuracy_strong}, {"weak", e.dev_accuracy_weak}}},
                {"test_accuracy_strong", e.test_accuracy_strong},
                {"oracle_calls", e.oracle_calls},
                {"corrections", e.corrections},
                {"correction_skipped", e.correction_skipped}};
        ej["audit_before_correction"] = e.audit_before_correction ? audit_json(*e.audit_before_correction) : json(nullptr);
        ej["audit_after_correction"] = e.audit_after_correction ? audit_json(*e.audit_after_correction) : json(nullptr);
        epochs_json.push_back(std::move(ej));
    }
    j["epochs"] = std::move(epochs_json);
    j["final_test_accuracy"] = final_test_accuracy;
    j["best_dev_epoch"] = best_dev_epoch;
    j["best_dev_test_accuracy"] = best_dev_test_accuracy;
    j["oracle_calls"] = oracle_calls;
    return j.dump(2) + "\n";
}

std::string BaselineReport::to_json() const {
    json j;
    j["config"] = json::parse(config_to_json(config));
    j["seed"] = config.seed;
    j["dev_accuracy"] = dev_accuracy;
    j["test_accuracy"] = test_accuracy;
    j["final_test_accuracy"] = final_test_accuracy;
    j["best_dev_epoch"] = best_dev_epoch;
    j["best_dev_test_accuracy"] = best_dev_test_accuracy;
    return j.dump(2) + "\n";
}

std::string traces_to_csv(const std::vector<SampleTrace>& traces) {
    std::string out = "epoch,id,strong_loss,conf_strong,conf_weak,tau_strong,tau_weak,clean_probability,subset,observed_label,true_label\n";
    char buf[256];
    for (const auto& t : traces) {
        std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,", t.epoch, static_cast<long long>(t.id),
                      t.strong_loss, t.conf_strong, t.conf_weak, t.tau_strong, t.tau_weak);
        out += buf;
        if (t.clean_probability) {
            std::snprintf(buf, sizeof buf, "%.17g", *t.clean_probability);
            out += buf;
        }
        out += ',';
        out.push_back(t.subset);
        out += ',' + std::to_string(t.observed_label) + ',';
        if (t.true_label) out += std::to_string(*t.true_label);
        out += '\n';
    }
    return out;
}

}  // namespace noiseal
