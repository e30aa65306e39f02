#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "noiseal/error.hpp"
#include "noiseal/losses.hpp"
#include "noiseal/noise.hpp"
#include "noiseal/pipeline.hpp"
#include "noiseal/synthetic.hpp"

namespace noiseal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string ratio_cell(const json& stats) {
    if (stats.is_null() || stats["ratio"].is_null()) return "-";
    return fmt("%.4f", stats["ratio"].get<double>());
}

DatasetFormat format_or_extension(const std::string& format, const fs::path& path) {
    return format.empty() ? format_from_extension(path) : parse_format(format);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
    std::string kind = "blobs";
    synthetic::BlobSpec blobs;
    std::size_t extra_dims = 0;
    std::vector<double> split{0.8, 0.1, 0.1};
    std::string format = "jsonl";
    fs::path out_dir = "out";
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    LabeledDataset ds = [&] {
        if (a.kind == "blobs") return synthetic::make_blobs(a.blobs);
        if (a.kind == "separable2d") return synthetic::make_separable_2d(a.blobs.samples, a.blobs.seed);
        if (a.kind == "rings") return synthetic::make_rings(a.blobs.samples, a.blobs.seed, a.extra_dims);
        throw ConfigError("unknown generator '" + a.kind + "' (blobs, separable2d, rings)");
    }();
    if (a.split.size() != 3) throw ConfigError("--split needs three fractions");
    const DatasetFormat f = parse_format(a.format);
    const auto parts = split_dataset(ds, {a.split[0], a.split[1], a.split[2]}, a.blobs.seed);
    const std::string ext = "." + a.format;
    fs::create_directories(a.out_dir);
    std::vector<std::string> artifacts;
    const std::pair<const char*, const LabeledDataset*> named[] = {
        {"train", &parts.train}, {"dev", &parts.dev}, {"test", &parts.test}};
    json cfg;
    for (const auto& [name, part] : named) {
        const std::string file = std::string(name) + ext;
        save_dataset(*part, a.out_dir / file, f);
        artifacts.push_back(file);
        cfg[name] = file;
        out << name << ": " << part->size() << " samples -> " << (a.out_dir / file).string() << "\n";
    }
    // Starter config pointing at the generated splits; paths resolve against its directory.
    cfg["class_names"] = ds.class_names();
    cfg["noise"] = {{"kind", "symmetric"}, {"rate", 0.4}};
    cfg["oracle"] = {{"kind", "simulated"}, {"accuracy", 0.9}};
    cfg["seed"] = a.blobs.seed;
    write_text(a.out_dir / "config.json", cfg.dump(2) + "\n");
    artifacts.push_back("config.json");
    update_manifest(a.out_dir, "generate", artifacts);
    return kSuccess;
}

// ---- inject ---------------------------------------------------------------

struct InjectArgs {
    fs::path input;
    std::string format;
    std::size_t num_classes = 0;
    std::string kind = "symmetric";
    double rate = 0.0;
    std::uint64_t seed = 0;
    fs::path matrix;
    fs::path out_dir = "out";
    std::string output;
};

int cmd_inject(const InjectArgs& a, std::ostream& out, std::ostream& err) {
    if (!fs::is_regular_file(a.input)) throw ConfigError("--in: file not found: " + a.input.string());
    if (!a.matrix.empty() && !fs::is_regular_file(a.matrix)) {
        throw ConfigError("--matrix: file not found: " + a.matrix.string());
    }
    const DatasetFormat f = format_or_extension(a.format, a.input);
    const LabeledDataset ds = load_dataset(a.input, f, a.num_classes);
    NoiseSpec spec;
    spec.kind = parse_noise_kind(a.kind);
    spec.rate = a.rate;
    spec.seed = a.seed;
    if (!a.matrix.empty()) {
        try {
            spec.transition = read_json_file(a.matrix).get<TransitionMatrix>();
        } catch (const json::exception&) {
            throw ConfigError("--matrix must hold a JSON array of rows");
        }
    }
    if (spec.kind == NoiseKind::asymmetric && !spec.transition) {
        err << "note: no transition matrix given; using the cyclic default (k -> k+1 mod K)\n";
    }
    try {
        spec.validate(ds.num_classes());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const LabeledDataset noisy = inject(ds, spec);
    fs::create_directories(a.out_dir);
    const std::string name = a.output.empty() ? "noisy" + a.input.extension().string() : a.output;
    save_dataset(noisy, a.out_dir / name, f);
    update_manifest(a.out_dir, "inject", {name});
    out << "kind: " << to_string(spec.kind) << "\n"
        << "requested rate: " << fmt("%.4f", spec.rate) << "\n"
        << "realized rate: " << fmt("%.4f", realized_noise_rate(noisy)) << "\n"
        << "wrote " << (a.out_dir / name).string() << "\n";
    return kSuccess;
}

// ---- run / baseline -------------------------------------------------------

struct RunArgs {
    fs::path config;
    std::optional<std::uint64_t> seed;
    std::string oracle;
    std::string out_dir;
    bool traces = false;
};

CliConfig load_for_run(const RunArgs& a) {
    ConfigOverrides o;
    o.seed = a.seed;
    if (!a.oracle.empty()) o.oracle = a.oracle;
    if (!a.out_dir.empty()) o.out_dir = fs::path(a.out_dir);
    if (a.traces) o.traces = true;
    return load_cli_config(a.config, o);
}

int cmd_run(const RunArgs& a, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const CliConfig cfg = load_for_run(a);
    const auto splits = load_splits(cfg);
    const RunResult result = run_noiseal(cfg.experiment, splits.train, splits.dev, splits.test, nullptr, cfg.traces);

    std::vector<std::string> artifacts{"run_report.json", "checkpoints/strong.json", "checkpoints/weak.json"};
    write_text(cfg.out_dir / "run_report.json", result.report.to_json());
    fs::create_directories(cfg.out_dir / "checkpoints");
    result.network.strong.save_checkpoint(cfg.out_dir / "checkpoints/strong.json");
    result.network.weak.save_checkpoint(cfg.out_dir / "checkpoints/weak.json");
    if (cfg.traces) {
        write_text(cfg.out_dir / "traces.csv", traces_to_csv(result.traces));
        artifacts.push_back("traces.csv");
    }
    update_manifest(cfg.out_dir, "run", artifacts);

    const RunReport& r = result.report;
    out << "final test accuracy: " << fmt("%.4f", r.final_test_accuracy) << "\n"
        << "best-dev test accuracy: " << fmt("%.4f", r.best_dev_test_accuracy) << " (epoch " << r.best_dev_epoch << ")\n"
        << "oracle calls: " << r.oracle_calls << "\n"
        << "wall time: " << fmt("%.2f", seconds_since(t0)) << " s\n";
    return kSuccess;
}

int cmd_baseline(const RunArgs& a, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const CliConfig cfg = load_for_run(a);
    const auto splits = load_splits(cfg);
    const BaselineReport r = run_baseline(cfg.experiment, splits.train, splits.dev, splits.test);
    write_text(cfg.out_dir / "baseline_report.json", r.to_json());
    update_manifest(cfg.out_dir, "baseline", {"baseline_report.json"});
    out << "final test accuracy: " << fmt("%.4f", r.final_test_accuracy) << "\n"
        << "best-dev test accuracy: " << fmt("%.4f", r.best_dev_test_accuracy) << " (epoch " << r.best_dev_epoch << ")\n"
        << "wall time: " << fmt("%.2f", seconds_since(t0)) << " s\n";
    return kSuccess;
}

// ---- audit ----------------------------------------------------------------

struct AuditArgs {
    fs::path report;
    std::string out_dir;
};

int cmd_audit(const AuditArgs& a, std::ostream& out) {
    const json report = read_json_file(a.report);
    if (!report.contains("epochs") || !report["epochs"].is_array()) {
        throw ConfigError(a.report.string() + " is not a run report");
    }
    if (!report.value("audited", false)) {
        throw Error("run was not audited: the training set carries no true labels");
    }
    json audit = json::array();
    out << "epoch  subset  size    ratio(before)  ratio(after)\n";
    for (const auto& e : report["epochs"]) {
        if (e["audit_before_correction"].is_null()) continue;
        const json& before = e["audit_before_correction"];
        const json& after = e["audit_after_correction"];
        for (const char* subset : {"C", "I", "R", "H", "P"}) {
            char line[128];
            std::snprintf(line, sizeof line, "%5d  %-6s  %6zu  %13s  %12s\n", e["epoch"].get<int>(), subset,
                          before[subset]["size"].get<std::size_t>(), ratio_cell(before[subset]).c_str(),
                          ratio_cell(after[subset]).c_str());
            out << line;
        }
        audit.push_back({{"epoch", e["epoch"]}, {"before", before}, {"after", after}});
    }
    if (!a.out_dir.empty()) {
        write_text(fs::path(a.out_dir) / "audit.json", audit.dump(2) + "\n");
        update_manifest(a.out_dir, "audit", {"audit.json"});
    }
    return kSuccess;
}

// ---- verify-loss ----------------------------------------------------------

struct VerifyArgs {
    std::vector<std::size_t> k{6};
    double a = -4.0;
    std::size_t trials = 10000;
    std::uint64_t seed = 0;
    std::string family = "both";
    std::string out_dir;
};

int cmd_verify_loss(const VerifyArgs& v, std::ostream& out) {
    std::vector<LossFamily> families;
    if (v.family == "both" || v.family == "reversed_ce") families.push_back(LossFamily::reversed_ce);
    if (v.family == "both" || v.family == "standard_ce") families.push_back(LossFamily::standard_ce);
    if (families.empty()) throw ConfigError("--family must be reversed_ce, standard_ce or both");
    if (!(v.a < 0.0)) throw ConfigError("--a must be negative");
    json all = json::array();
    bool ok = true;
    for (std::size_t k : v.k) {
        for (LossFamily f : families) {
            const SymmetryReport r = verify_symmetry(f, k, v.a, v.trials, v.seed);
            all.push_back(json::parse(r.to_json()));
            if (f == LossFamily::reversed_ce) {
                ok = ok && r.constant();
                out << "reversed_ce K=" << k << " A=" << fmt("%g", v.a) << ": sum over labels = "
                    << fmt("%.10g", r.mean_sum) << ", expected " << fmt("%g", r.expected_constant)
                    << ", max deviation " << fmt("%.3g", r.max_deviation) << (r.constant() ? " [constant]" : " [NOT constant]")
                    << "\n";
            } else {
                out << "standard_ce K=" << k << ": mean sum " << fmt("%.6g", r.mean_sum) << ", variance across trials "
                    << fmt("%.6g", r.variance_of_sums) << "\n";
            }
        }
    }
    if (!v.out_dir.empty()) {
        write_text(fs::path(v.out_dir) / "verify_loss.json", all.dump(2) + "\n");
        update_manifest(v.out_dir, "verify-loss", {"verify_loss.json"});
    }
    return ok ? kSuccess : kRuntimeError;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
    fs::path run;
    fs::path baseline;
    std::string out_dir;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    const json run = read_json_file(a.run);
    if (!run.contains("epochs")) throw ConfigError(a.run.string() + " is not a run report");
    std::ostringstream md;
    md << "# Run report (seed " << run["seed"].get<std::uint64_t>() << ")\n\n";
    md << "| epoch | phase | |R| | |P| | |H| | R ratio | P ratio (corrected) | dev | test |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& e : run["epochs"]) {
        const bool warm = e["warmup"].get<bool>();
        const json& after = e["audit_after_correction"];
        md << "| " << e["epoch"].get<int>() << " | " << (warm ? "warmup" : "select") << " | ";
        if (warm) {
            md << "- | - | - | - | - | ";
        } else {
            md << e["sizes"]["R"].get<std::size_t>() << " | " << e["sizes"]["P"].get<std::size_t>() << " | "
               << e["sizes"]["H"].get<std::size_t>() << " | " << (after.is_null() ? "-" : ratio_cell(after["R"])) << " | "
               << (after.is_null() ? "-" : ratio_cell(after["P"])) << " | ";
        }
        md << fmt("%.4f", e["dev_accuracy"]["strong"].get<double>()) << " | "
           << fmt("%.4f", e["test_accuracy_strong"].get<double>()) << " |\n";
    }
    const double best = run["best_dev_test_accuracy"].get<double>();
    md << "\nBest-dev test accuracy: " << fmt("%.4f", best) << " (epoch " << run["best_dev_epoch"].get<int>() << ")\n";
    md << "Final test accuracy: " << fmt("%.4f", run["final_test_accuracy"].get<double>()) << "\n";
    md << "Oracle calls: " << run["oracle_calls"].get<std::size_t>() << "\n";
    if (!a.baseline.empty()) {
        const json base = read_json_file(a.baseline);
        if (!base.contains("best_dev_test_accuracy")) throw ConfigError(a.baseline.string() + " is not a baseline report");
        const double b = base["best_dev_test_accuracy"].get<double>();
        md << "Baseline best-dev test accuracy: " << fmt("%.4f", b) << "\n";
        md << "Gain: " << fmt("%+.2f", 100.0 * (best - b)) << " points\n";
    }
    out << md.str();
    if (!a.out_dir.empty()) {
        write_text(fs::path(a.out_dir) / "report.md", md.str());
        update_manifest(a.out_dir, "report", {"report.md"});
    }
    return kSuccess;
}

}  // namespace

void update_manifest(const fs::path& out_dir, const std::string& command, const std::vector<std::string>& artifacts) {
    const fs::path path = out_dir / "manifest.json";
    std::map<std::string, json> entries;
    if (fs::exists(path)) {
        const json old = read_json_file(path);
        if (old.contains("artifacts")) {
            for (const auto& e : old["artifacts"]) entries[e["path"].get<std::string>()] = e;
        }
    }
    for (const auto& rel : artifacts) {
        entries[rel] = {{"path", rel}, {"command", command}, {"bytes", fs::file_size(out_dir / rel)}};
    }
    json list = json::array();
    for (auto& [p, e] : entries) list.push_back(std::move(e));
    write_text(path, json{{"artifacts", list}}.dump(2) + "\n");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"noiseal: noisy-label training with sample selection and oracle relabeling", "noiseal"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic dataset split plus a starter config");
    g->add_option("--kind", gen.kind, "blobs | separable2d | rings")->capture_default_str();
    g->add_option("--samples", gen.blobs.samples)->capture_default_str();
    g->add_option("--classes", gen.blobs.classes, "blobs only")->capture_default_str();
    g->add_option("--dim", gen.blobs.dim, "blobs only")->capture_default_str();
    g->add_option("--separation", gen.blobs.separation, "blobs only")->capture_default_str();
    g->add_option("--spread", gen.blobs.spread, "blobs only")->capture_default_str();
    g->add_option("--extra-dims", gen.extra_dims, "rings only")->capture_default_str();
    g->add_option("--seed", gen.blobs.seed)->capture_default_str();
    g->add_option("--split", gen.split, "train,dev,test fractions")->delimiter(',')->expected(3);
    g->add_option("--format", gen.format, "jsonl | csv")->capture_default_str();
    g->add_option("--out-dir", gen.out_dir)->capture_default_str();

    InjectArgs inj;
    auto* i = app.add_subcommand("inject", "Apply synthetic label noise to a dataset");
    i->add_option("--in", inj.input, "input dataset")->required();
    i->add_option("--format", inj.format, "jsonl | csv (default: from extension)");
    i->add_option("--num-classes", inj.num_classes, "0 = infer");
    i->add_option("--kind", inj.kind, "symmetric | asymmetric | idn")->capture_default_str();
    i->add_option("--rate", inj.rate)->required();
    i->add_option("--seed", inj.seed)->capture_default_str();
    i->add_option("--matrix", inj.matrix, "JSON transition matrix (asymmetric)");
    i->add_option("--out-dir", inj.out_dir)->capture_default_str();
    i->add_option("--output", inj.output, "file name inside --out-dir");

    RunArgs runa, basea;
    auto add_run_options = [](CLI::App* c, RunArgs& r) {
        c->add_option("--config", r.config, "JSON config file")->required();
        c->add_option("--seed", r.seed, "overrides the config seed");
        c->add_option("--oracle", r.oracle, "simulated[:acc=X] | remote | none");
        c->add_option("--out-dir", r.out_dir, "overrides the config out_dir");
    };
    auto* r = app.add_subcommand("run", "Train with selection, relabeling and the combined loss");
    add_run_options(r, runa);
    r->add_flag("--traces", runa.traces, "also write per-sample traces.csv");
    auto* b = app.add_subcommand("baseline", "Train the strong learner alone with plain cross-entropy");
    add_run_options(b, basea);

    AuditArgs aud;
    auto* au = app.add_subcommand("audit", "Correct-label ratios of each subset from a run report");
    au->add_option("--report", aud.report, "run_report.json")->required();
    au->add_option("--out-dir", aud.out_dir);

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify-loss", "Check the symmetry constant of reversed cross-entropy");
    v->add_option("--k", ver.k, "class counts, comma separated")->delimiter(',');
    v->add_option("--a", ver.a, "log(0) constant A")->capture_default_str();
    v->add_option("--trials", ver.trials)->capture_default_str();
    v->add_option("--seed", ver.seed)->capture_default_str();
    v->add_option("--family", ver.family, "reversed_ce | standard_ce | both")->capture_default_str();
    v->add_option("--out-dir", ver.out_dir);

    ReportArgs rep;
    auto* rp = app.add_subcommand("report", "Summarize a run report as Markdown");
    rp->add_option("--run", rep.run, "run_report.json")->required();
    rp->add_option("--baseline", rep.baseline, "baseline_report.json");
    rp->add_option("--out-dir", rep.out_dir);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        if (g->parsed()) return cmd_generate(gen, out);
        if (i->parsed()) return cmd_inject(inj, out, err);
        if (r->parsed()) return cmd_run(runa, out);
        if (b->parsed()) return cmd_baseline(basea, out);
        if (au->parsed()) return cmd_audit(aud, out);
        if (v->parsed()) return cmd_verify_loss(ver, out);
        if (rp->parsed()) return cmd_report(rep, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace noiseal::cli
