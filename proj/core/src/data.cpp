#include "noiseal/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "noiseal/error.hpp"
#include "noiseal/rng.hpp"

namespace noiseal {

using nlohmann::json;

Sample::Sample(SampleId id, std::vector<double> features, int label, std::optional<int> true_label,
               std::optional<std::string> text)
    : id_(id),
      features_(std::move(features)),
      label_(label),
      true_label_(true_label),
      text_(std::move(text)) {}

Sample Sample::with_noisy_label(int new_label) const {
    Sample out = *this;
    if (!out.true_label_) out.true_label_ = label_;  // keep the original truth across repeated injection
    out.label_ = new_label;
    return out;
}

Sample Sample::with_id(SampleId id) const {
    Sample out = *this;
    out.id_ = id;
    return out;
}

namespace {

std::vector<std::string> default_class_names(std::size_t k) {
    std::vector<std::string> names;
    names.reserve(k);
    for (std::size_t i = 0; i < k; ++i) names.push_back("class_" + std::to_string(i));
    return names;
}

}  // namespace

LabeledDataset::LabeledDataset(std::vector<Sample> samples, std::size_t num_classes,
                               std::size_t feature_dim, std::vector<std::string> class_names)
    : samples_(std::move(samples)),
      num_classes_(num_classes),
      feature_dim_(feature_dim),
      class_names_(std::move(class_names)) {
    if (num_classes_ == 0) throw Error("dataset must declare at least one class");
    if (feature_dim_ == 0) throw Error("dataset must declare a positive feature dimension");
    if (class_names_.empty()) class_names_ = default_class_names(num_classes_);
    if (class_names_.size() != num_classes_) {
        throw Error("expected " + std::to_string(num_classes_) + " class names, got " +
                    std::to_string(class_names_.size()));
    }
    const auto k = static_cast<int>(num_classes_);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const Sample& s = samples_[i];
        const std::string who = "sample " + std::to_string(s.id());
        if (s.id() != static_cast<SampleId>(i)) {
            throw Error(who + ": ids must be dense and ordered, expected " + std::to_string(i));
        }
        if (s.label() < 0 || s.label() >= k) {
            throw Error(who + ": label " + std::to_string(s.label()) + " out of range for " +
                        std::to_string(num_classes_) + " classes");
        }
        auto truth = AuditAccess::true_label(s);
        if (truth && (*truth < 0 || *truth >= k)) {
            throw Error(who + ": true_label " + std::to_string(*truth) + " out of range for " +
                        std::to_string(num_classes_) + " classes");
        }
        if (s.features().size() != feature_dim_) {
            throw Error(who + ": feature dimension " + std::to_string(s.features().size()) +
                        " != " + std::to_string(feature_dim_));
        }
    }
}

LabeledDataset LabeledDataset::renumbered(std::vector<Sample> samples, std::size_t num_classes,
                                          std::size_t feature_dim,
                                          std::vector<std::string> class_names) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = samples[i].with_id(static_cast<SampleId>(i));
    }
    return LabeledDataset(std::move(samples), num_classes, feature_dim, std::move(class_names));
}

const Sample& LabeledDataset::at(SampleId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= samples_.size()) {
        throw Error("unknown sample id " + std::to_string(id));
    }
    return samples_[static_cast<std::size_t>(id)];
}

std::vector<int> LabeledDataset::labels() const {
    std::vector<int> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.label());
    return out;
}

bool AuditAccess::has_true_labels(const LabeledDataset& ds) noexcept {
    return std::all_of(ds.begin(), ds.end(),
                       [](const Sample& s) { return s.true_label_.has_value(); });
}

ProbabilityVector::ProbabilityVector(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw Error("probability vector must be non-empty");
    double sum = 0.0;
    for (double p : entries_) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error("probability entry " + std::to_string(p) + " outside [0,1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error("probability entries sum to " + std::to_string(sum) + ", expected 1");
    }
}

ProbabilityVector ProbabilityVector::one_hot(std::size_t num_classes, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
        throw Error("one-hot label " + std::to_string(label) + " out of range");
    }
    std::vector<double> e(num_classes, 0.0);
    e[static_cast<std::size_t>(label)] = 1.0;
    return ProbabilityVector(std::move(e));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t num_classes) {
    return ProbabilityVector(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

double ProbabilityVector::max() const {
    return *std::max_element(entries_.begin(), entries_.end());
}

int ProbabilityVector::argmax() const {
    // max_element returns the first maximal element.
    return static_cast<int>(std::max_element(entries_.begin(), entries_.end()) - entries_.begin());
}

DatasetFormat parse_format(const std::string& name) {
    if (name == "jsonl") return DatasetFormat::jsonl;
    if (name == "csv") return DatasetFormat::csv;
    throw ConfigError("unknown dataset format '" + name + "' (expected jsonl or csv)");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".csv") return DatasetFormat::csv;
    if (ext == ".jsonl" || ext == ".json") return DatasetFormat::jsonl;
    throw ConfigError("cannot infer dataset format from '" + path.string() + "' (use .jsonl or .csv)");
}

namespace {

struct RawRecord {
    std::size_t line;
    std::vector<double> features;
    int label;
    std::optional<int> true_label;
    std::optional<std::string> text;
};

int as_label(const json& v, std::size_t line, const char* key) {
    if (!v.is_number_integer()) throw ParseError(line, std::string("'") + key + "' must be an integer");
    return v.get<int>();
}

RawRecord parse_json_record(const std::string& text, std::size_t line) {
    json rec;
    try {
        rec = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line, "record must be a JSON object");
    for (const auto& [key, _] : rec.items()) {
        if (key != "id" && key != "text" && key != "features" && key != "label" &&
            key != "true_label") {
            throw ParseError(line, "unknown field '" + key + "'");
        }
    }
    RawRecord r{line, {}, 0, std::nullopt, std::nullopt};
    if (rec.contains("id") && !rec["id"].is_number_integer()) {
        throw ParseError(line, "'id' must be an integer");
    }
    if (!rec.contains("features")) throw ParseError(line, "missing 'features'");
    if (!rec["features"].is_array()) throw ParseError(line, "'features' must be an array");
    for (const auto& f : rec["features"]) {
        if (!f.is_number()) throw ParseError(line, "'features' entries must be numbers");
        r.features.push_back(f.get<double>());
    }
    if (!rec.contains("label")) throw ParseError(line, "missing 'label'");
    r.label = as_label(rec["label"], line, "label");
    if (rec.contains("true_label") && !rec["true_label"].is_null()) {
        r.true_label = as_label(rec["true_label"], line, "true_label");
    }
    if (rec.contains("text") && !rec["text"].is_null()) {
        if (!rec["text"].is_string()) throw ParseError(line, "'text' must be a string");
        r.text = rec["text"].get<std::string>();
    }
    return r;
}

// Splits one CSV line honouring double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError(lineno, "unterminated quoted field");
    out.push_back(std::move(cur));
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, "invalid number '" + s + "'");
    }
}

int parse_int(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, "invalid integer '" + s + "'");
    }
}

std::vector<RawRecord> read_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<RawRecord> out;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header.empty()) {
            if (line.empty()) continue;
            header = split_csv_line(line, lineno);
            for (const auto& h : header) {
                if (h != "id" && h != "text" && h != "features" && h != "label" && h != "true_label") {
                    throw ParseError(lineno, "unknown column '" + h + "'");
                }
            }
            if (std::find(header.begin(), header.end(), "features") == header.end()) {
                throw ParseError(lineno, "missing 'features' column");
            }
            if (std::find(header.begin(), header.end(), "label") == header.end()) {
                throw ParseError(lineno, "missing 'label' column");
            }
            continue;
        }
        if (line.empty()) continue;
        auto cells = split_csv_line(line, lineno);
        if (cells.size() != header.size()) {
            throw ParseError(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(cells.size()));
        }
        RawRecord r{lineno, {}, 0, std::nullopt, std::nullopt};
        for (std::size_t c = 0; c < header.size(); ++c) {
            const std::string& cell = cells[c];
            if (header[c] == "features") {
                std::stringstream ss(cell);
                std::string tok;
                while (std::getline(ss, tok, ';')) r.features.push_back(parse_double(tok, lineno));
            } else if (header[c] == "label") {
                r.label = parse_int(cell, lineno);
            } else if (header[c] == "true_label") {
                if (!cell.empty()) r.true_label = parse_int(cell, lineno);
            } else if (header[c] == "text") {
                if (!cell.empty()) r.text = cell;
            } else if (header[c] == "id") {
                if (!cell.empty()) parse_int(cell, lineno);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RawRecord> read_jsonl(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<RawRecord> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_json_record(line, lineno));
    }
    return out;
}

}  // namespace

LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                            std::size_t num_classes, std::vector<std::string> class_names) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file " + path.string());
    std::vector<RawRecord> raw = format == DatasetFormat::jsonl ? read_jsonl(in) : read_csv(in);
    if (raw.empty()) throw Error("empty dataset: " + path.string());

    if (num_classes == 0) {
        if (!class_names.empty()) {
            num_classes = class_names.size();
        } else {
            int max_label = 0;
            for (const auto& r : raw) max_label = std::max({max_label, r.label, r.true_label.value_or(0)});
            num_classes = static_cast<std::size_t>(max_label) + 1;
        }
    }
    const std::size_t dim = raw.front().features.size();
    std::vector<Sample> samples;
    samples.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& r = raw[i];
        const std::string who = "record " + std::to_string(i) + " (line " + std::to_string(r.line) + ")";
        if (r.features.empty()) throw ParseError(r.line, "empty 'features'");
        if (r.features.size() != dim) {
            throw Error(who + ": feature dimension " + std::to_string(r.features.size()) +
                        " != " + std::to_string(dim));
        }
        auto bad = [&](int l) { return l < 0 || static_cast<std::size_t>(l) >= num_classes; };
        if (bad(r.label)) {
            throw Error(who + ": label " + std::to_string(r.label) + " out of range for " +
                        std::to_string(num_classes) + " classes");
        }
        if (r.true_label && bad(*r.true_label)) {
            throw Error(who + ": true_label " + std::to_string(*r.true_label) +
                        " out of range for " + std::to_string(num_classes) + " classes");
        }
        samples.emplace_back(static_cast<SampleId>(i), std::move(r.features), r.label, r.true_label,
                             std::move(r.text));
    }
    return LabeledDataset(std::move(samples), num_classes, dim, std::move(class_names));
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

std::string format_double(double v) {
    // nlohmann's serializer emits the shortest string that round-trips exactly.
    return json(v).dump();
}

}  // namespace

std::string to_jsonl(const LabeledDataset& ds) {
    std::string out;
    for (const auto& s : ds) {
        json rec;
        rec["id"] = s.id();
        if (s.text()) rec["text"] = *s.text();
        rec["features"] = std::vector<double>(s.features().begin(), s.features().end());
        rec["label"] = s.label();
        if (auto t = AuditAccess::true_label(s)) rec["true_label"] = *t;
        out += rec.dump();
        out.push_back('\n');
    }
    return out;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, DatasetFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file " + path.string());
    if (format == DatasetFormat::jsonl) {
        out << to_jsonl(ds);
    } else {
        out << "id,text,features,label,true_label\n";
        for (const auto& s : ds) {
            std::string feats;
            for (std::size_t j = 0; j < s.features().size(); ++j) {
                if (j) feats.push_back(';');
                feats += format_double(s.features()[j]);
            }
            auto t = AuditAccess::true_label(s);
            out << s.id() << ',' << csv_quote(s.text().value_or("")) << ',' << feats << ','
                << s.label() << ',' << (t ? std::to_string(*t) : std::string()) << '\n';
        }
    }
    if (!out) throw Error("failed writing dataset file " + path.string());
}

std::vector<std::size_t> split_sizes(std::size_t n, std::span<const double> fractions) {
    std::vector<std::size_t> sizes(fractions.size());
    std::vector<double> remainder(fractions.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = fractions[i] * static_cast<double>(n);
        // Guard against 0.8 * 10 evaluating to 7.9999999.
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::vector<std::size_t> order(fractions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) sizes[order[k % order.size()]] += 1;
    return sizes;
}

DatasetSplit split_dataset(const LabeledDataset& ds, SplitFractions fractions, std::uint64_t seed) {
    const double f[3] = {fractions.train, fractions.dev, fractions.test};
    for (double x : f) {
        if (!(x >= 0.0)) throw Error("split fractions must be non-negative");
    }
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
        throw Error("split fractions must sum to 1, got " + std::to_string(f[0] + f[1] + f[2]));
    }
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, "split");
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    const auto sizes = split_sizes(ds.size(), f);
    std::vector<Sample> parts[3];
    std::size_t pos = 0;
    for (int p = 0; p < 3; ++p) {
        // Keep each part in original id order so a (1,0,0) split returns ds unchanged.
        std::vector<std::size_t> chosen(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                        order.begin() + static_cast<std::ptrdiff_t>(pos + sizes[p]));
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t idx : chosen) parts[p].push_back(ds[idx]);
        pos += sizes[p];
    }
    auto make = [&](std::vector<Sample> s) {
        return LabeledDataset::renumbered(std::move(s), ds.num_classes(), ds.feature_dim(),
                                          ds.class_names());
    };
    return DatasetSplit{make(std::move(parts[0])), make(std::move(parts[1])), make(std::move(parts[2]))};
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error("cosine_similarity: dimension mismatch " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace noiseal
