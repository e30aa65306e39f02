#include "noiseal/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "noiseal/error.hpp"
#include "noiseal/rng.hpp"

namespace noiseal {

namespace {

std::unordered_map<SampleId, int> truth_of(const LabeledDataset& ds) {
    std::unordered_map<SampleId, int> truth;
    truth.reserve(ds.size());
    for (const auto& s : ds) truth.emplace(s.id(), AuditAccess::reference_label(s));
    return truth;
}

}  // namespace

SimulatedOracle::SimulatedOracle(const LabeledDataset& ds, double accuracy, std::uint64_t seed)
    : SimulatedOracle(truth_of(ds), ds.num_classes(), accuracy, seed) {}

SimulatedOracle::SimulatedOracle(std::unordered_map<SampleId, int> truth, std::size_t num_classes,
                                 double accuracy, std::uint64_t seed)
    : truth_(std::move(truth)), num_classes_(num_classes), accuracy_(accuracy), seed_(seed) {
    if (!(accuracy_ >= 0.0 && accuracy_ <= 1.0)) throw ConfigError("oracle accuracy must lie in [0,1]");
    if (num_classes_ < 2 && accuracy_ < 1.0) throw ConfigError("an imperfect oracle needs at least 2 classes");
}

std::vector<std::optional<int>> SimulatedOracle::answer(const OracleRequest& request) {
    auto it = truth_.find(request.sample_id);
    if (it == truth_.end()) throw Error("simulated oracle has no record of sample " + std::to_string(request.sample_id));
    const int truth = it->second;
    std::vector<std::optional<int>> out;
    out.reserve(static_cast<std::size_t>(std::max(0, request.runs)));
    for (int r = 0; r < request.runs; ++r) {
        // Per-run stream keyed by (seed, request seed, sample, run): order-independent.
        Rng rng = make_rng(seed_, "oracle/simulated",
                           {request.seed, static_cast<std::uint64_t>(request.sample_id), static_cast<std::uint64_t>(r)});
        if (uniform01(rng) < accuracy_) {
            out.emplace_back(truth);
        } else {
            const int other = static_cast<int>(uniform_index(rng, num_classes_ - 1));
            out.emplace_back(other >= truth ? other + 1 : other);
        }
    }
    return out;
}

std::optional<int> match_class_name(std::string_view answer, std::span<const std::string> class_names) {
    auto is_trim = [](unsigned char c) { return std::isspace(c) || c == '.' || c == ',' || c == '"' || c == '\''; };
    while (!answer.empty() && is_trim(static_cast<unsigned char>(answer.front()))) answer.remove_prefix(1);
    while (!answer.empty() && is_trim(static_cast<unsigned char>(answer.back()))) answer.remove_suffix(1);
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
        return out;
    };
    const std::string a = lower(answer);
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        if (lower(class_names[k]) == a) return static_cast<int>(k);
    }
    return std::nullopt;
}

RemoteOracle::RemoteOracle(std::string endpoint, std::string token, double timeout_seconds)
    : token_(std::move(token)), timeout_seconds_(timeout_seconds) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("oracle endpoint must be an http:// URL: " + endpoint);
    const std::string scheme = endpoint.substr(0, scheme_end);
    if (scheme != "http") throw ConfigError("unsupported oracle endpoint scheme '" + scheme + "' (only http)");
    const auto path_start = endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

RemoteOracle RemoteOracle::from_environment() {
    const char* endpoint = std::getenv("ORACLE_ENDPOINT");
    if (!endpoint || !*endpoint) throw ConfigError("ORACLE_ENDPOINT is not set");
    const char* token = std::getenv("ORACLE_TOKEN");
    return RemoteOracle(endpoint, token ? token : "");
}

std::string RemoteOracle::encode_request(const OracleRequest& request, double temperature) {
    nlohmann::json j;
    j["prompt"] = request.prompt;
    j["classes"] = request.class_names;
    j["n"] = request.runs;
    j["temperature"] = temperature;
    return j.dump();
}

std::vector<std::optional<int>> RemoteOracle::decode_response(const std::string& body,
                                                              std::span<const std::string> class_names) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("oracle response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("answers") || !j["answers"].is_array()) {
        throw Error("oracle response lacks an 'answers' array");
    }
    std::vector<std::optional<int>> out;
    for (const auto& a : j["answers"]) {
        out.push_back(a.is_string() ? match_class_name(a.get<std::string>(), class_names) : std::nullopt);
    }
    return out;
}

std::vector<std::optional<int>> RemoteOracle::answer(const OracleRequest& request) {
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(timeout_seconds_);
    const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Post(path_, headers, encode_request(request), "application/json");
    if (!res) {
        throw Error("oracle request for sample " + std::to_string(request.sample_id) +
                    " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error("oracle returned HTTP " + std::to_string(res->status) + " for sample " +
                    std::to_string(request.sample_id));
    }
    auto answers = decode_response(res->body, request.class_names);
    // Missing runs count as failures; surplus answers are ignored.
    answers.resize(static_cast<std::size_t>(std::max(0, request.runs)));
    return answers;
}

std::string render_sample(const Sample& s) {
    if (s.text()) return *s.text();
    std::string out = "[";
    char buf[32];
    for (std::size_t i = 0; i < s.features().size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.4f", i ? ", " : "", s.features()[i]);
        out += buf;
    }
    return out + "]";
}

std::string build_prompt(const PromptSpec& spec) {
    if (spec.class_names.empty()) throw Error("prompt needs at least one candidate class name");
    std::string candidates;
    for (std::size_t k = 0; k < spec.class_names.size(); ++k) {
        if (k) candidates += ", ";
        candidates += spec.class_names[k];
    }
    const std::string candidate_line = "Candidate " + spec.label_noun + "s: " + candidates + "\n";
    std::string out = "Task description:\n" + spec.task_description + "\n";
    if (!spec.demonstrations.empty()) {
        out += "\nDemonstration:\n";
        for (const auto& d : spec.demonstrations) {
            out += "Text: " + d.text + "\n";
            out += candidate_line;
            out += "The " + spec.label_noun + " is: " + d.label + "\n\n";
        }
    } else {
        out += "\n";
    }
    out += "Inputs:\nText: " + spec.input + "\n" + candidate_line;
    if (spec.chain_of_thought) out += kStepByStepSuffix;
    return out;
}

std::vector<SampleId> select_demonstrations(std::span<const double> query, const LabeledDataset& ds,
                                            std::span<const SampleId> clean_ids, std::size_t k) {
    if (clean_ids.size() < k) {
        throw Error("demonstration selection needs " + std::to_string(k) + " clean samples, only " +
                    std::to_string(clean_ids.size()) + " available");
    }
    std::vector<std::pair<double, SampleId>> scored;
    scored.reserve(clean_ids.size());
    for (SampleId id : clean_ids) scored.emplace_back(cosine_similarity(query, ds.at(id).features()), id);
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
    std::vector<SampleId> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
    return out;
}

VoteResult majority_vote(std::span<const std::optional<int>> answers, std::size_t num_classes) {
    VoteResult r;
    r.tally.assign(num_classes, 0);
    for (const auto& a : answers) {
        if (!a || *a < 0 || static_cast<std::size_t>(*a) >= num_classes) {
            ++r.failed_runs;
            continue;
        }
        ++r.tally[static_cast<std::size_t>(*a)];
    }
    if (static_cast<std::size_t>(r.failed_runs) == answers.size()) {
        throw Error("every oracle run failed (" + std::to_string(answers.size()) + " runs)");
    }
    r.label = static_cast<int>(std::max_element(r.tally.begin(), r.tally.end()) - r.tally.begin());
    return r;
}

VoteResult query_with_voting(Oracle& oracle, const OracleRequest& request) {
    if (request.runs < 1) throw Error("voting needs at least one run");
    const auto answers = oracle.answer(request);
    return majority_vote(answers, request.class_names.size());
}

Annotator::Annotator(Oracle& oracle, AnnotatorConfig config) : oracle_(oracle), config_(std::move(config)) {
    if (config_.vote_runs < 1) throw ConfigError("vote_runs must be at least 1");
}

PromptSpec Annotator::prompt_for(const LabeledDataset& ds, const Sample& query, std::span<const SampleId> clean,
                                 std::span<const int> labels) const {
    PromptSpec spec;
    spec.task_description = config_.task_description;
    spec.class_names = ds.class_names();
    spec.label_noun = config_.label_noun;
    spec.chain_of_thought = config_.chain_of_thought;
    spec.input = render_sample(query);
    for (SampleId id : select_demonstrations(query.features(), ds, clean, config_.demonstrations)) {
        const int label = labels[static_cast<std::size_t>(id)];
        spec.demonstrations.push_back({render_sample(ds.at(id)), ds.class_names()[static_cast<std::size_t>(label)]});
    }
    return spec;
}

std::vector<CorrectionRecord> Annotator::correct_purified(const LabeledDataset& ds,
                                                          std::span<const SampleId> purified,
                                                          std::span<const SampleId> clean,
                                                          std::vector<int>& labels) {
    if (labels.size() != ds.size()) throw Error("label buffer does not match the dataset size");
    if (!purified.empty() && clean.size() < config_.demonstrations) {
        throw Error("purified-set correction needs " + std::to_string(config_.demonstrations) +
                    " clean samples for demonstrations, clean set has " + std::to_string(clean.size()));
    }
    std::vector<CorrectionRecord> records;
    records.reserve(purified.size());
    for (SampleId id : purified) {
        const auto idx = static_cast<std::size_t>(id);
        auto cached = cache_.find(id);
        const bool hit = cached != cache_.end();
        if (!hit) {
            OracleRequest req;
            req.sample_id = id;
            req.prompt = build_prompt(prompt_for(ds, ds.at(id), clean, labels));
            req.class_names = ds.class_names();
            req.runs = config_.vote_runs;
            req.seed = config_.seed;
            VoteResult vote;
            try {
                vote = query_with_voting(oracle_, req);
            } catch (const Error& e) {
                throw Error("oracle failed on sample " + std::to_string(id) + ": " + e.what());
            }
            ++oracle_calls_;
            failed_runs_ += static_cast<std::size_t>(vote.failed_runs);
            cached = cache_.emplace(id, std::move(vote)).first;
        }
        records.push_back({id, labels[idx], cached->second.label, cached->second.tally, hit});
        labels[idx] = cached->second.label;
    }
    return records;
}

}  // namespace noiseal
