#include <doctest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "noiseal/annotator.hpp"
#include "noiseal/error.hpp"
#include "test_support.hpp"

using namespace noiseal;

namespace {

// Returns a fixed answer list and counts calls.
class ScriptedOracle final : public Oracle {
public:
    explicit ScriptedOracle(std::vector<std::optional<int>> answers) : answers_(std::move(answers)) {}
    std::vector<std::optional<int>> answer(const OracleRequest& request) override {
        ++calls;
        last_prompt = request.prompt;
        std::vector<std::optional<int>> out;
        for (int r = 0; r < request.runs; ++r) out.push_back(answers_[static_cast<std::size_t>(r) % answers_.size()]);
        return out;
    }
    int calls = 0;
    std::string last_prompt;

private:
    std::vector<std::optional<int>> answers_;
};

double three_sigma(double p, std::size_t n) { return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

// Unit vectors at the given angles (degrees) in the plane.
LabeledDataset angled(const std::vector<double>& degrees, std::size_t k) {
    std::vector<std::vector<double>> f;
    std::vector<int> labels;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
        const double r = degrees[i] * std::numbers::pi / 180.0;
        f.push_back({std::cos(r), std::sin(r)});
        labels.push_back(static_cast<int>(i % k));
    }
    return test::make_dataset(f, labels, k);
}

}  // namespace

TEST_SUITE("annotator") {

TEST_CASE("class name matching") {
    const std::vector<std::string> names{"Sports", "World", "Sci/Tech"};
    CHECK(match_class_name("sports", names) == 0);
    CHECK(match_class_name("  WORLD.\n", names) == 1);
    CHECK(match_class_name("\"sci/tech\"", names) == 2);
    CHECK_FALSE(match_class_name("business", names).has_value());
    CHECK_FALSE(match_class_name("", names).has_value());
    CHECK_FALSE(match_class_name("sports news", names).has_value());
}

TEST_CASE("prompt layout") {
    PromptSpec spec;
    spec.task_description = "Classify the text.";
    spec.class_names = {"a", "b"};
    spec.input = "hello";
    spec.chain_of_thought = false;
    CHECK(build_prompt(spec) ==
          "Task description:\nClassify the text.\n\n"
          "Inputs:\nText: hello\nCandidate labels: a, b\n");

    spec.chain_of_thought = true;
    spec.label_noun = "topic";
    spec.demonstrations = {{"first", "b"}, {"second", "a"}};
    const std::string expected =
        "Task description:\nClassify the text.\n\n"
        "Demonstration:\n"
        "Text: first\nCandidate topics: a, b\nThe topic is: b\n\n"
        "Text: second\nCandidate topics: a, b\nThe topic is: a\n\n"
        "Inputs:\nText: hello\nCandidate topics: a, b\n"
        "Let's think step-by-step.";
    CHECK(build_prompt(spec) == expected);
    CHECK(build_prompt(spec) == build_prompt(spec));
    CHECK(build_prompt(spec).ends_with(kStepByStepSuffix));

    spec.class_names.clear();
    CHECK_THROWS_AS(build_prompt(spec), Error);
}

TEST_CASE("sample rendering") {
    CHECK(render_sample(Sample(0, {0.5, -1.0 / 3.0}, 0)) == "[0.5000, -0.3333]");
    CHECK(render_sample(Sample(0, {1.0}, 0, std::nullopt, std::string("raw text"))) == "raw text");
}

TEST_CASE("demonstration selection") {
    // Query at 0 degrees; candidates at hand-placed angles.
    const auto ds = angled({0, 50, 10, 170, 30, 90, 10}, 2);
    const std::vector<double> q{1.0, 0.0};
    const std::vector<SampleId> clean{1, 2, 3, 4, 5, 6};

    // Brute-force oracle: sort by angle, ties by id.
    CHECK(select_demonstrations(q, ds, clean, 3) == std::vector<SampleId>{2, 6, 4});
    CHECK(select_demonstrations(q, ds, clean, 6) == std::vector<SampleId>{2, 6, 4, 1, 5, 3});
    const std::vector<SampleId> with_self{0, 3, 5};
    CHECK(select_demonstrations(q, ds, with_self, 1).front() == 0);
    CHECK_THROWS_WITH_AS(select_demonstrations(q, ds, clean, 7), doctest::Contains("only 6"), Error);
}

TEST_CASE("majority vote") {
    const std::vector<std::optional<int>> v{2, 2, 1, 2, 0};
    const auto r = majority_vote(v, 3);
    CHECK(r.label == 2);
    CHECK(r.tally == std::vector<int>{1, 1, 3});
    const std::vector<std::optional<int>> tie{1, 0, 1, 0};
    CHECK(majority_vote(tie, 2).label == 0);
    const std::vector<std::optional<int>> partial{std::nullopt, 1, std::nullopt};
    const auto p = majority_vote(partial, 2);
    CHECK(p.label == 1);
    CHECK(p.failed_runs == 2);
    const std::vector<std::optional<int>> none{std::nullopt, std::nullopt};
    CHECK_THROWS_AS(majority_vote(none, 2), Error);

    ScriptedOracle fixed({1});
    OracleRequest req{0, "p", {"a", "b", "c"}, 7, 0};
    CHECK(query_with_voting(fixed, req).label == 1);
    req.runs = 0;
    CHECK_THROWS_AS(query_with_voting(fixed, req), Error);
}

TEST_CASE("simulated oracle accuracy") {
    const std::size_t n = 20000, k = 4;
    std::unordered_map<SampleId, int> truth;
    for (std::size_t i = 0; i < n; ++i) truth[static_cast<SampleId>(i)] = static_cast<int>(i % k);
    SimulatedOracle oracle(truth, k, 0.8, 17);
    const std::vector<std::string> names{"a", "b", "c", "d"};
    std::size_t single = 0;
    std::vector<std::size_t> voted(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        OracleRequest req{static_cast<SampleId>(i), "", names, 5, 0};
        const auto answers = oracle.answer(req);
        REQUIRE(answers.size() == 5);
        for (const auto& a : answers) REQUIRE((a && *a >= 0 && *a < 4));
        single += *answers[0] == truth[req.sample_id];
        voted[i % k] += majority_vote(answers, k).label == truth[req.sample_id];
    }
    CHECK(std::abs(static_cast<double>(single) / n - 0.8) <= three_sigma(0.8, n));
    // Reference per-class voted accuracies (ties go to the smallest index, so class 0 gains).
    const double reference[4] = {0.987591111111, 0.976213333333, 0.964835555556, 0.953457777778};
    for (std::size_t c = 0; c < k; ++c) {
        const double got = static_cast<double>(voted[c]) / (n / k);
        CAPTURE(c);
        CHECK(std::abs(got - reference[c]) <= three_sigma(reference[c], n / k));
        CHECK(got > 0.8);
    }
    // Same request, same answers.
    OracleRequest req{5, "", names, 5, 3};
    CHECK(oracle.answer(req) == oracle.answer(req));
    CHECK_THROWS_AS(SimulatedOracle(truth, k, 1.5, 1), ConfigError);
    req.sample_id = 999999;
    CHECK_THROWS_AS(oracle.answer(req), Error);
}

TEST_CASE("binary voting matches the binomial closed form") {
    const std::size_t n = 20000;
    std::unordered_map<SampleId, int> truth;
    for (std::size_t i = 0; i < n; ++i) truth[static_cast<SampleId>(i)] = static_cast<int>(i % 2);
    SimulatedOracle oracle(truth, 2, 0.8, 4);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ok += query_with_voting(oracle, {static_cast<SampleId>(i), "", {"x", "y"}, 5, 0}).label ==
              truth[static_cast<SampleId>(i)];
    }
    CHECK(std::abs(static_cast<double>(ok) / n - 0.94208) <= three_sigma(0.94208, n));
}

TEST_CASE("purified correction") {
    // 20 samples on a circle; ids 0..9 clean, 10..19 purified.
    std::vector<double> deg;
    for (int i = 0; i < 20; ++i) deg.push_back(i * 18.0);
    auto ds = angled(deg, 3);
    std::vector<SampleId> clean, purified;
    for (SampleId i = 0; i < 10; ++i) clean.push_back(i);
    for (SampleId i = 10; i < 20; ++i) purified.push_back(i);

    SUBCASE("perfect oracle restores truth and caches by id") {
        std::unordered_map<SampleId, int> truth;
        for (SampleId i = 0; i < 20; ++i) truth[i] = static_cast<int>((i + 1) % 3);
        SimulatedOracle oracle(truth, 3, 1.0, 1);
        Annotator ann(oracle, AnnotatorConfig{});
        std::vector<int> labels = ds.labels();
        const auto records = ann.correct_purified(ds, purified, clean, labels);
        REQUIRE(records.size() == 10);
        for (const auto& r : records) {
            CHECK(r.new_label == truth[r.id]);
            CHECK(labels[static_cast<std::size_t>(r.id)] == truth[r.id]);
            CHECK(r.old_label == ds.at(r.id).label());
            CHECK_FALSE(r.cached);
            CHECK(r.tally[static_cast<std::size_t>(r.new_label)] == 5);
        }
        for (SampleId i = 0; i < 10; ++i) CHECK(labels[static_cast<std::size_t>(i)] == ds.at(i).label());
        CHECK(ann.oracle_calls() == 10);
        const auto again = ann.correct_purified(ds, purified, clean, labels);
        CHECK(ann.oracle_calls() == 10);
        for (const auto& r : again) CHECK(r.cached);
        CHECK(ann.cache_size() == 10);
    }
    SUBCASE("demonstrations come only from the clean set") {
        ScriptedOracle oracle({0});
        AnnotatorConfig cfg;
        cfg.demonstrations = 3;
        Annotator ann(oracle, cfg);
        std::vector<int> labels = ds.labels();
        const auto spec = ann.prompt_for(ds, ds.at(15), clean, labels);
        REQUIRE(spec.demonstrations.size() == 3);
        std::vector<std::string> clean_texts;
        for (SampleId id : clean) clean_texts.push_back(render_sample(ds.at(id)));
        for (const auto& d : spec.demonstrations) {
            CHECK(std::find(clean_texts.begin(), clean_texts.end(), d.text) != clean_texts.end());
        }
        // Demonstrations render with the current labels.
        labels[9] = 2;
        const auto spec2 = ann.prompt_for(ds, ds.at(10), clean, labels);
        CHECK(spec2.demonstrations.front().text == render_sample(ds.at(9)));
        CHECK(spec2.demonstrations.front().label == "class_2");
        ann.correct_purified(ds, std::vector<SampleId>{12}, clean, labels);
        CHECK(oracle.last_prompt.find(render_sample(ds.at(12))) != std::string::npos);
    }
    SUBCASE("errors") {
        ScriptedOracle failing({std::nullopt});
        Annotator ann(failing, AnnotatorConfig{});
        std::vector<int> labels = ds.labels();
        CHECK_THROWS_WITH_AS(ann.correct_purified(ds, purified, clean, labels), doctest::Contains("sample 10"), Error);
        const std::vector<SampleId> few{0, 1};
        CHECK_THROWS_AS(ann.correct_purified(ds, purified, few, labels), Error);
        CHECK_NOTHROW(ann.correct_purified(ds, {}, few, labels));
        AnnotatorConfig bad;
        bad.vote_runs = 0;
        CHECK_THROWS_AS(Annotator(failing, bad), ConfigError);
    }
}

TEST_CASE("simulated oracle a=0.9 relabels purified samples") {
    const std::size_t n = 600;
    std::vector<std::vector<double>> f;
    std::vector<int> labels, truth;
    for (std::size_t i = 0; i < n; ++i) {
        f.push_back({std::cos(0.01 * i), std::sin(0.01 * i), 1.0});
        truth.push_back(static_cast<int>(i % 4));
        labels.push_back(static_cast<int>((i + 1) % 4));
    }
    const auto ds = test::make_dataset(f, labels, 4, truth);
    SimulatedOracle oracle(ds, 0.9, 12);
    Annotator ann(oracle, AnnotatorConfig{});
    std::vector<SampleId> clean, purified;
    for (SampleId i = 0; i < 100; ++i) clean.push_back(i);
    for (SampleId i = 100; i < 600; ++i) purified.push_back(i);
    auto current = ds.labels();
    ann.correct_purified(ds, purified, clean, current);
    std::size_t ok = 0;
    for (SampleId id : purified) ok += current[static_cast<std::size_t>(id)] == truth[static_cast<std::size_t>(id)];
    // Exact plurality reference for K=4, a=0.9, five runs, averaged over classes.
    CHECK(std::abs(static_cast<double>(ok) / 500.0 - 0.99594) <= three_sigma(0.99594, 500));
    CHECK(ann.oracle_calls() == 500);
}

TEST_CASE("remote oracle wire format") {
    OracleRequest req{3, "prompt text", {"pos", "neg"}, 5, 0};
    const auto j = nlohmann::json::parse(RemoteOracle::encode_request(req));
    CHECK(j["prompt"] == "prompt text");
    CHECK(j["classes"] == nlohmann::json::array({"pos", "neg"}));
    CHECK(j["n"] == 5);
    CHECK(j["temperature"] == 0.5);

    const std::vector<std::string> names{"pos", "neg"};
    const auto a = RemoteOracle::decode_response(R"({"answers": ["NEG", "pos.", "maybe", 3]})", names);
    REQUIRE(a.size() == 4);
    CHECK(a[0] == 1);
    CHECK(a[1] == 0);
    CHECK_FALSE(a[2].has_value());
    CHECK_FALSE(a[3].has_value());
    CHECK_THROWS_AS(RemoteOracle::decode_response("nope", names), Error);
    CHECK_THROWS_AS(RemoteOracle::decode_response(R"({"labels": []})", names), Error);
    CHECK_THROWS_AS(RemoteOracle("ftp://host/x"), ConfigError);
    CHECK_THROWS_AS(RemoteOracle("localhost:80"), ConfigError);
}

TEST_CASE("remote oracle against an in-process server") {
    httplib::Server server;
    std::string seen_auth;
    nlohmann::json seen_body;
    server.Post("/label", [&](const httplib::Request& rq, httplib::Response& rs) {
        seen_auth = rq.get_header_value("Authorization");
        seen_body = nlohmann::json::parse(rq.body);
        // Three valid answers, one unknown, and a missing fifth run.
        rs.set_content(R"({"answers": ["neg", "Neg", "pos", "unsure"]})", "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& rs) { rs.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    RemoteOracle oracle(base + "/label", "secret", 5.0);
    const OracleRequest req{7, "classify me", {"pos", "neg"}, 5, 0};
    const auto answers = oracle.answer(req);
    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_body["prompt"] == "classify me");
    CHECK(seen_body["n"] == 5);
    REQUIRE(answers.size() == 5);
    const auto vote = majority_vote(answers, 2);
    CHECK(vote.label == 1);
    CHECK(vote.failed_runs == 2);

    RemoteOracle broken(base + "/broken", "", 5.0);
    CHECK_THROWS_WITH_AS(broken.answer(req), doctest::Contains("HTTP 500"), Error);

    server.stop();
    th.join();
    RemoteOracle down(base + "/label", "", 1.0);
    CHECK_THROWS_WITH_AS(down.answer(req), doctest::Contains("sample 7"), Error);
}

}  // TEST_SUITE
