#include <doctest/doctest.h>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <random>

#include "bidev/backend.hpp"
#include "bidev/errors.hpp"
#include "bidev/pipeline.hpp"
#include "bidev/prompt.hpp"
#include "bidev/retrieval.hpp"

namespace fs = std::filesystem;
using namespace bidev;

namespace {

const TemplateLibrary& shipped_templates() {
    static const TemplateLibrary library = TemplateLibrary::load_dir(BIDEV_TEMPLATES_DIR);
    return library;
}

// One gold document with a relevant and an irrelevant paragraph, plus a
// scripted claim chain step0 -> step1 -> ... -> step5 where every stepN
// still raises a question. Used for cap, early-stop, and ablation tests.
Document step_doc() {
    return {"g1", "Step Facts", "Alpha fact paragraph.\n\nBeta filler paragraph."};
}

std::shared_ptr<ScriptedBackend> make_step_backend() {
    auto backend = std::make_shared<ScriptedBackend>();
    for (int step = 0; step <= 4; ++step) {
        const std::string claim = "step" + std::to_string(step) + ".";
        const std::string question = "What is q" + std::to_string(step) + "?";
        const std::string answer = "a" + std::to_string(step);
        const std::string next = "step" + std::to_string(step + 1) + ".";
        backend->register_substring(Role::Perceptor, "Claim: " + claim, "Q: " + question);
        backend->register_substring(Role::Querier, question, answer);
        backend->register_substring(Role::Rewriter, "Claim: " + claim, next);
    }
    backend->register_substring(Role::Perceptor, "Claim: done.", "NO LATENT INFORMATION");

    for (const char* origin : {"step0.", "step3."}) {
        backend->register_substring(Role::Decomposer, std::string("Claim: ") + origin,
                                    "1. sub-one.\n2. sub-two.");
    }
    backend->register_substring(Role::Checker, "Claim: sub-one.", "SUPPORT");
    backend->register_substring(Role::Checker, "Claim: sub-two.", "SUPPORT");
    backend->register_substring(Role::Checker, "Claim: step3.", "SUPPORT");
    backend->register_substring(Role::Checker, "Claim: step0.", "SUPPORT");

    backend->register_substring(Role::Filter, "Alpha fact", "YES");
    backend->register_substring(Role::Filter, "Beta filler", "NO");
    return backend;
}

PipelineConfig step_config() {
    PipelineConfig config;
    config.setting = EvidenceSetting::Gold;
    config.strategy = DecompositionStrategy::Bidev;
    config.max_iterations = 3;
    return config;
}

VerificationOutcome run_step(const PipelineConfig& config) {
    auto backend = make_step_backend();
    const CorpusStore corpus({step_doc()});
    const Verifier verifier(backend, shipped_templates(), config, &corpus);
    const std::vector<std::string> gold{"g1"};
    return verifier.verify("t", "step0.", &gold);
}

int calls(const VerificationTrace& trace, const std::string& role) {
    const auto it = trace.backend_calls_per_role.find(role);
    return it == trace.backend_calls_per_role.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("config validation and JSON round-trip") {
    PipelineConfig config;
    config.max_iterations = -1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = PipelineConfig{};
    config.top_k = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = PipelineConfig{};
    config.bm25_b = 1.5;
    CHECK_THROWS_AS(config.validate(), ConfigError);

    PipelineConfig full;
    full.max_iterations = 2;
    full.top_k = 7;
    full.setting = EvidenceSetting::Open;
    full.strategy = DecompositionStrategy::Naive;
    full.ablation = {AblationFlag::DisableFilter, AblationFlag::DisableRewriter};
    full.parallel_subclaims = true;
    const PipelineConfig reparsed = config_from_json(config_to_json(full));
    CHECK(config_to_json(reparsed) == config_to_json(full));

    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"bogus_key", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST_CASE("setting and ablation names round-trip") {
    CHECK(parse_setting("gold") == EvidenceSetting::Gold);
    CHECK(parse_setting("open") == EvidenceSetting::Open);
    CHECK(parse_setting("close") == EvidenceSetting::Close);
    CHECK_THROWS_AS(parse_setting("closed"), ConfigError);
    for (const auto flag : {AblationFlag::DisablePerceptor, AblationFlag::DisableRewriter,
                            AblationFlag::DisableDecomposer, AblationFlag::DisableFilter}) {
        CHECK(parse_ablation(to_string(flag)) == flag);
    }
    CHECK_THROWS_AS(parse_ablation("disable_everything"), ConfigError);
}

TEST_CASE("aggregate is conjunction over the label space") {
    CHECK_THROWS_AS(Verifier::aggregate({}), EmptyVerdictListError);
    CHECK(Verifier::aggregate({Label::Support}) == Label::Support);
    CHECK(Verifier::aggregate({Label::Support, Label::Support}) == Label::Support);
    CHECK(Verifier::aggregate({Label::Support, Label::Refute}) == Label::Refute);
    CHECK(Verifier::aggregate({Label::Refute}) == Label::Refute);

    // Property: Support iff all Support, invariant under order.
    std::mt19937_64 gen(11);
    for (int round = 0; round < 200; ++round) {
        const std::size_t count = 1 + gen() % 12;
        std::vector<Label> verdicts;
        bool all_support = true;
        for (std::size_t i = 0; i < count; ++i) {
            const bool support = (gen() % 2) == 0;
            verdicts.push_back(support ? Label::Support : Label::Refute);
            all_support = all_support && support;
        }
        const Label label = Verifier::aggregate(verdicts);
        CHECK(label == (all_support ? Label::Support : Label::Refute));
        std::shuffle(verdicts.begin(), verdicts.end(), gen);
        CHECK(Verifier::aggregate(verdicts) == label);
    }
}

TEST_CASE("gold run with the shipped demo fixture: full two-iteration flow") {
    auto backend = std::make_shared<ScriptedBackend>();
    load_script_fixture(*backend, fs::path(BIDEV_FIXTURES_DIR) / "demo_script.jsonl");
    const CorpusStore corpus =
        CorpusStore::load_jsonl(fs::path(BIDEV_FIXTURES_DIR) / "demo_corpus.jsonl");

    PipelineConfig config;
    config.setting = EvidenceSetting::Gold;
    const Verifier verifier(backend, shipped_templates(), config, &corpus);
    const std::vector<std::string> gold{"d1", "d2", "d3", "d4"};
    const auto outcome = verifier.verify(
        "c1", "The writer of Harbor Lights is younger than the author of Granite Peaks.", &gold);

    REQUIRE(outcome.ok);
    CHECK(outcome.label == Label::Support);
    REQUIRE(outcome.trace.iterations.size() == 2);
    CHECK(outcome.trace.iterations[0].question == "Who is the writer of Harbor Lights?");
    CHECK(outcome.trace.iterations[0].answer == "Sandra Lane");
    CHECK(outcome.trace.iterations[0].rewritten_claim ==
          "Sandra Lane is younger than the author of Granite Peaks.");
    CHECK(outcome.trace.iterations[1].rewritten_claim == "Sandra Lane is younger than Nora Quinn.");
    CHECK(outcome.trace.simplified_claim == "Sandra Lane is younger than Nora Quinn.");
    REQUIRE(outcome.trace.sub_claims.size() == 3);
    REQUIRE(outcome.trace.sub_verdicts.size() == 3);
    for (const auto& verdict : outcome.trace.sub_verdicts) {
        CHECK(verdict.label == Label::Support);
        CHECK(!verdict.warning.has_value());
    }
    CHECK(outcome.trace.retrieval_calls == 0);
    CHECK(outcome.trace.failure == std::nullopt);

    // Determinism: a second run must produce byte-identical trace JSON.
    const auto again = verifier.verify(
        "c1", "The writer of Harbor Lights is younger than the author of Granite Peaks.", &gold);
    CHECK(trace_to_json(outcome.trace).dump(2) == trace_to_json(again.trace).dump(2));
}

TEST_CASE("iteration cap: scripts keep asking but the loop stops at max_iterations") {
    const auto outcome = run_step(step_config());
    REQUIRE(outcome.ok);
    REQUIRE(outcome.trace.iterations.size() == 3);
    CHECK(outcome.trace.iterations[0].question == "What is q0?");
    CHECK(outcome.trace.iterations[2].rewritten_claim == "step3.");
    CHECK(outcome.trace.simplified_claim == "step3.");
    CHECK(calls(outcome.trace, "perceptor") == 3);
    CHECK(calls(outcome.trace, "querier") == 3);
    CHECK(calls(outcome.trace, "rewriter") == 3);
    CHECK(calls(outcome.trace, "decomposer") == 1);
    CHECK(calls(outcome.trace, "checker") == 2);
    CHECK(calls(outcome.trace, "filter") == 10);
    CHECK(outcome.trace.backend_calls_total == 22);
}

TEST_CASE("early stop: an immediately resolved claim has zero iterations and C* = C") {
    auto backend = make_step_backend();
    backend->register_substring(Role::Decomposer, "Claim: done.", "1. sub-one.\n2. sub-two.");
    const CorpusStore corpus({step_doc()});
    const Verifier verifier(backend, shipped_templates(), step_config(), &corpus);
    const std::vector<std::string> gold{"g1"};
    const auto outcome = verifier.verify("t", "done.", &gold);
    REQUIRE(outcome.ok);
    CHECK(outcome.trace.iterations.empty());
    CHECK(outcome.trace.simplified_claim == "done.");
    CHECK(calls(outcome.trace, "perceptor") == 1);  // the resolving perceive itself
    CHECK(calls(outcome.trace, "querier") == 0);
    CHECK(calls(outcome.trace, "rewriter") == 0);
}

TEST_CASE("max_iterations=0 skips stage 1 after zero perceives") {
    PipelineConfig config = step_config();
    config.max_iterations = 0;
    const auto outcome = run_step(config);
    REQUIRE(outcome.ok);
    CHECK(outcome.trace.iterations.empty());
    CHECK(outcome.trace.simplified_claim == "step0.");
    CHECK(calls(outcome.trace, "perceptor") == 0);
}

TEST_CASE("ablation: disable_perceptor skips stage 1 entirely") {
    PipelineConfig config = step_config();
    config.ablation = {AblationFlag::DisablePerceptor};
    const auto outcome = run_step(config);
    REQUIRE(outcome.ok);
    CHECK(outcome.trace.iterations.empty());
    CHECK(outcome.trace.simplified_claim == "step0.");
    CHECK(calls(outcome.trace, "perceptor") == 0);
    CHECK(calls(outcome.trace, "querier") == 0);
    CHECK(calls(outcome.trace, "rewriter") == 0);
    // Stage 2 is untouched: same decomposer and checker activity as the baseline.
    CHECK(calls(outcome.trace, "decomposer") == 1);
    CHECK(calls(outcome.trace, "checker") == 2);
    CHECK(calls(outcome.trace, "filter") == 4);
}

TEST_CASE("ablation: disable_rewriter keeps QA but never alters the claim") {
    PipelineConfig config = step_config();
    config.ablation = {AblationFlag::DisableRewriter};
    const auto outcome = run_step(config);
    REQUIRE(outcome.ok);
    REQUIRE(outcome.trace.iterations.size() == 3);
    for (const auto& iteration : outcome.trace.iterations) {
        CHECK(iteration.question == "What is q0?");
        CHECK(iteration.answer == "a0");
        CHECK(iteration.rewrite_skipped == true);
        CHECK(iteration.rewritten_claim == "step0.");
    }
    CHECK(outcome.trace.simplified_claim == "step0.");
    CHECK(calls(outcome.trace, "rewriter") == 0);
    // Every other role is unaffected relative to the baseline run.
    CHECK(calls(outcome.trace, "perceptor") == 3);
    CHECK(calls(outcome.trace, "querier") == 3);
    CHECK(calls(outcome.trace, "decomposer") == 1);
    CHECK(calls(outcome.trace, "checker") == 2);
    CHECK(calls(outcome.trace, "filter") == 10);
}

TEST_CASE("ablation: disable_decomposer checks C* as the single sub-claim") {
    PipelineConfig config = step_config();
    config.ablation = {AblationFlag::DisableDecomposer};
    const auto outcome = run_step(config);
    REQUIRE(outcome.ok);
    REQUIRE(outcome.trace.sub_claims.size() == 1);
    CHECK(outcome.trace.sub_claims[0] == "step3.");
    CHECK(calls(outcome.trace, "decomposer") == 0);
    CHECK(calls(outcome.trace, "checker") == 1);
    // Stage 1 runs exactly as in the baseline.
    CHECK(calls(outcome.trace, "perceptor") == 3);
    CHECK(calls(outcome.trace, "querier") == 3);
    CHECK(calls(outcome.trace, "rewriter") == 3);
    CHECK(calls(outcome.trace, "filter") == 8);
}

TEST_CASE("ablation: disable_filter keeps every paragraph with zero filter calls") {
    PipelineConfig config = step_config();
    config.ablation = {AblationFlag::DisableFilter};
    const auto outcome = run_step(config);
    REQUIRE(outcome.ok);
    CHECK(calls(outcome.trace, "filter") == 0);
    for (const auto& iteration : outcome.trace.iterations) {
        CHECK(iteration.evidence.raw_paragraph_count == 2);
        CHECK(iteration.evidence.kept_paragraph_count == 2);
        CHECK(iteration.evidence.filter_overridden == false);
    }
    // Neighbors match the baseline exactly.
    CHECK(calls(outcome.trace, "perceptor") == 3);
    CHECK(calls(outcome.trace, "querier") == 3);
    CHECK(calls(outcome.trace, "rewriter") == 3);
    CHECK(calls(outcome.trace, "decomposer") == 1);
    CHECK(calls(outcome.trace, "checker") == 2);
}

TEST_CASE("filtering drops the irrelevant paragraph on the baseline run") {
    const auto outcome = run_step(step_config());
    REQUIRE(outcome.ok);
    for (const auto& iteration : outcome.trace.iterations) {
        CHECK(iteration.evidence.raw_paragraph_count == 2);
        CHECK(iteration.evidence.kept_paragraph_count == 1);
        CHECK(iteration.evidence.kept_mask == std::vector<bool>{true, false});
    }
}

namespace {

// Shared fixture for the setting-isolation tests: a resolved claim verified
// directly so the only evidence user is the checker.
std::shared_ptr<ScriptedBackend> make_settings_backend() {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->register_substring(Role::Perceptor, "Claim: The dog sleeps.", "NO LATENT INFORMATION");
    backend->register_substring(Role::Checker, "Claim: The dog sleeps.", "SUPPORT");
    backend->register_substring(Role::Filter, "Paragraph:", "YES");
    return backend;
}

std::vector<Document> settings_corpus() {
    return {
        {"w1", "dog article", "the dog sleeps on the porch"},
        {"w2", "cat article", "the cat sleeps all day"},
        {"w3", "fox article", "the quick brown fox"},
    };
}

}  // namespace

TEST_CASE("close setting: zero retrieval, zero filter calls, empty evidence") {
    auto backend = make_settings_backend();
    PipelineConfig config;
    config.setting = EvidenceSetting::Close;
    config.strategy = DecompositionStrategy::Direct;
    const Verifier verifier(backend, shipped_templates(), config);
    const auto outcome = verifier.verify("t", "The dog sleeps.", nullptr);
    REQUIRE(outcome.ok);
    CHECK(outcome.label == Label::Support);
    CHECK(outcome.trace.retrieval_calls == 0);
    CHECK(calls(outcome.trace, "filter") == 0);
    REQUIRE(outcome.trace.sub_verdicts.size() == 1);
    CHECK(outcome.trace.sub_verdicts[0].evidence.raw_paragraph_count == 0);
    CHECK(outcome.trace.sub_verdicts[0].evidence.source_doc_ids.empty());
}

TEST_CASE("gold setting never touches the index even when one is supplied") {
    auto backend = make_settings_backend();
    const CorpusStore corpus(settings_corpus());
    const RetrievalIndex index = RetrievalIndex::build(settings_corpus());
    PipelineConfig config;
    config.setting = EvidenceSetting::Gold;
    config.strategy = DecompositionStrategy::Direct;
    const Verifier verifier(backend, shipped_templates(), config, &corpus, &index);
    const std::vector<std::string> gold{"w1"};
    const auto outcome = verifier.verify("t", "The dog sleeps.", &gold);
    REQUIRE(outcome.ok);
    CHECK(outcome.trace.retrieval_calls == 0);
    REQUIRE(outcome.trace.sub_verdicts.size() == 1);
    CHECK(outcome.trace.sub_verdicts[0].evidence.source_doc_ids ==
          std::vector<std::string>{"w1"});
}

TEST_CASE("open setting retrieves the BM25 top-k for the sub-claim query") {
    auto backend = make_settings_backend();
    const RetrievalIndex index = RetrievalIndex::build(settings_corpus());
    PipelineConfig config;
    config.setting = EvidenceSetting::Open;
    config.strategy = DecompositionStrategy::Direct;
    config.top_k = 2;
    const Verifier verifier(backend, shipped_templates(), config, nullptr, &index);
    const auto outcome = verifier.verify("t", "The dog sleeps.", nullptr);
    REQUIRE(outcome.ok);
    CHECK(outcome.trace.retrieval_calls == 1);

    const auto expected = retrieve_top_k(index, "The dog sleeps.", 2, BM25Params{});
    std::vector<std::string> expected_ids;
    for (const auto& hit : expected) expected_ids.push_back(hit.doc_id);
    REQUIRE(outcome.trace.sub_verdicts.size() == 1);
    CHECK(outcome.trace.sub_verdicts[0].evidence.source_doc_ids == expected_ids);
}

TEST_CASE("constructor rejects a setting whose resources are missing") {
    auto backend = make_settings_backend();
    PipelineConfig gold_config;
    gold_config.setting = EvidenceSetting::Gold;
    CHECK_THROWS_AS(Verifier(backend, shipped_templates(), gold_config), ConfigError);
    PipelineConfig open_config;
    open_config.setting = EvidenceSetting::Open;
    CHECK_THROWS_AS(Verifier(backend, shipped_templates(), open_config), ConfigError);
}

TEST_CASE("unknown gold doc id turns into a per-claim failure, label Refute") {
    auto backend = make_step_backend();
    const CorpusStore corpus({step_doc()});
    const Verifier verifier(backend, shipped_templates(), step_config(), &corpus);
    const std::vector<std::string> gold{"missing-doc"};
    const auto outcome = verifier.verify("t", "step0.", &gold);
    CHECK(outcome.ok == false);
    CHECK(outcome.label == Label::Refute);
    CHECK(outcome.error.find("missing-doc") != std::string::npos);
    REQUIRE(outcome.trace.failure.has_value());
    CHECK(outcome.trace.simplified_claim == "step0.");  // never simplified before the failure
}

TEST_CASE("script miss is captured as a failure, not a crash") {
    auto backend = std::make_shared<ScriptedBackend>();  // no registrations at all
    PipelineConfig config;
    config.setting = EvidenceSetting::Close;
    const Verifier verifier(backend, shipped_templates(), config);
    const auto outcome = verifier.verify("t", "anything", nullptr);
    CHECK(outcome.ok == false);
    CHECK(outcome.label == Label::Refute);
    CHECK(outcome.trace.failure.has_value());
}

TEST_CASE("empty claim text is rejected as a per-claim failure") {
    auto backend = make_settings_backend();
    PipelineConfig config;
    config.setting = EvidenceSetting::Close;
    const Verifier verifier(backend, shipped_templates(), config);
    const auto outcome = verifier.verify("t", "", nullptr);
    CHECK(outcome.ok == false);
}

TEST_CASE("unparseable checker output maps to Refute with a trace warning") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->register_substring(Role::Perceptor, "Claim: mystery.", "NO LATENT INFORMATION");
    backend->register_substring(Role::Checker, "Claim: mystery.", "cannot tell");
    PipelineConfig config;
    config.setting = EvidenceSetting::Close;
    config.strategy = DecompositionStrategy::Direct;
    const Verifier verifier(backend, shipped_templates(), config);
    const auto outcome = verifier.verify("t", "mystery.", nullptr);
    REQUIRE(outcome.ok);  // the conservative fallback is a result, not a failure
    CHECK(outcome.label == Label::Refute);
    REQUIRE(outcome.trace.sub_verdicts.size() == 1);
    CHECK(outcome.trace.sub_verdicts[0].label == Label::Refute);
    CHECK(outcome.trace.sub_verdicts[0].warning.has_value());
}

TEST_CASE("parallel sub-claim checking produces the identical trace") {
    PipelineConfig serial = step_config();
    PipelineConfig parallel = step_config();
    parallel.parallel_subclaims = true;
    const auto a = run_step(serial);
    const auto b = run_step(parallel);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    // The config snapshot differs by the flag itself, so compare the rest.
    auto ja = trace_to_json(a.trace);
    auto jb = trace_to_json(b.trace);
    ja.erase("config");
    jb.erase("config");
    CHECK(ja.dump(2) == jb.dump(2));
}

TEST_CASE("trace JSON carries the config snapshot and stable keys") {
    const auto outcome = run_step(step_config());
    const nlohmann::json json = trace_to_json(outcome.trace);
    CHECK(json.at("claim_id") == "t");
    CHECK(json.at("original_claim") == "step0.");
    CHECK(json.at("final_label") == "Support");
    CHECK(json.at("config") == config_to_json(step_config()));
    CHECK(json.at("failure").is_null());
    CHECK(json.at("backend_calls_total") == 22);
    CHECK(json.at("iterations").size() == 3);
}

TEST_CASE("validate_gold_map names the first unknown doc id") {
    const CorpusStore corpus({step_doc()});
    GoldEvidenceMap gold_map{{"c1", {"g1"}}, {"c2", {"g1", "ghost"}}};
    try {
        validate_gold_map(gold_map, corpus);
        FAIL("expected UnknownGoldDocError");
    } catch (const UnknownGoldDocError& error) {
        CHECK(std::string(error.what()).find("ghost") != std::string::npos);
    }
    GoldEvidenceMap clean{{"c1", {"g1"}}};
    CHECK_NOTHROW(validate_gold_map(clean, corpus));
}
