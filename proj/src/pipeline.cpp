#include "bidev/pipeline.hpp"

#include <algorithm>
#include <future>
#include <utility>

#include "bidev/errors.hpp"

namespace bidev {

std::string to_string(EvidenceSetting setting) {
    switch (setting) {
        case EvidenceSetting::Gold: return "gold";
        case EvidenceSetting::Open: return "open";
        case EvidenceSetting::Close: return "close";
    }
    throw ContractError("unhandled evidence setting");
}

EvidenceSetting parse_setting(const std::string& text) {
    if (text == "gold") return EvidenceSetting::Gold;
    if (text == "open") return EvidenceSetting::Open;
    if (text == "close") return EvidenceSetting::Close;
    throw ConfigError("unknown evidence setting: " + text);
}

std::string to_string(AblationFlag flag) {
    switch (flag) {
        case AblationFlag::DisablePerceptor: return "disable_perceptor";
        case AblationFlag::DisableRewriter: return "disable_rewriter";
        case AblationFlag::DisableDecomposer: return "disable_decomposer";
        case AblationFlag::DisableFilter: return "disable_filter";
    }
    throw ContractError("unhandled ablation flag");
}

AblationFlag parse_ablation(const std::string& text) {
    if (text == "disable_perceptor") return AblationFlag::DisablePerceptor;
    if (text == "disable_rewriter") return AblationFlag::DisableRewriter;
    if (text == "disable_decomposer") return AblationFlag::DisableDecomposer;
    if (text == "disable_filter") return AblationFlag::DisableFilter;
    throw ConfigError("unknown ablation flag: " + text);
}

void PipelineConfig::validate() const {
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    if (!(bm25_k1 > 0.0)) throw ConfigError("bm25_k1 must be > 0");
    if (!(bm25_b >= 0.0 && bm25_b <= 1.0)) throw ConfigError("bm25_b must be in [0, 1]");
}

nlohmann::json config_to_json(const PipelineConfig& config) {
    nlohmann::json ablation = nlohmann::json::array();
    for (AblationFlag flag : config.ablation) ablation.push_back(to_string(flag));
    return nlohmann::json{
        {"max_iterations", config.max_iterations},
        {"top_k", config.top_k},
        {"setting", to_string(config.setting)},
        {"strategy", to_string(config.strategy)},
        {"ablation", ablation},
        {"bm25_k1", config.bm25_k1},
        {"bm25_b", config.bm25_b},
        {"parallel_subclaims", config.parallel_subclaims},
    };
}

PipelineConfig config_from_json(const nlohmann::json& json) {
    if (!json.is_object()) throw ConfigError("pipeline config must be a JSON object");
    PipelineConfig config;
    for (const auto& [key, value] : json.items()) {
        if (key == "max_iterations") {
            config.max_iterations = value.get<int>();
        } else if (key == "top_k") {
            config.top_k = value.get<int>();
        } else if (key == "setting") {
            config.setting = parse_setting(value.get<std::string>());
        } else if (key == "strategy") {
            config.strategy = parse_strategy(value.get<std::string>());
        } else if (key == "ablation") {
            for (const auto& entry : value) {
                config.ablation.insert(parse_ablation(entry.get<std::string>()));
            }
        } else if (key == "bm25_k1") {
            config.bm25_k1 = value.get<double>();
        } else if (key == "bm25_b") {
            config.bm25_b = value.get<double>();
        } else if (key == "parallel_subclaims") {
            config.parallel_subclaims = value.get<bool>();
        } else {
            throw ConfigError("unknown pipeline config key: " + key);
        }
    }
    config.validate();
    return config;
}

EvidenceSummary summarize(const EvidenceBundle& bundle) {
    EvidenceSummary summary;
    summary.query_text = bundle.query_text;
    summary.source_doc_ids = bundle.source_doc_ids;
    summary.kept_mask = bundle.kept_mask;
    summary.raw_paragraph_count = static_cast<int>(bundle.raw_paragraphs.size());
    summary.kept_paragraph_count =
        static_cast<int>(std::count(bundle.kept_mask.begin(), bundle.kept_mask.end(), true));
    summary.filter_overridden = bundle.filter_overridden;
    return summary;
}

namespace {

nlohmann::json summary_to_json(const EvidenceSummary& summary) {
    nlohmann::json mask = nlohmann::json::array();
    for (bool kept : summary.kept_mask) mask.push_back(kept);
    return nlohmann::json{
        {"query_text", summary.query_text},
        {"source_doc_ids", summary.source_doc_ids},
        {"kept_mask", mask},
        {"raw_paragraph_count", summary.raw_paragraph_count},
        {"kept_paragraph_count", summary.kept_paragraph_count},
        {"filter_overridden", summary.filter_overridden},
    };
}

nlohmann::json iteration_to_json(const IterationRecord& record) {
    return nlohmann::json{
        {"question", record.question},
        {"answer", record.answer},
        {"answer_unknown", record.answer_unknown},
        {"evidence", summary_to_json(record.evidence)},
        {"rewritten_claim", record.rewritten_claim},
        {"rewrite_skipped", record.rewrite_skipped},
    };
}

nlohmann::json sub_verdict_to_json(const SubVerdictRecord& record) {
    nlohmann::json json{
        {"label", to_string(record.label)},
        {"evidence", summary_to_json(record.evidence)},
    };
    json["warning"] = record.warning ? nlohmann::json(*record.warning) : nlohmann::json(nullptr);
    return json;
}

}  // namespace

nlohmann::json trace_to_json(const VerificationTrace& trace) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& record : trace.iterations) iterations.push_back(iteration_to_json(record));
    nlohmann::json sub_verdicts = nlohmann::json::array();
    for (const auto& record : trace.sub_verdicts) sub_verdicts.push_back(sub_verdict_to_json(record));

    nlohmann::json json{
        {"claim_id", trace.claim_id},
        {"original_claim", trace.original_claim},
        {"iterations", iterations},
        {"simplified_claim", trace.simplified_claim},
        {"sub_claims", trace.sub_claims},
        {"sub_verdicts", sub_verdicts},
        {"final_label", to_string(trace.final_label)},
        {"config", config_to_json(trace.config)},
        {"backend_calls_total", trace.backend_calls_total},
        {"backend_calls_per_role", trace.backend_calls_per_role},
        {"retrieval_calls", trace.retrieval_calls},
    };
    json["failure"] = trace.failure ? nlohmann::json(*trace.failure) : nlohmann::json(nullptr);
    return json;
}

void validate_gold_map(const GoldEvidenceMap& gold_map, const CorpusStore& corpus) {
    for (const auto& [claim_id, doc_ids] : gold_map) {
        for (const auto& doc_id : doc_ids) {
            if (corpus.find(doc_id) == nullptr) throw UnknownGoldDocError(doc_id);
        }
    }
}

Verifier::Verifier(std::shared_ptr<TextBackend> backend, const TemplateLibrary& templates,
                   PipelineConfig config, const CorpusStore* corpus, const RetrievalIndex* index,
                   RoleOptions role_options)
    : backend_(std::move(backend)),
      templates_(templates),
      config_(std::move(config)),
      corpus_(corpus),
      index_(index),
      role_options_(std::move(role_options)) {
    if (!backend_) throw ContractError("verifier requires a backend");
    config_.validate();
    if (config_.setting == EvidenceSetting::Gold && corpus_ == nullptr) {
        throw ConfigError("gold setting requires a corpus");
    }
    if (config_.setting == EvidenceSetting::Open && index_ == nullptr) {
        throw ConfigError("open setting requires a retrieval index");
    }
}

EvidenceBundle Verifier::gather_evidence(RoleEngine& roles, const std::string& query_text,
                                         const std::vector<std::string>* gold_doc_ids,
                                         std::atomic<int>* retrieval_calls) const {
    std::vector<std::string> paragraphs;
    std::vector<std::string> source_doc_ids;

    switch (config_.setting) {
        case EvidenceSetting::Gold: {
            if (gold_doc_ids == nullptr) {
                throw ContractError("gold setting requires annotated evidence ids");
            }
            for (const auto& doc_id : *gold_doc_ids) {
                const Document* doc = corpus_->find(doc_id);
                if (doc == nullptr) throw UnknownGoldDocError(doc_id);
                source_doc_ids.push_back(doc_id);
                for (auto& paragraph : segment_paragraphs({doc->evidence_text()})) {
                    paragraphs.push_back(std::move(paragraph));
                }
            }
            break;
        }
        case EvidenceSetting::Open: {
            auto scored = retrieve_top_k(*index_, query_text, config_.top_k,
                                         BM25Params{config_.bm25_k1, config_.bm25_b});
            if (retrieval_calls != nullptr) retrieval_calls->fetch_add(1);
            for (const auto& hit : scored) {
                const Document* doc = index_->find(hit.doc_id);
                if (doc == nullptr) throw ContractError("index returned an unknown doc id");
                source_doc_ids.push_back(hit.doc_id);
                for (auto& paragraph : segment_paragraphs({doc->evidence_text()})) {
                    paragraphs.push_back(std::move(paragraph));
                }
            }
            break;
        }
        case EvidenceSetting::Close:
            break;  // verdicts rest on the model's own knowledge
    }

    EvidenceBundle bundle;
    if (config_.disabled(AblationFlag::DisableFilter)) {
        bundle.query_text = query_text;
        bundle.raw_paragraphs = std::move(paragraphs);
        bundle.kept_mask.assign(bundle.raw_paragraphs.size(), true);
    } else {
        bundle = roles.filter(paragraphs, query_text);
    }
    bundle.source_doc_ids = std::move(source_doc_ids);
    return bundle;
}

Verifier::Stage1Result Verifier::stage1_simplify(RoleEngine& roles, const Claim& claim,
                                                 const std::vector<std::string>* gold_doc_ids,
                                                 std::atomic<int>* retrieval_calls) const {
    Stage1Result result;
    result.simplified = claim;
    if (config_.disabled(AblationFlag::DisablePerceptor)) return result;

    for (int iteration = 0; iteration < config_.max_iterations; ++iteration) {
        PerceptionResult perception = roles.perceive(result.simplified);
        if (perception.outcome == PerceptionResult::Outcome::Resolved) break;

        const Question& question = *perception.question;
        EvidenceBundle evidence =
            gather_evidence(roles, question.text, gold_doc_ids, retrieval_calls);
        Answer answer = roles.query(question, evidence);

        IterationRecord record;
        record.question = question.text;
        record.answer = answer.text;
        record.answer_unknown = !answer.answerable;
        record.evidence = summarize(evidence);

        if (!answer.answerable || config_.disabled(AblationFlag::DisableRewriter)) {
            record.rewritten_claim = result.simplified.text;
            record.rewrite_skipped = true;
        } else {
            Claim rewritten = roles.rewrite(result.simplified, question, answer);
            record.rewritten_claim = rewritten.text;
            result.simplified = std::move(rewritten);
        }
        result.iterations.push_back(std::move(record));
    }
    return result;
}

Verifier::Stage2Result Verifier::stage2_verify(RoleEngine& roles, const Claim& simplified,
                                               const std::vector<std::string>* gold_doc_ids,
                                               std::atomic<int>* retrieval_calls) const {
    const DecompositionStrategy strategy = config_.disabled(AblationFlag::DisableDecomposer)
                                               ? DecompositionStrategy::Direct
                                               : config_.strategy;
    std::vector<Claim> sub_claims = roles.decompose(simplified, strategy);

    Stage2Result result;
    result.sub_claims.reserve(sub_claims.size());
    for (const auto& sub : sub_claims) result.sub_claims.push_back(sub.text);

    auto check_one = [&](const Claim& sub) -> SubVerdictRecord {
        EvidenceBundle evidence = gather_evidence(roles, sub.text, gold_doc_ids, retrieval_calls);
        SubVerdictRecord record;
        record.evidence = summarize(evidence);
        try {
            record.label = roles.check(sub, evidence).label;
        } catch (const UnparseableVerdictError& error) {
            record.label = Label::Refute;  // conservative fallback, kept visible in the trace
            record.warning = error.what();
        }
        return record;
    };

    if (config_.parallel_subclaims && sub_claims.size() > 1) {
        std::vector<std::future<SubVerdictRecord>> futures;
        futures.reserve(sub_claims.size());
        for (const auto& sub : sub_claims) {
            futures.push_back(std::async(std::launch::async, check_one, std::cref(sub)));
        }
        for (auto& future : futures) result.verdicts.push_back(future.get());
    } else {
        for (const auto& sub : sub_claims) result.verdicts.push_back(check_one(sub));
    }
    return result;
}

Label Verifier::aggregate(const std::vector<Label>& verdicts) {
    if (verdicts.empty()) throw EmptyVerdictListError();
    for (Label label : verdicts) {
        if (label != Label::Support) return Label::Refute;
    }
    return Label::Support;
}

VerificationOutcome Verifier::verify(const std::string& claim_id, const std::string& claim_text,
                                     const std::vector<std::string>* gold_doc_ids) const {
    auto recorder = std::make_shared<CallRecorder>(backend_);
    RoleEngine roles(*recorder, templates_, role_options_);
    std::atomic<int> retrieval_calls{0};

    VerificationOutcome outcome;
    outcome.trace.claim_id = claim_id;
    outcome.trace.original_claim = claim_text;
    outcome.trace.simplified_claim = claim_text;
    outcome.trace.config = config_;
    outcome.ok = true;

    try {
        if (claim_text.empty()) throw ContractError("claim text must be non-empty");
        Claim claim{claim_text, ClaimOrigin::Original};
        Stage1Result stage1 = stage1_simplify(roles, claim, gold_doc_ids, &retrieval_calls);
        outcome.trace.iterations = std::move(stage1.iterations);
        outcome.trace.simplified_claim = stage1.simplified.text;

        Stage2Result stage2 =
            stage2_verify(roles, stage1.simplified, gold_doc_ids, &retrieval_calls);
        outcome.trace.sub_claims = std::move(stage2.sub_claims);
        outcome.trace.sub_verdicts = std::move(stage2.verdicts);

        std::vector<Label> labels;
        labels.reserve(outcome.trace.sub_verdicts.size());
        for (const auto& record : outcome.trace.sub_verdicts) labels.push_back(record.label);
        outcome.trace.final_label = aggregate(labels);
    } catch (const std::exception& error) {
        outcome.ok = false;
        outcome.error = error.what();
        outcome.trace.failure = error.what();
        outcome.trace.final_label = Label::Refute;
    }

    outcome.label = outcome.trace.final_label;
    outcome.trace.backend_calls_total = recorder->total_calls();
    for (int i = 0; i < kRoleCount; ++i) {
        const Role role = static_cast<Role>(i);
        const int calls = recorder->calls_for(role);
        if (calls > 0) outcome.trace.backend_calls_per_role[to_string(role)] = calls;
    }
    outcome.trace.retrieval_calls = retrieval_calls.load();
    return outcome;
}

}  // namespace bidev
