#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bidev/backend.hpp"
#include "bidev/prompt.hpp"
#include "bidev/retrieval.hpp"
#include "bidev/roles.hpp"
#include "bidev/types.hpp"

namespace bidev {

enum class EvidenceSetting { Gold, Open, Close };

std::string to_string(EvidenceSetting setting);
EvidenceSetting parse_setting(const std::string& text);

enum class AblationFlag { DisablePerceptor, DisableRewriter, DisableDecomposer, DisableFilter };

std::string to_string(AblationFlag flag);
AblationFlag parse_ablation(const std::string& text);

struct PipelineConfig {
    int max_iterations = 3;
    int top_k = 10;
    EvidenceSetting setting = EvidenceSetting::Gold;
    DecompositionStrategy strategy = DecompositionStrategy::Bidev;
    std::set<AblationFlag> ablation;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    bool parallel_subclaims = false;

    bool disabled(AblationFlag flag) const { return ablation.count(flag) > 0; }
    void validate() const;  // throws ConfigError
};

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& json);

struct EvidenceSummary {
    std::string query_text;
    std::vector<std::string> source_doc_ids;
    std::vector<bool> kept_mask;
    int raw_paragraph_count = 0;
    int kept_paragraph_count = 0;
    bool filter_overridden = false;
};

EvidenceSummary summarize(const EvidenceBundle& bundle);

struct IterationRecord {
    std::string question;
    std::string answer;
    bool answer_unknown = false;
    EvidenceSummary evidence;
    std::string rewritten_claim;
    bool rewrite_skipped = false;
};

struct SubVerdictRecord {
    Label label = Label::Refute;
    EvidenceSummary evidence;
    std::optional<std::string> warning;
};

/// Full audit record of one claim's run. Serializes to JSON with sorted keys
/// and no timestamps, so identical runs produce byte-identical traces.
struct VerificationTrace {
    std::string claim_id;
    std::string original_claim;
    std::vector<IterationRecord> iterations;
    std::string simplified_claim;
    std::vector<std::string> sub_claims;
    std::vector<SubVerdictRecord> sub_verdicts;
    Label final_label = Label::Refute;
    PipelineConfig config;
    int backend_calls_total = 0;
    std::map<std::string, int> backend_calls_per_role;
    int retrieval_calls = 0;
    std::optional<std::string> failure;
};

nlohmann::json trace_to_json(const VerificationTrace& trace);

struct VerificationOutcome {
    bool ok = false;
    Label label = Label::Refute;
    std::string error;  // set when !ok
    VerificationTrace trace;
};

// claim_id -> annotated evidence document ids.
using GoldEvidenceMap = std::map<std::string, std::vector<std::string>>;

// Throws UnknownGoldDocError for any id that does not resolve in the corpus.
void validate_gold_map(const GoldEvidenceMap& gold_map, const CorpusStore& corpus);

/// Runs the whole flow for one claim: evidence gathering under the configured
/// setting, the iterative perceive/query/rewrite loop, decomposition with
/// per-sub-claim checking, verdict aggregation, and trace assembly.
///
/// A Verifier is immutable and claims may be verified concurrently; corpus
/// and index (either may be null when the setting does not need them) are
/// borrowed and must outlive it.
class Verifier {
public:
    Verifier(std::shared_ptr<TextBackend> backend, const TemplateLibrary& templates,
             PipelineConfig config, const CorpusStore* corpus = nullptr,
             const RetrievalIndex* index = nullptr, RoleOptions role_options = {});

    VerificationOutcome verify(const std::string& claim_id, const std::string& claim_text,
                               const std::vector<std::string>* gold_doc_ids = nullptr) const;

    // The pieces verify() composes, exposed individually for tests and
    // alternative drivers. retrieval_calls, when given, is bumped once per
    // index query.
    EvidenceBundle gather_evidence(RoleEngine& roles, const std::string& query_text,
                                   const std::vector<std::string>* gold_doc_ids,
                                   std::atomic<int>* retrieval_calls = nullptr) const;

    struct Stage1Result {
        Claim simplified;
        std::vector<IterationRecord> iterations;
    };
    Stage1Result stage1_simplify(RoleEngine& roles, const Claim& claim,
                                 const std::vector<std::string>* gold_doc_ids,
                                 std::atomic<int>* retrieval_calls = nullptr) const;

    struct Stage2Result {
        std::vector<std::string> sub_claims;
        std::vector<SubVerdictRecord> verdicts;
    };
    Stage2Result stage2_verify(RoleEngine& roles, const Claim& simplified,
                               const std::vector<std::string>* gold_doc_ids,
                               std::atomic<int>* retrieval_calls = nullptr) const;

    // Conjunction over the binary label space: Support iff every verdict is
    // Support. Raises EmptyVerdictListError on an empty list.
    static Label aggregate(const std::vector<Label>& verdicts);

    const PipelineConfig& config() const { return config_; }

private:
    std::shared_ptr<TextBackend> backend_;
    const TemplateLibrary& templates_;
    PipelineConfig config_;
    const CorpusStore* corpus_;
    const RetrievalIndex* index_;
    RoleOptions role_options_;
};

}  // namespace bidev
