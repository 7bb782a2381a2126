#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bidev {

// The two-value verdict space used throughout the pipeline.
enum class Label { Support, Refute };

std::string to_string(Label label);
Label parse_label(const std::string& text);

// The six role-played model operations.
enum class Role { Perceptor, Querier, Rewriter, Decomposer, Checker, Filter };
inline constexpr int kRoleCount = 6;

std::string to_string(Role role);
Role parse_role(const std::string& text);

enum class ClaimOrigin { Original, Rewritten, SubClaim };

struct Claim {
    std::string text;
    ClaimOrigin origin = ClaimOrigin::Original;
};

struct Question {
    std::string text;
};

// answerable=false means the model replied with the UNKNOWN sentinel.
struct Answer {
    std::string text;
    bool answerable = true;
};

enum class LatentKind { UnresolvedEntity, UndeterminedAttribute };

struct PerceptionResult {
    enum class Outcome { Question, Resolved };
    Outcome outcome = Outcome::Resolved;
    std::optional<Question> question;
    std::optional<LatentKind> latent_kind;
};

struct Verdict {
    Label label = Label::Refute;
    std::string raw_model_text;
};

/// Evidence gathered for one query (a question or a sub-claim): the raw
/// paragraphs in extraction order, a keep/drop mask from the relevance
/// filter, and provenance of the source documents.
struct EvidenceBundle {
    std::string query_text;
    std::vector<std::string> source_doc_ids;
    std::vector<std::string> raw_paragraphs;
    std::vector<bool> kept_mask;
    bool filter_overridden = false;

    // Paragraphs where kept_mask is true, original order preserved.
    std::vector<std::string> filtered_paragraphs() const;
};

}  // namespace bidev
