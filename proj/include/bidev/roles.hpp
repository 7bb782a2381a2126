#pragma once

#include <string>
#include <vector>

#include "bidev/backend.hpp"
#include "bidev/prompt.hpp"
#include "bidev/types.hpp"

namespace bidev {

enum class DecompositionStrategy { Direct, Naive, Bidev };

std::string to_string(DecompositionStrategy strategy);
DecompositionStrategy parse_strategy(const std::string& text);

struct RoleOptions {
    std::string resolved_sentinel = "NO LATENT INFORMATION";
    std::string unknown_sentinel = "UNKNOWN";
    std::string no_evidence_marker = "(no evidence available)";
    double temperature = 0.0;
    int max_tokens = 512;
};

// ---- output parsers (grammar documented in PARSING.md) ----

// Resolved sentinel on the first non-blank line wins; otherwise the first
// question-formatted line ("Q:"/"Question:" prefix, or a line ending in '?')
// becomes the question. An optional "KIND:" line tags the latent category.
PerceptionResult parse_perception(const std::string& raw, const RoleOptions& options = {});

// Numbered ("1." / "1)") or bulleted ("-" / "*") lines, one sub-claim each.
std::vector<std::string> parse_sub_claims(const std::string& raw);

// First occurrence of a label keyword, longest match first:
// support/true -> Support; refute/false/not support -> Refute.
Label parse_verdict_label(const std::string& raw);

// First token YES/NO, case-insensitive, trailing punctuation ignored.
bool parse_relevance(const std::string& raw);

// Splits each text on blank-line boundaries; fragments trimmed, empties
// dropped, document order then in-document order preserved.
std::vector<std::string> segment_paragraphs(const std::vector<std::string>& raw_evidence_texts);

/// The six role-played model operations, bound to a backend and a template
/// library. Stateless apart from those handles; safe for concurrent use.
class RoleEngine {
public:
    RoleEngine(TextBackend& backend, const TemplateLibrary& templates, RoleOptions options = {});

    PerceptionResult perceive(const Claim& claim) const;

    // Precondition: evidence.query_text == question.text and the bundle has
    // been filtered. Only kept paragraphs reach the prompt.
    Answer query(const Question& question, const EvidenceBundle& evidence) const;

    // Skipped (input returned unchanged) when the answer is unanswerable.
    Claim rewrite(const Claim& claim, const Question& question, const Answer& answer) const;

    // Direct returns the claim verbatim without a model call.
    std::vector<Claim> decompose(const Claim& claim, DecompositionStrategy strategy) const;

    Verdict check(const Claim& sub_claim, const EvidenceBundle& evidence) const;

    // One relevance judgment per paragraph. If every paragraph is judged
    // irrelevant the first one is kept anyway and the bundle is flagged.
    EvidenceBundle filter(const std::vector<std::string>& paragraphs,
                          const std::string& query_text) const;

    const RoleOptions& options() const { return options_; }

private:
    TextBackend& backend_;
    const TemplateLibrary& templates_;
    RoleOptions options_;

    std::string call(Role role, const std::string& template_name,
                     const std::map<std::string, std::string>& bindings) const;
    std::string evidence_block(const EvidenceBundle& evidence) const;
};

}  // namespace bidev
