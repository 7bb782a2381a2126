#include "bidev/roles.hpp"

#include <algorithm>
#include <cctype>

#include "bidev/errors.hpp"
#include "bidev/util.hpp"

namespace bidev {

std::string to_string(DecompositionStrategy strategy) {
    switch (strategy) {
        case DecompositionStrategy::Direct: return "direct";
        case DecompositionStrategy::Naive: return "naive";
        case DecompositionStrategy::Bidev: return "bidev";
    }
    return "unknown";
}

DecompositionStrategy parse_strategy(const std::string& text) {
    if (text == "direct") return DecompositionStrategy::Direct;
    if (text == "naive") return DecompositionStrategy::Naive;
    if (text == "bidev") return DecompositionStrategy::Bidev;
    throw Error("unknown decomposition strategy: \"" + text + "\"");
}

namespace {

std::string lowercase(const std::string& text) {
    std::string out = text;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Strips a leading "Q:" or "Question:" marker, case-insensitive.
bool strip_question_marker(const std::string& line, std::string& rest) {
    const std::string lower = lowercase(line);
    for (const char* marker : {"q:", "question:"}) {
        const std::size_t len = std::string(marker).size();
        if (lower.rfind(marker, 0) == 0) {
            rest = trim(line.substr(len));
            return true;
        }
    }
    return false;
}

}  // namespace

PerceptionResult parse_perception(const std::string& raw, const RoleOptions& options) {
    const auto lines = split_lines(raw);

    std::string first_non_blank;
    for (const auto& line : lines) {
        first_non_blank = trim(line);
        if (!first_non_blank.empty()) break;
    }
    if (first_non_blank == options.resolved_sentinel) {
        PerceptionResult result;
        result.outcome = PerceptionResult::Outcome::Resolved;
        return result;
    }

    PerceptionResult result;
    for (const auto& raw_line : lines) {
        const std::string line = trim(raw_line);
        if (line.empty()) continue;

        const std::string lower = lowercase(line);
        if (lower.rfind("kind:", 0) == 0) {
            const std::string kind = lower.substr(5);
            if (kind.find("entity") != std::string::npos) {
                result.latent_kind = LatentKind::UnresolvedEntity;
            } else if (kind.find("attribute") != std::string::npos) {
                result.latent_kind = LatentKind::UndeterminedAttribute;
            }
            continue;
        }
        if (result.question) continue;

        std::string question_text;
        if (strip_question_marker(line, question_text)) {
            if (!question_text.empty()) result.question = Question{question_text};
        } else if (line.back() == '?') {
            result.question = Question{line};
        }
    }
    if (!result.question) throw UnparseableRoleOutputError("perceptor", raw);
    result.outcome = PerceptionResult::Outcome::Question;
    return result;
}

std::vector<std::string> parse_sub_claims(const std::string& raw) {
    std::vector<std::string> sub_claims;
    for (const auto& raw_line : split_lines(raw)) {
        const std::string line = trim(raw_line);
        if (line.empty()) continue;

        std::size_t pos = 0;
        while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
        std::string text;
        if (pos > 0 && pos < line.size() && (line[pos] == '.' || line[pos] == ')')) {
            text = trim(line.substr(pos + 1));
        } else if (line.size() > 1 && (line[0] == '-' || line[0] == '*') && line[1] == ' ') {
            text = trim(line.substr(2));
        } else {
            continue;  // not a list item
        }
        if (!text.empty()) sub_claims.push_back(text);
    }
    if (sub_claims.empty()) throw UnparseableRoleOutputError("decomposer", raw);
    return sub_claims;
}

Label parse_verdict_label(const std::string& raw) {
    struct Keyword {
        const char* text;
        Label label;
    };
    // "not support" must outrank its suffix "support" at the same position.
    static const Keyword keywords[] = {
        {"not support", Label::Refute}, {"support", Label::Support}, {"refute", Label::Refute},
        {"false", Label::Refute},       {"true", Label::Support},
    };
    const std::string lower = lowercase(raw);
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    Label best_label = Label::Refute;
    for (const auto& keyword : keywords) {
        const std::size_t pos = lower.find(keyword.text);
        if (pos == std::string::npos) continue;
        const std::size_t len = std::string(keyword.text).size();
        if (pos < best_pos || (pos == best_pos && len > best_len)) {
            best_pos = pos;
            best_len = len;
            best_label = keyword.label;
        }
    }
    if (best_pos == std::string::npos) throw UnparseableVerdictError(raw);
    return best_label;
}

bool parse_relevance(const std::string& raw) {
    const std::string trimmed = trim(raw);
    std::size_t end = 0;
    while (end < trimmed.size() && !std::isspace(static_cast<unsigned char>(trimmed[end]))) ++end;
    std::string token = lowercase(trimmed.substr(0, end));
    while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) token.pop_back();
    if (token == "yes") return true;
    if (token == "no") return false;
    throw UnparseableRoleOutputError("filter", raw);
}

std::vector<std::string> segment_paragraphs(const std::vector<std::string>& raw_evidence_texts) {
    std::vector<std::string> paragraphs;
    for (const auto& text : raw_evidence_texts) {
        std::string current;
        auto flush = [&] {
            const std::string fragment = trim(current);
            if (!fragment.empty()) paragraphs.push_back(fragment);
            current.clear();
        };
        for (const auto& line : split_lines(text)) {
            if (trim(line).empty()) {
                flush();
            } else {
                if (!current.empty()) current += '\n';
                current += line;
            }
        }
        flush();
    }
    return paragraphs;
}

// ---- RoleEngine ----

RoleEngine::RoleEngine(TextBackend& backend, const TemplateLibrary& templates, RoleOptions options)
    : backend_(backend), templates_(templates), options_(std::move(options)) {}

std::string RoleEngine::call(Role role, const std::string& template_name,
                             const std::map<std::string, std::string>& bindings) const {
    GenerationRequest request;
    request.role = role;
    request.prompt = render(templates_.get(template_name), bindings);
    request.temperature = options_.temperature;
    request.max_tokens = options_.max_tokens;
    return backend_.generate(request).text;
}

std::string RoleEngine::evidence_block(const EvidenceBundle& evidence) const {
    const auto kept = evidence.filtered_paragraphs();
    if (kept.empty()) return options_.no_evidence_marker;
    std::string block;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i > 0) block += "\n\n";
        block += kept[i];
    }
    return block;
}

PerceptionResult RoleEngine::perceive(const Claim& claim) const {
    if (claim.origin == ClaimOrigin::SubClaim) {
        throw ContractError("perceive expects an original or rewritten claim");
    }
    return parse_perception(call(Role::Perceptor, "perceptor", {{"claim", claim.text}}), options_);
}

Answer RoleEngine::query(const Question& question, const EvidenceBundle& evidence) const {
    if (evidence.query_text != question.text) {
        throw ContractError("evidence bundle was gathered for a different query");
    }
    if (evidence.kept_mask.size() != evidence.raw_paragraphs.size()) {
        throw ContractError("evidence bundle has not been filtered");
    }
    const std::string text = call(Role::Querier, "querier",
                                  {{"question", question.text}, {"evidence", evidence_block(evidence)}});
    Answer answer;
    answer.answerable = text != options_.unknown_sentinel;
    answer.text = answer.answerable ? text : options_.unknown_sentinel;
    return answer;
}

Claim RoleEngine::rewrite(const Claim& claim, const Question& question, const Answer& answer) const {
    if (claim.origin == ClaimOrigin::SubClaim) {
        throw ContractError("rewrite expects an original or rewritten claim");
    }
    if (!answer.answerable) return claim;  // unanswered questions never alter the claim
    const std::string text = trim(call(
        Role::Rewriter, "rewriter",
        {{"claim", claim.text}, {"question", question.text}, {"answer", answer.text}}));
    if (text.empty()) throw EmptyRewriteError("rewriter returned blank text");
    return Claim{text, ClaimOrigin::Rewritten};
}

std::vector<Claim> RoleEngine::decompose(const Claim& claim, DecompositionStrategy strategy) const {
    if (strategy == DecompositionStrategy::Direct) {
        return {Claim{claim.text, ClaimOrigin::SubClaim}};
    }
    const std::string template_name =
        strategy == DecompositionStrategy::Naive ? "decomposer_naive" : "decomposer_bidev";
    const auto lines = parse_sub_claims(call(Role::Decomposer, template_name, {{"claim", claim.text}}));
    std::vector<Claim> sub_claims;
    sub_claims.reserve(lines.size());
    for (const auto& line : lines) sub_claims.push_back(Claim{line, ClaimOrigin::SubClaim});
    return sub_claims;
}

Verdict RoleEngine::check(const Claim& sub_claim, const EvidenceBundle& evidence) const {
    if (evidence.kept_mask.size() != evidence.raw_paragraphs.size()) {
        throw ContractError("evidence bundle has not been filtered");
    }
    const std::string raw = call(Role::Checker, "checker",
                                 {{"claim", sub_claim.text}, {"evidence", evidence_block(evidence)}});
    return Verdict{parse_verdict_label(raw), raw};
}

EvidenceBundle RoleEngine::filter(const std::vector<std::string>& paragraphs,
                                  const std::string& query_text) const {
    if (query_text.empty()) throw ContractError("filter requires a non-empty query");
    EvidenceBundle bundle;
    bundle.query_text = query_text;
    bundle.raw_paragraphs = paragraphs;
    if (paragraphs.empty()) return bundle;

    bundle.kept_mask.resize(paragraphs.size(), false);
    bool any_kept = false;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        const std::string raw = call(Role::Filter, "filter",
                                     {{"paragraph", paragraphs[i]}, {"query", query_text}});
        bundle.kept_mask[i] = parse_relevance(raw);
        any_kept = any_kept || bundle.kept_mask[i];
    }
    if (!any_kept) {
        bundle.kept_mask[0] = true;  // never hand downstream roles zero evidence
        bundle.filter_overridden = true;
    }
    return bundle;
}

}  // namespace bidev
