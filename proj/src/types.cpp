#include "bidev/types.hpp"

#include "bidev/errors.hpp"

namespace bidev {

std::string to_string(Label label) {
    return label == Label::Support ? "Support" : "Refute";
}

Label parse_label(const std::string& text) {
    if (text == "Support") return Label::Support;
    if (text == "Refute") return Label::Refute;
    throw Error("unknown label: \"" + text + "\"");
}

std::string to_string(Role role) {
    switch (role) {
        case Role::Perceptor: return "perceptor";
        case Role::Querier: return "querier";
        case Role::Rewriter: return "rewriter";
        case Role::Decomposer: return "decomposer";
        case Role::Checker: return "checker";
        case Role::Filter: return "filter";
    }
    return "unknown";
}

Role parse_role(const std::string& text) {
    if (text == "perceptor") return Role::Perceptor;
    if (text == "querier") return Role::Querier;
    if (text == "rewriter") return Role::Rewriter;
    if (text == "decomposer") return Role::Decomposer;
    if (text == "checker") return Role::Checker;
    if (text == "filter") return Role::Filter;
    throw Error("unknown role: \"" + text + "\"");
}

std::vector<std::string> EvidenceBundle::filtered_paragraphs() const {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < raw_paragraphs.size(); ++i) {
        if (i < kept_mask.size() && kept_mask[i]) kept.push_back(raw_paragraphs[i]);
    }
    return kept;
}

}  // namespace bidev
