#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bidev/types.hpp"

namespace bidev {

/// A role prompt: fixed instruction, ordered few-shot demonstrations, and a
/// query block holding {{name}} placeholders that render() fills in.
///
/// Template file format (UTF-8, blocks separated by a line containing only
/// "---"):
///   block 0             instruction
///   blocks 1..2n        demonstration pairs (input block, output block)
///   last block          query block with {{name}} placeholders
/// A file with a single block is treated as a bare query block.
struct PromptTemplate {
    Role role = Role::Perceptor;
    std::string instruction;
    std::vector<std::pair<std::string, std::string>> demonstrations;
    std::string query_block;
    std::set<std::string> slots;

    static PromptTemplate make(Role role, std::string instruction,
                               std::vector<std::pair<std::string, std::string>> demonstrations,
                               std::string query_block);
};

// Parses the block format described above. Throws TemplateFormatError on an
// odd number of demonstration blocks or an empty file.
PromptTemplate parse_template(Role role, const std::string& file_text);

// Substitutes bindings into the template and assembles the full prompt:
// instruction, demonstrations in order, rendered query block. Every slot must
// be bound (MissingBindingError) and every binding must name a slot
// (UnknownBindingError).
std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

/// Role templates loaded from a directory of <name>.txt files. The pipeline
/// expects: perceptor, querier, rewriter, decomposer_naive, decomposer_bidev,
/// checker, filter. The role of each file is taken from the name's first
/// underscore-separated word.
class TemplateLibrary {
public:
    static TemplateLibrary load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(const std::string& name) const;
    bool has(const std::string& name) const { return templates_.count(name) > 0; }
    void put(const std::string& name, PromptTemplate tmpl);

    // Throws ConfigError naming the first missing pipeline template.
    void require_pipeline_templates() const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace bidev
