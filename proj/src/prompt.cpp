#include "bidev/prompt.hpp"

#include <algorithm>

#include "bidev/errors.hpp"
#include "bidev/util.hpp"

namespace bidev {

namespace {

bool is_slot_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Finds {{name}} placeholders in text.
std::set<std::string> scan_slots(const std::string& text) {
    std::set<std::string> slots;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        std::size_t name_start = pos + 2;
        std::size_t end = name_start;
        while (end < text.size() && is_slot_char(text[end])) ++end;
        if (end > name_start && end + 1 < text.size() && text[end] == '}' && text[end + 1] == '}') {
            slots.insert(text.substr(name_start, end - name_start));
            pos = end + 2;
        } else {
            pos = name_start;
        }
    }
    return slots;
}

std::string substitute(const std::string& text, const std::map<std::string, std::string>& bindings) {
    std::string out = text;
    for (const auto& [name, value] : bindings) {
        const std::string marker = "{{" + name + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace

PromptTemplate PromptTemplate::make(Role role, std::string instruction,
                                    std::vector<std::pair<std::string, std::string>> demonstrations,
                                    std::string query_block) {
    PromptTemplate tmpl;
    tmpl.role = role;
    tmpl.instruction = std::move(instruction);
    tmpl.demonstrations = std::move(demonstrations);
    tmpl.query_block = std::move(query_block);
    tmpl.slots = scan_slots(tmpl.instruction);
    for (const auto& slot : scan_slots(tmpl.query_block)) tmpl.slots.insert(slot);
    return tmpl;
}

PromptTemplate parse_template(Role role, const std::string& file_text) {
    std::vector<std::string> blocks;
    std::string current;
    bool first_line_of_block = true;
    for (const auto& line : split_lines(file_text)) {
        if (trim(line) == "---") {
            blocks.push_back(current);
            current.clear();
            first_line_of_block = true;
            continue;
        }
        if (!first_line_of_block) current += '\n';
        current += line;
        first_line_of_block = false;
    }
    blocks.push_back(current);

    std::vector<std::string> trimmed;
    for (auto& block : blocks) trimmed.push_back(trim(block));
    while (!trimmed.empty() && trimmed.back().empty()) trimmed.pop_back();

    if (trimmed.empty()) throw TemplateFormatError("template file is empty");
    if (trimmed.size() == 1) return PromptTemplate::make(role, "", {}, trimmed[0]);

    const std::size_t demo_blocks = trimmed.size() - 2;
    if (demo_blocks % 2 != 0) {
        throw TemplateFormatError("demonstration blocks must come in input/output pairs");
    }
    std::vector<std::pair<std::string, std::string>> demos;
    for (std::size_t i = 1; i + 1 < trimmed.size(); i += 2) {
        demos.emplace_back(trimmed[i], trimmed[i + 1]);
    }
    return PromptTemplate::make(role, trimmed[0], std::move(demos), trimmed.back());
}

std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
    for (const auto& slot : tmpl.slots) {
        if (bindings.count(slot) == 0) throw MissingBindingError(slot);
    }
    for (const auto& [name, value] : bindings) {
        if (tmpl.slots.count(name) == 0) throw UnknownBindingError(name);
    }

    std::string prompt;
    if (!tmpl.instruction.empty()) {
        prompt += substitute(tmpl.instruction, bindings);
        prompt += "\n\n";
    }
    for (const auto& [input, output] : tmpl.demonstrations) {
        prompt += input;
        prompt += '\n';
        prompt += output;
        prompt += "\n\n";
    }
    prompt += substitute(tmpl.query_block, bindings);
    return prompt;
}

TemplateLibrary TemplateLibrary::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("template directory not found: " + dir.string());
    }
    TemplateLibrary library;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const std::string name = path.stem().string();
        const std::string role_word = name.substr(0, name.find('_'));
        Role role;
        try {
            role = parse_role(role_word);
        } catch (const Error&) {
            throw ConfigError("template file name does not start with a role name: " + path.string());
        }
        library.put(name, parse_template(role, read_file(path)));
    }
    return library;
}

const PromptTemplate& TemplateLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no template named \"" + name + "\"");
    return it->second;
}

void TemplateLibrary::put(const std::string& name, PromptTemplate tmpl) {
    templates_[name] = std::move(tmpl);
}

void TemplateLibrary::require_pipeline_templates() const {
    for (const char* name : {"perceptor", "querier", "rewriter", "decomposer_naive",
                             "decomposer_bidev", "checker", "filter"}) {
        if (!has(name)) throw ConfigError(std::string("missing template: ") + name);
    }
}

}  // namespace bidev
