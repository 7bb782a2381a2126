#include "bidev/backend.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bidev/errors.hpp"
#include "bidev/util.hpp"

namespace bidev {

void validate_request(const GenerationRequest& request) {
    if (request.prompt.empty()) throw ContractError("generation request has empty prompt");
    if (request.temperature < 0.0 || request.temperature > 1.0) {
        throw ContractError("temperature must be in [0,1]");
    }
    if (request.max_tokens <= 0) throw ContractError("max_tokens must be positive");
}

// ---- ScriptedBackend ----

void ScriptedBackend::register_exact(Role role, const std::string& prompt,
                                     const std::string& response) {
    if (prompt.empty()) throw ContractError("exact matcher must be non-empty");
    auto& table = exact_[static_cast<int>(role)];
    if (table.count(prompt) > 0) {
        throw DuplicateExactMatcherError("exact matcher registered twice for role " +
                                         to_string(role) + ": \"" + prompt + "\"");
    }
    table[prompt] = response;
}

void ScriptedBackend::register_substring(Role role, const std::string& pattern,
                                         const std::string& response) {
    if (pattern.empty()) throw ContractError("substring matcher must be non-empty");
    substring_[static_cast<int>(role)].push_back({pattern, response});
}

GenerationResponse ScriptedBackend::generate(const GenerationRequest& request) {
    validate_request(request);
    {
        std::lock_guard<std::mutex> lock(counter_mutex_);
        ++per_role_calls_[static_cast<int>(request.role)];
    }
    const int role_index = static_cast<int>(request.role);
    if (auto it = exact_[role_index].find(request.prompt); it != exact_[role_index].end()) {
        return {rtrim(it->second), backend_id(), false};
    }
    for (const auto& rule : substring_[role_index]) {
        if (request.prompt.find(rule.pattern) != std::string::npos) {
            return {rtrim(rule.response), backend_id(), false};
        }
    }
    throw ScriptMissError("no scripted response for role " + to_string(request.role) +
                          ", prompt: \"" + request.prompt + "\"");
}

int ScriptedBackend::total_calls() const {
    std::lock_guard<std::mutex> lock(counter_mutex_);
    int total = 0;
    for (int count : per_role_calls_) total += count;
    return total;
}

int ScriptedBackend::calls_for(Role role) const {
    std::lock_guard<std::mutex> lock(counter_mutex_);
    return per_role_calls_[static_cast<int>(role)];
}

void ScriptedBackend::reset_counters() {
    std::lock_guard<std::mutex> lock(counter_mutex_);
    per_role_calls_.fill(0);
}

void load_script_fixture(ScriptedBackend& backend, const std::filesystem::path& path) {
    for_each_jsonl_line(path, [&](int line_number, const std::string& line) {
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad script fixture line " + std::to_string(line_number) + ": " +
                              e.what());
        }
        const Role role = parse_role(record.at("role").get<std::string>());
        const std::string match = record.at("match").get<std::string>();
        const std::string pattern = record.at("pattern").get<std::string>();
        const std::string response = record.at("response").get<std::string>();
        if (match == "exact") {
            backend.register_exact(role, pattern, response);
        } else if (match == "substring") {
            backend.register_substring(role, pattern, response);
        } else {
            throw ConfigError("bad script fixture line " + std::to_string(line_number) +
                              ": match must be \"exact\" or \"substring\"");
        }
    });
}

// ---- CachingBackend ----

std::string CachingBackend::cache_key(const std::string& backend_id,
                                      const GenerationRequest& request) {
    char temperature[32];
    std::snprintf(temperature, sizeof(temperature), "%.17g", request.temperature);
    std::string canonical;
    canonical.reserve(backend_id.size() + request.prompt.size() + 48);
    canonical += backend_id;
    canonical += '\x1e';
    canonical += to_string(request.role);
    canonical += '\x1e';
    canonical += request.prompt;
    canonical += '\x1e';
    canonical += temperature;
    canonical += '\x1e';
    canonical += std::to_string(request.max_tokens);
    return to_hex(fnv1a64(canonical));
}

CachingBackend::CachingBackend(std::shared_ptr<TextBackend> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(cache_dir_);
    load_existing();
}

void CachingBackend::load_existing() {
    for (int role_index = 0; role_index < kRoleCount; ++role_index) {
        const auto path = cache_dir_ / (to_string(static_cast<Role>(role_index)) + ".jsonl");
        if (!std::filesystem::exists(path)) continue;
        for_each_jsonl_line(path, [&](int, const std::string& line) {
            auto record = nlohmann::json::parse(line);
            entries_[role_index][record.at("key").get<std::string>()] =
                record.at("value").get<std::string>();
        });
    }
}

void CachingBackend::append_record(Role role, const std::string& key, const std::string& value) {
    const auto path = cache_dir_ / (to_string(role) + ".jsonl");
    nlohmann::json record{{"key", key}, {"value", value}, {"created_at", iso8601_now()}};
    std::ofstream out(path, std::ios::app);
    out << record.dump() << '\n';
}

GenerationResponse CachingBackend::generate(const GenerationRequest& request) {
    validate_request(request);
    const std::string key = cache_key(inner_->backend_id(), request);
    const int role_index = static_cast<int>(request.role);
    {
        std::shared_lock<std::shared_mutex> lock(mutex_);
        if (auto it = entries_[role_index].find(key); it != entries_[role_index].end()) {
            return {it->second, inner_->backend_id(), true};
        }
    }
    GenerationResponse response = inner_->generate(request);
    {
        std::unique_lock<std::shared_mutex> lock(mutex_);
        auto [it, inserted] = entries_[role_index].emplace(key, response.text);
        if (inserted) append_record(request.role, key, response.text);
    }
    response.cached = false;
    return response;
}

}  // namespace bidev
