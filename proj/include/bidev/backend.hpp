#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "bidev/types.hpp"

namespace bidev {

struct GenerationRequest {
    Role role = Role::Perceptor;
    std::string prompt;
    double temperature = 0.0;  // determinism-first default
    int max_tokens = 512;
};

struct GenerationResponse {
    std::string text;  // verbatim model output, trailing whitespace stripped
    std::string backend_id;
    bool cached = false;
};

/// Uniform text-generation interface. Implementations must be safe for
/// concurrent generate() calls; any mutable setup happens before first use.
class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
    virtual std::string backend_id() const = 0;
};

// Validates prompt non-empty, temperature in [0,1], max_tokens > 0.
// Throws ContractError. Called by every backend on entry.
void validate_request(const GenerationRequest& request);

/// Deterministic test double: returns pre-registered responses keyed by role
/// and prompt. Exact-prompt matches take precedence over substring matches;
/// among substring matches the first registered wins. A request with no
/// matching registration raises ScriptMissError.
class ScriptedBackend final : public TextBackend {
public:
    void register_exact(Role role, const std::string& prompt, const std::string& response);
    void register_substring(Role role, const std::string& pattern, const std::string& response);

    GenerationResponse generate(const GenerationRequest& request) override;
    std::string backend_id() const override { return "scripted"; }

    int total_calls() const;
    int calls_for(Role role) const;
    void reset_counters();

private:
    struct SubstringRule {
        std::string pattern;
        std::string response;
    };
    std::array<std::map<std::string, std::string>, kRoleCount> exact_;
    std::array<std::vector<SubstringRule>, kRoleCount> substring_;
    mutable std::mutex counter_mutex_;
    std::array<int, kRoleCount> per_role_calls_{};
};

// Loads scripted registrations from a JSON-lines fixture:
//   {"role": "...", "match": "exact"|"substring", "pattern": "...", "response": "..."}
void load_script_fixture(ScriptedBackend& backend, const std::filesystem::path& path);

struct HttpBackendConfig {
    std::string url;  // full chat-completions endpoint
    std::string model;
    std::string api_key;  // taken from BIDEV_API_KEY when empty
    int timeout_ms = 30000;
    int max_retries = 3;
    int initial_backoff_ms = 250;  // doubles per retry
};

/// OpenAI-compatible chat-completions client. Retries transport errors and
/// HTTP 429/5xx with exponential backoff; other HTTP errors are surfaced
/// immediately as BackendRejectedError.
class HttpBackend final : public TextBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    GenerationResponse generate(const GenerationRequest& request) override;
    std::string backend_id() const override;

private:
    HttpBackendConfig config_;
};

/// Persistent response cache in front of another backend. Keys are digests of
/// the full request plus the inner backend's identity; records live in one
/// JSON-lines file per role under the cache directory. Hits skip the inner
/// backend entirely and come back with cached=true.
class CachingBackend final : public TextBackend {
public:
    CachingBackend(std::shared_ptr<TextBackend> inner, std::filesystem::path cache_dir);

    GenerationResponse generate(const GenerationRequest& request) override;
    std::string backend_id() const override { return inner_->backend_id(); }

    static std::string cache_key(const std::string& backend_id, const GenerationRequest& request);

private:
    std::shared_ptr<TextBackend> inner_;
    std::filesystem::path cache_dir_;
    mutable std::shared_mutex mutex_;
    std::array<std::map<std::string, std::string>, kRoleCount> entries_;

    void load_existing();
    void append_record(Role role, const std::string& key, const std::string& value);
};

/// Per-run decorator counting generate() calls by role. Thread-safe.
class CallRecorder final : public TextBackend {
public:
    explicit CallRecorder(std::shared_ptr<TextBackend> inner) : inner_(std::move(inner)) {}

    GenerationResponse generate(const GenerationRequest& request) override {
        per_role_[static_cast<int>(request.role)].fetch_add(1, std::memory_order_relaxed);
        return inner_->generate(request);
    }
    std::string backend_id() const override { return inner_->backend_id(); }

    int calls_for(Role role) const {
        return per_role_[static_cast<int>(role)].load(std::memory_order_relaxed);
    }
    int total_calls() const {
        int total = 0;
        for (const auto& counter : per_role_) total += counter.load(std::memory_order_relaxed);
        return total;
    }

private:
    std::shared_ptr<TextBackend> inner_;
    std::array<std::atomic<int>, kRoleCount> per_role_{};
};

}  // namespace bidev
