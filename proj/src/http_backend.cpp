#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bidev/backend.hpp"
#include "bidev/errors.hpp"
#include "bidev/util.hpp"

namespace bidev {

namespace {

// Splits "http://host:port/path" into (scheme://host:port, /path).
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("backend url must include scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.url.empty()) throw ConfigError("http backend requires a url");
    if (config_.model.empty()) throw ConfigError("http backend requires a model name");
    if (config_.api_key.empty()) {
        const char* env_key = std::getenv("BIDEV_API_KEY");
        if (env_key != nullptr) config_.api_key = env_key;
    }
    if (config_.api_key.empty()) {
        throw ConfigError("http backend requires a credential (set BIDEV_API_KEY)");
    }
}

std::string HttpBackend::backend_id() const {
    return "http:" + config_.model + "@" + config_.url;
}

GenerationResponse HttpBackend::generate(const GenerationRequest& request) {
    validate_request(request);
    const auto [base, path] = split_url(config_.url);

    nlohmann::json payload{
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    const std::string body = payload.dump();

    std::string last_error;
    int last_status = 0;
    std::string last_body;
    int backoff_ms = config_.initial_backoff_ms;

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client client(base);
        client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
        client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
        client.set_default_headers({{"Authorization", "Bearer " + config_.api_key}});

        auto result = client.Post(path, body, "application/json");
        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;
        }
        if (result->status >= 200 && result->status < 300) {
            nlohmann::json reply;
            try {
                reply = nlohmann::json::parse(result->body);
                const std::string text =
                    reply.at("choices").at(0).at("message").at("content").get<std::string>();
                return {rtrim(text), backend_id(), false};
            } catch (const nlohmann::json::exception& e) {
                throw BackendRejectedError(result->status,
                                           std::string("malformed completion body: ") + e.what());
            }
        }
        if (!retryable_status(result->status)) {
            throw BackendRejectedError(result->status, result->body);
        }
        last_status = result->status;
        last_body = result->body;
    }

    if (last_status != 0) throw BackendRejectedError(last_status, last_body);
    throw BackendUnreachableError("backend unreachable after " +
                                  std::to_string(config_.max_retries + 1) + " attempts: " +
                                  last_error);
}

}  // namespace bidev
