#pragma once

#include <cstdlib>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "fsim/diag.hpp"
#include "fsim/provider.hpp"

namespace fsim {

struct HttpProviderConfig {
    std::string endpoint;  // e.g. "http://host:port/v1/chat/completions"
    std::string model;
    std::string api_key;
    int timeout_seconds = 120;
    int transport_retries = 2;

    // FSIM_PROVIDER_ENDPOINT / FSIM_PROVIDER_MODEL / FSIM_PROVIDER_API_KEY
    static HttpProviderConfig from_env() {
        HttpProviderConfig c;
        if (const char* e = std::getenv("FSIM_PROVIDER_ENDPOINT")) c.endpoint = e;
        if (const char* m = std::getenv("FSIM_PROVIDER_MODEL")) c.model = m;
        if (const char* k = std::getenv("FSIM_PROVIDER_API_KEY")) c.api_key = k;
        return c;
    }
};

// POSTs {model, messages, temperature, max_tokens} and reads either a flat
// {text, prompt_tokens, completion_tokens} body or the common
// {choices:[{message:{content}}], usage:{...}} shape.
class HttpProvider : public Provider {
  public:
    explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
        if (config_.endpoint.empty())
            throw SimError(DiagCode::ProviderTransport,
                           "no provider endpoint configured (FSIM_PROVIDER_ENDPOINT)");
        auto pos = config_.endpoint.find('/', config_.endpoint.find("//") + 2);
        if (pos == std::string::npos) {
            base_ = config_.endpoint;
            path_ = "/";
        } else {
            base_ = config_.endpoint.substr(0, pos);
            path_ = config_.endpoint.substr(pos);
        }
    }

    ProviderResponse complete(const ProviderRequest& req) override {
        nlohmann::ordered_json body;
        body["model"] = req.model.empty() ? config_.model : req.model;
        body["messages"] = messages_to_json(req.messages);
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_tokens;
        std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
            httplib::Client client(base_);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);
            httplib::Headers headers;
            if (!config_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + config_.api_key);
            auto res = client.Post(path_, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                last_error = "provider returned HTTP " + std::to_string(res->status);
                if (res->status >= 500) continue;
                throw SimError(DiagCode::ProviderTransport, last_error);
            }
            return parse_response(res->body);
        }
        throw SimError(DiagCode::ProviderTransport,
                       "provider unreachable after " +
                           std::to_string(config_.transport_retries + 1) + " attempts: " +
                           last_error);
    }

  private:
    static ProviderResponse parse_response(const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw SimError(DiagCode::ProviderTransport, "provider response is not JSON");
        ProviderResponse out;
        if (j.contains("text") && j["text"].is_string()) {
            out.text = j["text"].get<std::string>();
        } else if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
            const auto& c0 = j["choices"][0];
            if (c0.contains("message") && c0["message"].contains("content"))
                out.text = c0["message"]["content"].get<std::string>();
            else if (c0.contains("text"))
                out.text = c0["text"].get<std::string>();
        }
        if (out.text.empty())
            throw SimError(DiagCode::ProviderTransport, "provider response carries no text");
        const auto& usage = j.contains("usage") ? j["usage"] : j;
        out.prompt_tokens = usage.value("prompt_tokens", 0LL);
        out.completion_tokens = usage.value("completion_tokens", 0LL);
        return out;
    }

    HttpProviderConfig config_;
    std::string base_;
    std::string path_;
};

}  // namespace fsim
