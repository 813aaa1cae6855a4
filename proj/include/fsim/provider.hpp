#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsim/diag.hpp"
#include "fsim/rng.hpp"

namespace fsim {

struct Message {
    std::string role;
    std::string content;
};

struct ProviderRequest {
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 2048;
    std::string model;
};

struct ProviderResponse {
    std::string text;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

inline nlohmann::ordered_json messages_to_json(const std::vector<Message>& messages) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& m : messages) {
        nlohmann::ordered_json mj;
        mj["role"] = m.role;
        mj["content"] = m.content;
        arr.push_back(std::move(mj));
    }
    return arr;
}

// Stable identity of a request: hash of the canonical message serialization.
// Sampling parameters are deliberately excluded so a cassette survives
// temperature tweaks.
inline std::string request_fingerprint(const ProviderRequest& req) {
    std::string canon = messages_to_json(req.messages).dump();
    std::uint64_t h = fnv1a64(canon);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

class Provider {
  public:
    virtual ~Provider() = default;
    virtual ProviderResponse complete(const ProviderRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Cassettes: ordered request/response records for deterministic offline runs.

struct CassetteRecord {
    std::string request_fingerprint;
    std::string response_text;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct Cassette {
    std::vector<CassetteRecord> records;

    static Cassette parse(const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("records") ||
            !j["records"].is_array())
            throw SimError(DiagCode::SchemaError,
                           "cassette must be a JSON object with a records array");
        Cassette c;
        for (const auto& r : j["records"]) {
            if (!r.is_object() || !r.contains("response_text"))
                throw SimError(DiagCode::SchemaError, "cassette record missing response_text");
            CassetteRecord rec;
            rec.request_fingerprint = r.value("request_fingerprint", std::string());
            rec.response_text = r["response_text"].get<std::string>();
            rec.prompt_tokens = r.value("prompt_tokens", 0LL);
            rec.completion_tokens = r.value("completion_tokens", 0LL);
            c.records.push_back(std::move(rec));
        }
        return c;
    }

    static Cassette load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw SimError(DiagCode::SchemaError, "cannot open cassette file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["records"] = nlohmann::ordered_json::array();
        for (const auto& r : records) {
            nlohmann::ordered_json rj;
            rj["request_fingerprint"] = r.request_fingerprint;
            rj["response_text"] = r.response_text;
            rj["prompt_tokens"] = r.prompt_tokens;
            rj["completion_tokens"] = r.completion_tokens;
            j["records"].push_back(std::move(rj));
        }
        return j;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw SimError(DiagCode::SchemaError, "cannot write cassette file: " + path);
        out << to_json().dump(2) << "\n";
    }
};

// Serves recorded responses in order. Strict mode additionally requires each
// incoming request to hash to the recorded fingerprint, so a drifted prompt
// fails loudly instead of desynchronizing the run.
class ReplayProvider : public Provider {
  public:
    ReplayProvider(Cassette cassette, bool strict)
        : cassette_(std::move(cassette)), strict_(strict) {}

    ProviderResponse complete(const ProviderRequest& req) override {
        std::lock_guard<std::mutex> lock(mu_);
        if (cursor_ >= cassette_.records.size())
            throw SimError(DiagCode::CassetteExhausted,
                           "cassette exhausted after " + std::to_string(cursor_) + " records");
        const CassetteRecord& rec = cassette_.records[cursor_];
        if (strict_) {
            std::string fp = request_fingerprint(req);
            if (!rec.request_fingerprint.empty() && fp != rec.request_fingerprint)
                throw SimError(DiagCode::ReplayMismatch,
                               "request fingerprint " + fp + " does not match record " +
                                   std::to_string(cursor_) + " (" + rec.request_fingerprint +
                                   ")");
        }
        ++cursor_;
        return {rec.response_text, rec.prompt_tokens, rec.completion_tokens};
    }

    std::size_t consumed() const { return cursor_; }

  private:
    Cassette cassette_;
    bool strict_;
    std::size_t cursor_ = 0;
    std::mutex mu_;
};

// Wraps a provider and captures every exchange as a cassette record.
class RecordingProvider : public Provider {
  public:
    explicit RecordingProvider(Provider& inner) : inner_(inner) {}

    ProviderResponse complete(const ProviderRequest& req) override {
        ProviderResponse resp = inner_.complete(req);
        std::lock_guard<std::mutex> lock(mu_);
        cassette_.records.push_back({request_fingerprint(req), resp.text, resp.prompt_tokens,
                                     resp.completion_tokens});
        return resp;
    }

    const Cassette& cassette() const { return cassette_; }

  private:
    Provider& inner_;
    Cassette cassette_;
    std::mutex mu_;
};

// Hands out a fixed response sequence; token counts approximate length/4 so
// accounting paths stay nontrivial in tests.
class ScriptedProvider : public Provider {
  public:
    explicit ScriptedProvider(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}

    ProviderResponse complete(const ProviderRequest& req) override {
        std::lock_guard<std::mutex> lock(mu_);
        if (cursor_ >= responses_.size())
            throw SimError(DiagCode::CassetteExhausted,
                           "scripted provider exhausted after " + std::to_string(cursor_) +
                               " responses");
        long long prompt_chars = 0;
        for (const auto& m : req.messages)
            prompt_chars += static_cast<long long>(m.content.size());
        const std::string& text = responses_[cursor_++];
        return {text, prompt_chars / 4 + 1, static_cast<long long>(text.size()) / 4 + 1};
    }

    std::size_t consumed() const { return cursor_; }

  private:
    std::vector<std::string> responses_;
    std::size_t cursor_ = 0;
    std::mutex mu_;
};

}  // namespace fsim
