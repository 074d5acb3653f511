#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "kgattack/types.hpp"

namespace kgattack {

struct LlmConfig {
    std::string endpoint;  // http://host:port/path, chat-completions shaped
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    int timeout_s = 60;
    int max_retries = 3;  // retries after the first attempt
    int base_delay_ms = 1000;
    /// Raw JSON object merged into the request body; lets callers pass
    /// provider-specific switches (reasoning toggles and the like) without
    /// the client depending on them.
    std::string extra_body;

    static LlmConfig from_env();  // LLM_ENDPOINT / LLM_MODEL / LLM_API_KEY / LLM_TIMEOUT_S
};

struct TokenUsage {
    long prompt = 0;
    long completion = 0;
};

struct LlmResult {
    std::string text;
    double latency_s = 0.0;
    int retries = 0;
    std::optional<TokenUsage> usage;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual LlmResult complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

class HttpLlmBackend : public LlmBackend {
public:
    explicit HttpLlmBackend(LlmConfig config);
    LlmResult complete(const std::string& prompt) override;
    std::string name() const override { return "http/" + config_.model; }

private:
    LlmConfig config_;
};

/// Serves responses recorded in a transcript, keyed by prompt hash; a miss
/// throws. Makes experiments reproducible without endpoint access.
class ReplayBackend : public LlmBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& transcript);
    LlmResult complete(const std::string& prompt) override;
    std::string name() const override { return "replay"; }

private:
    std::unordered_map<std::string, std::string> responses_;
};

/// One-shot convenience wrapper over HttpLlmBackend.
LlmResult query_llm(const std::string& prompt, const LlmConfig& config);

std::string prompt_hash_hex(std::string_view prompt);

struct TranscriptEntry {
    std::string mode;
    std::string target;
    std::string prompt;
    std::string response;
    int decision_index = 0;
    bool fallback_used = false;
};

/// Append-only JSONL audit log of every (prompt, response, decision).
class Transcript {
public:
    explicit Transcript(const std::filesystem::path& path);
    void append(const TranscriptEntry& entry);
    const std::filesystem::path& path() const { return path_; }

    static std::unordered_map<std::string, std::string> load_responses(
        const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

}  // namespace kgattack
