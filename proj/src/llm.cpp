#include "kgattack/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgattack/linalg.hpp"
#include "kgattack/log.hpp"

namespace kgattack {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? v : fallback;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("bad endpoint URL: " + url);
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http") throw Error("only http endpoints are supported: " + url);
    std::string rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
    return {host, path};
}

}  // namespace

LlmConfig LlmConfig::from_env() {
    LlmConfig cfg;
    cfg.endpoint = env_or("LLM_ENDPOINT", "");
    cfg.model = env_or("LLM_MODEL", "");
    cfg.api_key = env_or("LLM_API_KEY", "");
    std::string timeout = env_or("LLM_TIMEOUT_S", "");
    if (!timeout.empty()) cfg.timeout_s = std::stoi(timeout);
    return cfg;
}

HttpLlmBackend::HttpLlmBackend(LlmConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error("LLM endpoint not configured");
}

LlmResult HttpLlmBackend::complete(const std::string& prompt) {
    auto [host, path] = split_url(config_.endpoint);
    nlohmann::json body{
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config_.temperature},
    };
    if (!config_.extra_body.empty()) {
        auto extra = nlohmann::json::parse(config_.extra_body, nullptr, false);
        if (extra.is_discarded() || !extra.is_object())
            throw Error("LLM extra_body is not a JSON object");
        for (auto& [key, value] : extra.items()) body[key] = value;
    }
    std::string payload = body.dump();

    auto started = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            int delay = config_.base_delay_ms << (attempt - 1);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(host);
        client.set_read_timeout(config_.timeout_s, 0);
        client.set_connection_timeout(config_.timeout_s, 0);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        auto res = client.Post(path, headers, payload, "application/json");
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (!res) {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
            if (elapsed > config_.timeout_s)
                throw Error("LLM request timed out after " + std::to_string(elapsed) + " s");
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error("LLM request failed: HTTP " + std::to_string(res->status));

        auto json = nlohmann::json::parse(res->body, nullptr, false);
        if (json.is_discarded()) throw Error("LLM response is not valid JSON");
        std::string text;
        try {
            text = json.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("unexpected LLM response shape: ") + e.what());
        }
        if (text.empty()) throw Error("LLM returned an empty completion");

        LlmResult result;
        result.text = std::move(text);
        result.latency_s = elapsed;
        result.retries = attempt;
        if (json.contains("usage")) {
            TokenUsage usage;
            usage.prompt = json["usage"].value("prompt_tokens", 0L);
            usage.completion = json["usage"].value("completion_tokens", 0L);
            result.usage = usage;
        }
        if (attempt > 0)
            logging::info("LLM request succeeded after " + std::to_string(attempt) +
                          " retr" + (attempt == 1 ? "y" : "ies"));
        return result;
    }
    throw Error("LLM request failed after " + std::to_string(config_.max_retries + 1) +
                " attempts: " + last_error);
}

ReplayBackend::ReplayBackend(const std::filesystem::path& transcript)
    : responses_(Transcript::load_responses(transcript)) {}

LlmResult ReplayBackend::complete(const std::string& prompt) {
    auto it = responses_.find(prompt_hash_hex(prompt));
    if (it == responses_.end())
        throw Error("replay transcript has no entry for this prompt");
    return {it->second, 0.0, 0, std::nullopt};
}

LlmResult query_llm(const std::string& prompt, const LlmConfig& config) {
    HttpLlmBackend backend(config);
    return backend.complete(prompt);
}

std::string prompt_hash_hex(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

Transcript::Transcript(const std::filesystem::path& path) : path_(path) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void Transcript::append(const TranscriptEntry& entry) {
    nlohmann::json line{
        {"mode", entry.mode},
        {"target", entry.target},
        {"prompt_hash", prompt_hash_hex(entry.prompt)},
        {"prompt", entry.prompt},
        {"response", entry.response},
        {"decision_index", entry.decision_index},
        {"fallback_used", entry.fallback_used},
    };
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to transcript: " + path_.string());
    out << line.dump() << '\n';
}

std::unordered_map<std::string, std::string> Transcript::load_responses(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open transcript: " + path.string());
    std::unordered_map<std::string, std::string> map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto json = nlohmann::json::parse(line, nullptr, false);
        if (json.is_discarded())
            throw ParseError(path.string(), line_no, "invalid JSONL line");
        map[json.value("prompt_hash", "")] = json.value("response", "");
    }
    return map;
}

}  // namespace kgattack
