#include "kgattack/embed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgattack/log.hpp"

namespace kgattack {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? v : fallback;
}

// scheme://host[:port][/path] -> (host:port, path)
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("bad endpoint URL: " + url);
    std::string rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http") throw Error("only http endpoints are supported: " + url);
    return {host, path};
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(int dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
    if (dim <= 0) throw Error("embedding dimension must be positive");
}

std::vector<Vec> HashEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vec> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        std::uint64_t state = splitmix64(fnv1a64(text) ^ seed_);
        Vec v(dim_);
        for (int i = 0; i < dim_; ++i) {
            state = splitmix64(state);
            // Map to roughly uniform [-1, 1).
            v[i] = static_cast<double>(state >> 11) / static_cast<double>(1ull << 53) * 2.0 - 1.0;
        }
        double n = norm2(v);
        for (double& x : v) x /= n;
        out.push_back(std::move(v));
    }
    return out;
}

std::string HashEmbeddingProvider::identity() const {
    return "hash/seed" + std::to_string(seed_) + "/" + std::to_string(dim_);
}

NgramEmbeddingProvider::NgramEmbeddingProvider(int dim) : dim_(dim) {
    if (dim <= 0) throw Error("embedding dimension must be positive");
}

std::vector<Vec> NgramEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vec> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        Vec v(dim_, 0.0);
        if (text.size() >= 3) {
            for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
                std::uint64_t h = fnv1a64(text.data() + i, 3);
                v[h % static_cast<std::uint64_t>(dim_)] += 1.0;
            }
        } else if (!text.empty()) {
            v[fnv1a64(text) % static_cast<std::uint64_t>(dim_)] += 1.0;
        }
        double n = norm2(v);
        if (n > 0)
            for (double& x : v) x /= n;
        out.push_back(std::move(v));
    }
    return out;
}

std::string NgramEmbeddingProvider::identity() const {
    return "ngram3/" + std::to_string(dim_);
}

HttpEmbeddingConfig HttpEmbeddingConfig::from_env() {
    HttpEmbeddingConfig cfg;
    cfg.endpoint = env_or("EMBED_ENDPOINT", "");
    cfg.model = env_or("EMBED_MODEL", "");
    cfg.api_key = env_or("EMBED_API_KEY", "");
    return cfg;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config)
    : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error("embedding endpoint not configured");
}

std::vector<Vec> HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& batch) {
    auto [host, path] = split_url(config_.endpoint);
    nlohmann::json body{{"input", batch}, {"model", config_.model}};
    std::string payload = body.dump();

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
        if (!res) {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error("embedding request failed: HTTP " + std::to_string(res->status));
        auto json = nlohmann::json::parse(res->body, nullptr, false);
        if (json.is_discarded() || !json.contains("data"))
            throw Error("embedding response is not valid JSON with a data array");
        std::vector<Vec> out;
        for (const auto& item : json["data"]) out.push_back(item.at("embedding").get<Vec>());
        if (out.size() != batch.size())
            throw Error("embedding response size mismatch");
        return out;
    }
    throw Error("embedding request failed after " + std::to_string(config_.max_retries + 1) +
                " attempts: " + last_error);
}

std::vector<Vec> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vec> out(texts.size());
    std::size_t pos = 0;
    while (pos < texts.size()) {
        // Launch up to parallel_batches requests, reassemble in order.
        std::vector<std::pair<std::size_t, std::future<std::vector<Vec>>>> inflight;
        for (int p = 0; p < config_.parallel_batches && pos < texts.size(); ++p) {
            std::size_t len =
                std::min<std::size_t>(config_.batch_size, texts.size() - pos);
            std::vector<std::string> batch(texts.begin() + static_cast<long>(pos),
                                           texts.begin() + static_cast<long>(pos + len));
            inflight.emplace_back(pos, std::async(std::launch::async, [this, b = std::move(batch)] {
                                      return embed_batch(b);
                                  }));
            pos += len;
        }
        for (auto& [start, fut] : inflight) {
            auto vecs = fut.get();
            for (std::size_t i = 0; i < vecs.size(); ++i) out[start + i] = std::move(vecs[i]);
        }
    }
    for (const Vec& v : out) {
        if (dim_ == 0) dim_ = static_cast<int>(v.size());
        if (static_cast<int>(v.size()) != dim_)
            throw Error("provider returned inconsistent embedding dimensions");
    }
    return out;
}

std::string HttpEmbeddingProvider::identity() const {
    return "http/" + config_.model + "/" + std::to_string(dim_);
}

HoaEmbeddingProvider::HoaEmbeddingProvider(const KnowledgeGraph& kg, const HoaFeatures& features,
                                           const FusionHead& head)
    : kg_(&kg), features_(&features), head_(&head) {
    for (Split split : {Split::Train, Split::Valid, Split::Test}) {
        for (const Triple& t : kg.triples(split)) {
            by_text_.emplace(verbalize(t, kg, false), t);
            by_text_.emplace(verbalize(t, kg, true), t);
        }
    }
}

std::vector<Vec> HoaEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vec> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        auto it = by_text_.find(text);
        if (it == by_text_.end())
            throw Error("hoa provider: text is not a verbalized known triple: " + text);
        out.push_back(adapter_features(*features_, *head_, it->second));
    }
    return out;
}

int HoaEmbeddingProvider::dimension() const { return head_->dim; }

std::string HoaEmbeddingProvider::identity() const {
    return "hoa/" + std::to_string(head_->dim);
}

CachingProvider::CachingProvider(std::shared_ptr<EmbeddingProvider> inner, int batch_size,
                                 int parallel_batches)
    : inner_(std::move(inner)), batch_size_(batch_size), parallel_batches_(parallel_batches) {}

std::vector<Vec> CachingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vec> out(texts.size());
    std::vector<std::size_t> missing;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = cache_.find(texts[i]);
            if (it != cache_.end())
                out[i] = it->second;
            else
                missing.push_back(i);
        }
    }
    // Dedupe misses so one string is embedded once.
    std::vector<std::string> unique_texts;
    std::unordered_map<std::string, std::size_t> first_use;
    for (std::size_t i : missing) {
        if (first_use.emplace(texts[i], unique_texts.size()).second)
            unique_texts.push_back(texts[i]);
    }
    std::vector<Vec> fresh(unique_texts.size());
    std::size_t pos = 0;
    while (pos < unique_texts.size()) {
        std::vector<std::pair<std::size_t, std::future<std::vector<Vec>>>> inflight;
        for (int p = 0; p < parallel_batches_ && pos < unique_texts.size(); ++p) {
            std::size_t len = std::min<std::size_t>(batch_size_, unique_texts.size() - pos);
            std::vector<std::string> batch(unique_texts.begin() + static_cast<long>(pos),
                                           unique_texts.begin() + static_cast<long>(pos + len));
            inflight.emplace_back(pos,
                                  std::async(std::launch::async, [this, b = std::move(batch)] {
                                      return inner_->embed(b);
                                  }));
            pos += len;
        }
        for (auto& [start, fut] : inflight) {
            auto vecs = fut.get();
            for (std::size_t i = 0; i < vecs.size(); ++i) fresh[start + i] = std::move(vecs[i]);
        }
    }
    {
        std::lock_guard lock(mutex_);
        for (std::size_t u = 0; u < unique_texts.size(); ++u) cache_[unique_texts[u]] = fresh[u];
        for (std::size_t i : missing) out[i] = cache_[texts[i]];
    }
    return out;
}

std::size_t CachingProvider::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::string verbalize(const Triple& t, const KnowledgeGraph& kg, bool with_desc) {
    std::string out = "(" + kg.entity_label(t.s) + ", " + kg.relation_label(t.r) + ", " +
                      kg.entity_label(t.o) + ")";
    if (with_desc) {
        const std::string& sd = kg.entity_description(t.s);
        const std::string& od = kg.entity_description(t.o);
        if (!sd.empty()) out += " | s: " + sd;
        if (!od.empty()) out += " | o: " + od;
    }
    return out;
}

CandidateSet<Triple> semantic_filter(const TripleGraph& tg, EmbeddingProvider& provider,
                                     const Triple& tgt, int k, bool with_desc) {
    if (k < 1) throw Error("semantic_filter: k must be >= 1");
    auto neighborhood = tg.neighbors(tgt);
    if (neighborhood.empty()) throw Error("semantic_filter: empty neighborhood");

    const KnowledgeGraph& kg = tg.kg();
    std::vector<std::string> texts;
    texts.reserve(neighborhood.size() + 1);
    texts.push_back(verbalize(tgt, kg, with_desc));
    for (std::uint32_t node : neighborhood) texts.push_back(verbalize(tg.node(node), kg, with_desc));

    auto vectors = provider.embed(texts);
    const Vec& target_vec = vectors[0];
    if (norm2(target_vec) == 0.0)
        logging::warn("semantic_filter: target embedding has zero norm");

    struct Scored {
        std::uint32_t node;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(neighborhood.size());
    for (std::size_t i = 0; i < neighborhood.size(); ++i) {
        double sim = cosine(target_vec, vectors[i + 1]);
        if (norm2(vectors[i + 1]) == 0.0)
            logging::warn("semantic_filter: zero-norm embedding for candidate " +
                          std::to_string(neighborhood[i]) + ", scored -1");
        scored.push_back({neighborhood[i], sim});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.node < b.node;
    });

    CandidateSet<Triple> out;
    out.target = tgt;
    out.bound = k;
    for (const Scored& s : scored) {
        if (static_cast<int>(out.items.size()) >= k) break;
        out.items.push_back({tg.node(s.node), s.score, "semantic"});
    }
    return out;
}

}  // namespace kgattack
