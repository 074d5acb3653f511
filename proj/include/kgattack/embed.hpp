#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgattack/candidates.hpp"
#include "kgattack/hoa.hpp"
#include "kgattack/kg.hpp"
#include "kgattack/linalg.hpp"

namespace kgattack {

/// Maps strings to fixed-dimension vectors. Equal inputs yield equal vectors
/// within one provider session.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<Vec> embed(const std::vector<std::string>& texts) = 0;
    virtual int dimension() const = 0;
    virtual std::string identity() const = 0;
};

/// Deterministic pseudorandom unit vector per string; test double for the
/// remote provider.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(int dim = 64, std::uint64_t seed = 0);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return dim_; }
    std::string identity() const override;

private:
    int dim_;
    std::uint64_t seed_;
};

/// Hashed character-trigram term-frequency vectors, L2-normalized. A local
/// lexical-similarity provider: verbalized triples sharing entity or
/// relation labels land close in cosine. Desk-scale default.
class NgramEmbeddingProvider : public EmbeddingProvider {
public:
    explicit NgramEmbeddingProvider(int dim = 256);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return dim_; }
    std::string identity() const override;

private:
    int dim_;
};

/// Remote embedding endpoint speaking JSON: request {"input": [...],
/// "model": name}, response {"data": [{"embedding": [...]}, ...]}.
struct HttpEmbeddingConfig {
    std::string endpoint;  // http://host:port/path
    std::string model;
    std::string api_key;
    int batch_size = 64;
    int max_retries = 3;  // retries after the first attempt
    int base_delay_ms = 1000;
    int timeout_s = 60;
    int parallel_batches = 4;

    static HttpEmbeddingConfig from_env();  // EMBED_ENDPOINT / EMBED_MODEL / EMBED_API_KEY
};

class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return dim_; }
    std::string identity() const override;

private:
    std::vector<Vec> embed_batch(const std::vector<std::string>& batch);
    HttpEmbeddingConfig config_;
    int dim_ = 0;  // discovered from the first response
};

/// Bridges the HoA classifier: embeds verbalizations of known triples with
/// their penultimate classifier features, making the trained filter usable
/// wherever a text-embedding provider is expected.
class HoaEmbeddingProvider : public EmbeddingProvider {
public:
    HoaEmbeddingProvider(const KnowledgeGraph& kg, const HoaFeatures& features,
                         const FusionHead& head);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override;
    std::string identity() const override;

private:
    const KnowledgeGraph* kg_;
    const HoaFeatures* features_;
    const FusionHead* head_;
    std::unordered_map<std::string, Triple> by_text_;
};

/// Content-keyed cache plus bounded-parallel batching around any provider.
class CachingProvider : public EmbeddingProvider {
public:
    CachingProvider(std::shared_ptr<EmbeddingProvider> inner, int batch_size = 64,
                    int parallel_batches = 4);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return inner_->dimension(); }
    std::string identity() const override { return inner_->identity() + "+cache"; }
    std::size_t cache_size() const;

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    int batch_size_;
    int parallel_batches_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Vec> cache_;
};

/// "(s_label, r_label, o_label)", optionally followed by " | s: <desc>" and
/// " | o: <desc>" segments for entities that have descriptions.
std::string verbalize(const Triple& t, const KnowledgeGraph& kg, bool with_desc = false);

/// Top-k 1-hop triple-graph neighbors of tgt by cosine similarity between
/// the verbalized target and candidate embeddings.
CandidateSet<Triple> semantic_filter(const TripleGraph& tg, EmbeddingProvider& provider,
                                     const Triple& tgt, int k, bool with_desc = false);

}  // namespace kgattack
