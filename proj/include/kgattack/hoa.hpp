#pragma once

#include <filesystem>
#include <vector>

#include "kgattack/candidates.hpp"
#include "kgattack/kg.hpp"
#include "kgattack/kge.hpp"
#include "kgattack/linalg.hpp"

namespace kgattack {

/// Symmetric CSR matrix over entities; produced by normalize_adjacency.
struct SparseMatrix {
    int n = 0;
    std::vector<int> row_ptr;  // n + 1
    std::vector<int> col;
    std::vector<double> val;

    // out = A * x, row by row.
    void multiply(const Mat& x, Mat& out) const;
    Vec multiply(const Vec& x) const;
};

/// D^{-1/2} (A + I) D^{-1/2} over the undirected train entity graph, with
/// degrees counted on the self-looped binary adjacency.
SparseMatrix normalize_adjacency(const KnowledgeGraph& kg);

/// Precomputed propagation H[k] = Ã^k Z for k = 1..hops, with H[0] = Z taken
/// from a trained TransE checkpoint. Relation embeddings ride along for the
/// classifier head. No trainable parameters.
struct HoaFeatures {
    int hops = 0;
    Mat base;                 // H[0] = Z
    std::vector<Mat> powers;  // H[1..hops]
    Mat relations;            // Z(r)
    std::uint64_t kg_hash = 0;
    std::uint64_t checkpoint_hash = 0;

    int dim() const { return base.cols; }
    const Mat& level(int k) const;  // k in [1, hops]
};

HoaFeatures propagate(const SparseMatrix& adj, const Mat& z, const Mat& relations, int hops);

/// HoaFeatures from a TransE checkpoint file (records both cache keys).
HoaFeatures build_hoa_features(const KnowledgeGraph& kg, const std::filesystem::path& transe_ckpt,
                               int hops);
/// Same, from an in-memory TransE model (checkpoint hash left zero).
HoaFeatures build_hoa_features(const KnowledgeGraph& kg, const KgeModel& transe, int hops);

void save_hoa_features(const HoaFeatures& f, const std::filesystem::path& path);
/// Loads and validates the (kg hash, checkpoint hash, hops) cache key; any
/// mismatch throws.
HoaFeatures load_hoa_features(const std::filesystem::path& path, std::uint64_t kg_hash,
                              std::uint64_t checkpoint_hash, int hops);

/// One-hidden-layer perceptron, ReLU, used by every head component.
struct Mlp {
    Mat w1;  // hidden x in
    Vec b1;
    Mat w2;  // out x hidden
    Vec b2;

    Vec forward(std::span<const double> x) const;

    friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// Attention-fused multi-hop head plus triple classifier. The fusion output
/// f_HoA(e) = MLP(concat_k alpha_k * MLP_k(H[k][e])) with alpha = softmax(theta);
/// classifier features K = MLP_Adapter(f(s) || Z(r) || f(o)).
struct FusionHead {
    int dim = 0;
    int hops = 0;
    std::uint64_t seed = 0;
    std::vector<Mlp> hop_mlps;  // one per hop, d -> d
    Vec theta;                  // attention logits, size hops
    Mlp output;                 // (hops*d) -> d
    Mlp adapter;                // 3d -> d
    Vec classifier_w;           // d
    double classifier_b = 0.0;

    friend bool operator==(const FusionHead&, const FusionHead&) = default;
};

Vec softmax(std::span<const double> logits);

FusionHead init_fusion_head(int dim, int hops, std::uint64_t seed);

/// f_HoA(e).
Vec fuse(const HoaFeatures& features, const FusionHead& head, EntityId e);
/// Penultimate classifier features K for a triple.
Vec adapter_features(const HoaFeatures& features, const FusionHead& head, const Triple& t);
/// P(triple is true) under the classifier.
double classify(const HoaFeatures& features, const FusionHead& head, const Triple& t);

/// Flat gradient view of a FusionHead, same shapes.
struct FusionHeadGradients {
    std::vector<Mlp> hop_mlps;
    Vec theta;
    Mlp output;
    Mlp adapter;
    Vec classifier_w;
    double classifier_b = 0.0;
};

struct LabeledTriple {
    Triple triple;
    double label = 0.0;  // 1 true / 0 false
};

/// Mean BCE loss over the batch; accumulates head gradients when grads is
/// non-null. Features (and Z(r)) stay frozen.
double hoa_classifier_loss(const HoaFeatures& features, const FusionHead& head,
                           std::span<const LabeledTriple> batch, FusionHeadGradients* grads);

struct HoaTrainConfig {
    int hops = 3;
    int epochs = 200;
    double lr = 1e-3;  // Adam
    int batch_size = 32;
    std::uint64_t seed = 1;
};

/// Binary classifier on train triples vs uniformly corrupted negatives
/// (filtered against known triples), 1:1. Deterministic given seed.
FusionHead train_hoa_classifier(const KnowledgeGraph& kg, const HoaFeatures& features,
                                const HoaTrainConfig& config);

/// Top-k 1-hop triple-graph neighbors of tgt by cosine affinity between
/// classifier features of the candidate and of the target.
CandidateSet<Triple> hoa_filter(const TripleGraph& tg, const FusionHead& head,
                                const HoaFeatures& features, const Triple& tgt, int k);

void save_fusion_head(const FusionHead& head, const std::filesystem::path& path);
FusionHead load_fusion_head(const std::filesystem::path& path);

}  // namespace kgattack
