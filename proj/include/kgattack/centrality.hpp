#pragma once

#include <span>
#include <vector>

#include "kgattack/candidates.hpp"
#include "kgattack/kg.hpp"

namespace kgattack {

/// Entity subgraph with directed adjacency over local indices. Centralities
/// that are direction-agnostic (betweenness, closeness) use the undirected
/// view; PageRank walks out-edges.
struct Subgraph {
    std::vector<EntityId> nodes;  // sorted; position = local index
    std::vector<std::vector<int>> out;
    std::vector<std::vector<int>> in;

    explicit Subgraph(std::size_t n = 0) : out(n), in(n) {}

    std::size_t size() const { return out.size(); }
    void add_edge(int u, int v);
    void add_undirected_edge(int u, int v);
    std::vector<std::vector<int>> undirected() const;

    /// Induced undirected subgraph of the train entity graph.
    static Subgraph induced(const KnowledgeGraph& kg, std::span<const EntityId> entities);
};

enum class CentralityMeasure { PageRank, Betweenness, Closeness };

struct CentralityScores {
    CentralityMeasure measure{};
    std::vector<double> scores;  // aligned with Subgraph::nodes / local index
    bool approximate = false;    // pivot-sampled betweenness
};

/// Power iteration with uniform dangling-mass redistribution; converges when
/// the L1 residual drops below tol. Scores sum to 1.
CentralityScores pagerank(const Subgraph& sub, double damping = 0.85, double tol = 1e-10,
                          int max_iters = 200);

/// Exact Brandes accumulation over the undirected view, counted per
/// unordered source-target pair. Subgraphs above exact_cap nodes fall back
/// to pivot sampling (deterministic pivots, scaled estimate).
CentralityScores betweenness(const Subgraph& sub, std::size_t exact_cap = 20000,
                             int pivots = 256);

/// Wasserman-Faust closeness, computed per connected component; isolated
/// nodes score 0.
CentralityScores closeness(const Subgraph& sub);

/// Union of per-measure Top-k over the h-hop entity ball of the target's
/// endpoints, with 1-hop entities and the endpoints themselves excluded.
/// Ordering: selecting-measure count desc, best per-measure rank asc,
/// entity id asc.
CandidateSet<EntityId> centrality_filter(const KnowledgeGraph& kg, const Triple& tgt, int h = 3,
                                         int k = 30);

}  // namespace kgattack
