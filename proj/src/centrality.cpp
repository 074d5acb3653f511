#include "kgattack/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "kgattack/linalg.hpp"
#include "kgattack/log.hpp"

namespace kgattack {

void Subgraph::add_edge(int u, int v) {
    out[u].push_back(v);
    in[v].push_back(u);
}

void Subgraph::add_undirected_edge(int u, int v) {
    add_edge(u, v);
    add_edge(v, u);
}

std::vector<std::vector<int>> Subgraph::undirected() const {
    std::vector<std::vector<int>> adj(size());
    for (std::size_t u = 0; u < size(); ++u) {
        adj[u].insert(adj[u].end(), out[u].begin(), out[u].end());
        adj[u].insert(adj[u].end(), in[u].begin(), in[u].end());
        std::sort(adj[u].begin(), adj[u].end());
        adj[u].erase(std::unique(adj[u].begin(), adj[u].end()), adj[u].end());
        std::erase(adj[u], static_cast<int>(u));
    }
    return adj;
}

Subgraph Subgraph::induced(const KnowledgeGraph& kg, std::span<const EntityId> entities) {
    Subgraph sub(entities.size());
    sub.nodes.assign(entities.begin(), entities.end());
    std::sort(sub.nodes.begin(), sub.nodes.end());
    std::vector<int> local(kg.entity_count(), -1);
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) local[sub.nodes[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
        for (EntityId nbr : kg.neighbors(sub.nodes[i])) {
            int j = local[nbr];
            if (j >= 0 && j > static_cast<int>(i)) sub.add_undirected_edge(static_cast<int>(i), j);
        }
    }
    return sub;
}

CentralityScores pagerank(const Subgraph& sub, double damping, double tol, int max_iters) {
    const std::size_t n = sub.size();
    if (n == 0) throw Error("pagerank: empty subgraph");
    if (damping <= 0.0 || damping >= 1.0) throw Error("pagerank: damping must be in (0, 1)");

    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n, 0.0);
    double residual = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        double dangling = 0.0;
        for (std::size_t u = 0; u < n; ++u)
            if (sub.out[u].empty()) dangling += x[u];
        double base = (1.0 - damping) / static_cast<double>(n) +
                      damping * dangling / static_cast<double>(n);
        std::fill(next.begin(), next.end(), base);
        for (std::size_t u = 0; u < n; ++u) {
            if (sub.out[u].empty()) continue;
            double share = damping * x[u] / static_cast<double>(sub.out[u].size());
            for (int v : sub.out[u]) next[v] += share;
        }
        residual = 0.0;
        for (std::size_t u = 0; u < n; ++u) residual += std::abs(next[u] - x[u]);
        x.swap(next);
        if (residual < tol) return {CentralityMeasure::PageRank, std::move(x)};
    }
    throw Error("pagerank: no convergence after " + std::to_string(max_iters) +
                " iterations (residual " + std::to_string(residual) + ")");
}

namespace {

// One Brandes source accumulation over an undirected adjacency.
void brandes_from(const std::vector<std::vector<int>>& adj, int s, std::vector<double>& bc,
                  double scale) {
    const std::size_t n = adj.size();
    std::vector<int> dist(n, -1);
    std::vector<double> sigma(n, 0.0);
    std::vector<std::vector<int>> pred(n);
    std::vector<int> order;
    order.reserve(n);

    std::deque<int> queue;
    dist[s] = 0;
    sigma[s] = 1.0;
    queue.push_back(s);
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        order.push_back(u);
        for (int v : adj[u]) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
            if (dist[v] == dist[u] + 1) {
                sigma[v] += sigma[u];
                pred[v].push_back(u);
            }
        }
    }
    std::vector<double> delta(n, 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int w = *it;
        for (int u : pred[w]) delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
        if (w != s) bc[w] += scale * delta[w];
    }
}

}  // namespace

CentralityScores betweenness(const Subgraph& sub, std::size_t exact_cap, int pivots) {
    const std::size_t n = sub.size();
    if (n == 0) throw Error("betweenness: empty subgraph");
    auto adj = sub.undirected();
    std::vector<double> bc(n, 0.0);
    bool approximate = n > exact_cap;
    if (!approximate) {
        for (std::size_t s = 0; s < n; ++s) brandes_from(adj, static_cast<int>(s), bc, 1.0);
    } else {
        logging::warn("betweenness: subgraph has " + std::to_string(n) +
                      " nodes, using pivot-sampled estimate with " + std::to_string(pivots) +
                      " pivots");
        Rng rng(splitmix64(0xbc + n));
        double scale = static_cast<double>(n) / pivots;
        for (int p = 0; p < pivots; ++p)
            brandes_from(adj, static_cast<int>(rng.index(n)), bc, scale);
    }
    // Each unordered pair was counted from both endpoints.
    for (double& v : bc) v *= 0.5;
    return {CentralityMeasure::Betweenness, std::move(bc), approximate};
}

CentralityScores closeness(const Subgraph& sub) {
    const std::size_t n = sub.size();
    if (n == 0) throw Error("closeness: empty subgraph");
    auto adj = sub.undirected();
    std::vector<double> cc(n, 0.0);
    std::vector<int> dist(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        std::deque<int> queue;
        dist[s] = 0;
        queue.push_back(static_cast<int>(s));
        long reachable = 1;
        long total = 0;
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            for (int v : adj[u]) {
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    total += dist[v];
                    ++reachable;
                    queue.push_back(v);
                }
            }
        }
        if (reachable > 1 && n > 1) {
            double r = static_cast<double>(reachable - 1);
            cc[s] = (r / total) * (r / static_cast<double>(n - 1));
        }
    }
    return {CentralityMeasure::Closeness, std::move(cc)};
}

CandidateSet<EntityId> centrality_filter(const KnowledgeGraph& kg, const Triple& tgt, int h,
                                         int k) {
    if (h < 2) throw Error("centrality_filter: h must be >= 2");
    if (k < 1) throw Error("centrality_filter: k must be >= 1");
    const auto& test = kg.test();
    if (std::find(test.begin(), test.end(), tgt) == test.end())
        throw Error("centrality_filter: target must be a test triple");
    const EntityId seeds[] = {tgt.s, tgt.o};
    auto ball_h = khop_entities(kg, seeds, h);
    auto ball_1 = khop_entities(kg, seeds, 1);

    Subgraph sub = Subgraph::induced(kg, ball_h);
    std::vector<EntityId> pool;
    std::set_difference(ball_h.begin(), ball_h.end(), ball_1.begin(), ball_1.end(),
                        std::back_inserter(pool));
    if (pool.empty()) throw Error("centrality_filter: no candidates beyond 1-hop");

    std::vector<int> local(kg.entity_count(), -1);
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) local[sub.nodes[i]] = static_cast<int>(i);

    struct Selection {
        int measures = 0;
        int best_rank = 0;
        std::string tags;
    };
    std::map<EntityId, Selection> selected;

    const CentralityScores all_scores[] = {pagerank(sub), betweenness(sub), closeness(sub)};
    const char* names[] = {"PR", "BC", "CC"};
    for (int mi = 0; mi < 3; ++mi) {
        const auto& scores = all_scores[mi].scores;
        std::vector<EntityId> ranked(pool);
        std::stable_sort(ranked.begin(), ranked.end(), [&](EntityId a, EntityId b) {
            double sa = scores[local[a]], sb = scores[local[b]];
            if (sa != sb) return sa > sb;
            return a < b;
        });
        int take = std::min<int>(k, static_cast<int>(ranked.size()));
        for (int rank = 0; rank < take; ++rank) {
            auto& sel = selected[ranked[rank]];
            ++sel.measures;
            if (sel.measures == 1 || rank + 1 < sel.best_rank) sel.best_rank = rank + 1;
            if (!sel.tags.empty()) sel.tags += '+';
            sel.tags += names[mi];
            sel.tags += '#' + std::to_string(rank + 1);
        }
    }

    std::vector<std::pair<EntityId, Selection>> order(selected.begin(), selected.end());
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second.measures != b.second.measures) return a.second.measures > b.second.measures;
        if (a.second.best_rank != b.second.best_rank) return a.second.best_rank < b.second.best_rank;
        return a.first < b.first;
    });

    CandidateSet<EntityId> out;
    out.target = tgt;
    out.bound = 3 * k;
    for (const auto& [entity, sel] : order) {
        double score = sel.measures + 1.0 / (1.0 + sel.best_rank);
        out.items.push_back({entity, score, "centrality:" + sel.tags});
    }
    return out;
}

}  // namespace kgattack
