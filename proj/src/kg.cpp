#include "kgattack/kg.hpp"

#include <algorithm>
#include <deque>

#include "kgattack/linalg.hpp"
#include "kgattack/log.hpp"

namespace kgattack {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

EntityId KnowledgeGraph::intern_entity(const std::string& label) {
    auto it = entity_index_.find(label);
    if (it != entity_index_.end()) return it->second;
    auto id = static_cast<EntityId>(entity_labels_.size());
    entity_labels_.push_back(label);
    entity_descriptions_.emplace_back();
    entity_index_.emplace(label, id);
    finalized_ = false;
    return id;
}

RelationId KnowledgeGraph::intern_relation(const std::string& label) {
    auto it = relation_index_.find(label);
    if (it != relation_index_.end()) return it->second;
    auto id = static_cast<RelationId>(relation_labels_.size());
    relation_labels_.push_back(label);
    relation_index_.emplace(label, id);
    finalized_ = false;
    return id;
}

bool KnowledgeGraph::add_triple(Split split, const Triple& t) {
    if (t.s >= entity_count() || t.o >= entity_count() || t.r >= relation_count())
        throw Error("add_triple: id out of range");
    if (known_.contains(t)) {
        ++duplicates_dropped_;
        return false;
    }
    switch (split) {
        case Split::Train: train_.push_back(t); break;
        case Split::Valid: valid_.push_back(t); break;
        case Split::Test: test_.push_back(t); break;
    }
    known_.insert(t);
    finalized_ = false;
    return true;
}

bool KnowledgeGraph::add_triple(Split split, const std::string& s, const std::string& r,
                                const std::string& o) {
    Triple t{intern_entity(s), intern_relation(r), intern_entity(o)};
    return add_triple(split, t);
}

bool KnowledgeGraph::remove_train_triple(const Triple& t) {
    auto it = std::find(train_.begin(), train_.end(), t);
    if (it == train_.end()) return false;
    train_.erase(it);
    known_.erase(t);
    finalized_ = false;
    return true;
}

void KnowledgeGraph::set_description(EntityId e, std::string desc) {
    if (e >= entity_count()) throw Error("set_description: entity id out of range");
    entity_descriptions_[e] = std::move(desc);
}

void KnowledgeGraph::finalize() {
    incident_.assign(entity_count(), {});
    for (std::uint32_t i = 0; i < train_.size(); ++i) {
        const Triple& t = train_[i];
        incident_[t.s].push_back(i);
        if (t.o != t.s) incident_[t.o].push_back(i);
    }
    adjacency_.assign(entity_count(), {});
    for (const Triple& t : train_) {
        if (t.s == t.o) continue;
        adjacency_[t.s].push_back(t.o);
        adjacency_[t.o].push_back(t.s);
    }
    for (auto& nbrs : adjacency_) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    finalized_ = true;
}

void KnowledgeGraph::require_finalized() const {
    if (!finalized_) throw Error("KnowledgeGraph: finalize() required before queries");
}

const std::string& KnowledgeGraph::entity_label(EntityId e) const {
    if (e >= entity_count()) throw Error("entity id out of range");
    return entity_labels_[e];
}

const std::string& KnowledgeGraph::relation_label(RelationId r) const {
    if (r >= relation_count()) throw Error("relation id out of range");
    return relation_labels_[r];
}

const std::string& KnowledgeGraph::entity_description(EntityId e) const {
    if (e >= entity_count()) throw Error("entity id out of range");
    return entity_descriptions_[e];
}

std::optional<EntityId> KnowledgeGraph::entity_id(const std::string& label) const {
    auto it = entity_index_.find(label);
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> KnowledgeGraph::relation_id(const std::string& label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

const std::vector<Triple>& KnowledgeGraph::triples(Split split) const {
    switch (split) {
        case Split::Train: return train_;
        case Split::Valid: return valid_;
        case Split::Test: return test_;
    }
    return train_;
}

bool KnowledgeGraph::known(const Triple& t) const { return known_.contains(t); }

std::span<const std::uint32_t> KnowledgeGraph::incident(EntityId e) const {
    require_finalized();
    if (e >= entity_count()) throw Error("entity id out of range");
    return incident_[e];
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId e) const {
    require_finalized();
    if (e >= entity_count()) throw Error("entity id out of range");
    return adjacency_[e];
}

std::uint64_t KnowledgeGraph::structural_hash() const {
    std::uint64_t h = fnv1a64("kg-v1");
    auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
    mix(entity_count());
    mix(relation_count());
    for (const auto* split : {&train_, &valid_, &test_}) {
        std::vector<Triple> sorted(*split);
        std::sort(sorted.begin(), sorted.end());
        mix(sorted.size());
        for (const Triple& t : sorted) {
            mix(t.s);
            mix(t.r);
            mix(t.o);
        }
    }
    return h;
}

TripleGraph::TripleGraph(const KnowledgeGraph& kg) : kg_(&kg) {
    if (!kg.finalized()) throw Error("TripleGraph: KnowledgeGraph must be finalized");
    index_.reserve(kg.train().size());
    for (std::uint32_t i = 0; i < kg.train().size(); ++i) index_.emplace(kg.train()[i], i);
}

std::size_t TripleGraph::node_count() const { return kg_->train().size(); }

const Triple& TripleGraph::node(std::uint32_t idx) const {
    if (idx >= node_count()) throw Error("triple node index out of range");
    return kg_->train()[idx];
}

std::optional<std::uint32_t> TripleGraph::node_of(const Triple& t) const {
    auto it = index_.find(t);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::uint32_t> TripleGraph::neighbors(const Triple& t) const {
    auto self = node_of(t);
    auto inc_s = kg_->incident(t.s);
    auto inc_o = kg_->incident(t.o);
    std::vector<std::uint32_t> out;
    out.reserve(inc_s.size() + inc_o.size());
    out.insert(out.end(), inc_s.begin(), inc_s.end());
    out.insert(out.end(), inc_o.begin(), inc_o.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (self) std::erase(out, *self);
    return out;
}

std::vector<std::uint32_t> TripleGraph::neighbors(std::uint32_t node_idx) const {
    return neighbors(node(node_idx));
}

std::vector<EntityId> khop_entities(const KnowledgeGraph& kg, std::span<const EntityId> seeds,
                                    int h) {
    if (seeds.empty()) throw Error("khop_entities: empty seed set");
    if (h < 0) throw Error("khop_entities: h must be >= 0");
    for (EntityId e : seeds)
        if (e >= kg.entity_count())
            throw Error("khop_entities: unknown seed id " + std::to_string(e));

    std::vector<int> depth(kg.entity_count(), -1);
    std::deque<EntityId> queue;
    for (EntityId e : seeds) {
        if (depth[e] == -1) {
            depth[e] = 0;
            queue.push_back(e);
        }
    }
    while (!queue.empty()) {
        EntityId u = queue.front();
        queue.pop_front();
        if (depth[u] == h) continue;
        for (EntityId v : kg.neighbors(u)) {
            if (depth[v] == -1) {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    std::vector<EntityId> out;
    for (EntityId e = 0; e < kg.entity_count(); ++e)
        if (depth[e] >= 0) out.push_back(e);
    return out;
}

std::vector<std::uint32_t> khop_triples(const TripleGraph& tg, const Triple& seed, int h) {
    if (h < 0) throw Error("khop_triples: h must be >= 0");
    auto seed_node = tg.node_of(seed);
    if (!seed_node)
        throw Error("khop_triples: seed triple is not in the train split");

    std::vector<int> depth(tg.node_count(), -1);
    std::deque<std::uint32_t> queue;
    depth[*seed_node] = 0;
    queue.push_back(*seed_node);
    while (!queue.empty()) {
        std::uint32_t u = queue.front();
        queue.pop_front();
        if (depth[u] == h) continue;
        for (std::uint32_t v : tg.neighbors(u)) {
            if (depth[v] == -1) {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < tg.node_count(); ++i)
        if (depth[i] >= 0 && i != *seed_node) out.push_back(i);
    return out;
}

}  // namespace kgattack
