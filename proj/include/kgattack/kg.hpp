#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgattack/types.hpp"

namespace kgattack {

enum class Split { Train, Valid, Test };

const char* split_name(Split s);

/// Interned (E, R, T) store with per-split triple sets, entity descriptions,
/// and an incident-triple index over the training split. Immutable once
/// finalize() has run; mutating calls invalidate the index until the next
/// finalize().
class KnowledgeGraph {
public:
    EntityId intern_entity(const std::string& label);
    RelationId intern_relation(const std::string& label);

    /// Returns false when the triple already exists in that split (dropped).
    bool add_triple(Split split, const Triple& t);
    bool add_triple(Split split, const std::string& s, const std::string& r,
                    const std::string& o);
    /// Removes one training triple by value; returns false when absent.
    bool remove_train_triple(const Triple& t);

    void set_description(EntityId e, std::string desc);

    /// Builds the incident index, entity adjacency, and known-triple set.
    void finalize();
    bool finalized() const { return finalized_; }

    std::size_t entity_count() const { return entity_labels_.size(); }
    std::size_t relation_count() const { return relation_labels_.size(); }

    const std::string& entity_label(EntityId e) const;
    const std::string& relation_label(RelationId r) const;
    /// Empty string when the entity has no description.
    const std::string& entity_description(EntityId e) const;
    std::optional<EntityId> entity_id(const std::string& label) const;
    std::optional<RelationId> relation_id(const std::string& label) const;

    const std::vector<Triple>& triples(Split split) const;
    const std::vector<Triple>& train() const { return train_; }
    const std::vector<Triple>& valid() const { return valid_; }
    const std::vector<Triple>& test() const { return test_; }

    /// Membership in train ∪ valid ∪ test.
    bool known(const Triple& t) const;

    /// Indices into train() of triples incident to e (either endpoint).
    std::span<const std::uint32_t> incident(EntityId e) const;
    /// Distinct undirected train-graph neighbors of e, sorted, self excluded.
    std::span<const EntityId> neighbors(EntityId e) const;

    /// Hash over sizes and sorted split contents; used to key caches.
    std::uint64_t structural_hash() const;

    /// Duplicates dropped during construction (within-split or cross-split).
    std::size_t duplicates_dropped() const { return duplicates_dropped_; }

private:
    void require_finalized() const;

    std::vector<std::string> entity_labels_;
    std::vector<std::string> entity_descriptions_;
    std::vector<std::string> relation_labels_;
    std::unordered_map<std::string, EntityId> entity_index_;
    std::unordered_map<std::string, RelationId> relation_index_;

    std::vector<Triple> train_, valid_, test_;
    std::unordered_set<Triple, TripleHash> known_;
    std::size_t duplicates_dropped_ = 0;

    bool finalized_ = false;
    std::vector<std::vector<std::uint32_t>> incident_;
    std::vector<std::vector<EntityId>> adjacency_;
};

/// Triple graph G_TG: nodes are train triples (indexed by train-file
/// position), edges join triples sharing an entity. Adjacency is derived
/// per query from the entity-incidence index; the dense edge list is never
/// materialized.
class TripleGraph {
public:
    explicit TripleGraph(const KnowledgeGraph& kg);

    const KnowledgeGraph& kg() const { return *kg_; }
    std::size_t node_count() const;
    const Triple& node(std::uint32_t idx) const;
    std::optional<std::uint32_t> node_of(const Triple& t) const;

    /// 1-hop triple-graph neighbors of an arbitrary triple: train triples
    /// sharing an entity with t, excluding t itself. Sorted by node index.
    std::vector<std::uint32_t> neighbors(const Triple& t) const;
    std::vector<std::uint32_t> neighbors(std::uint32_t node) const;

private:
    const KnowledgeGraph* kg_;
    std::unordered_map<Triple, std::uint32_t, TripleHash> index_;
};

/// Entities within h hops of any seed over the undirected train graph,
/// seeds included at depth 0. Sorted. Unknown seed ids throw.
std::vector<EntityId> khop_entities(const KnowledgeGraph& kg, std::span<const EntityId> seeds,
                                    int h);

/// Triple-graph BFS from a training triple, depth <= h, seed excluded.
/// Sorted node indices. Throws when seed is not a train triple.
std::vector<std::uint32_t> khop_triples(const TripleGraph& tg, const Triple& seed, int h);

}  // namespace kgattack
