#include "kgattack/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgattack/linalg.hpp"

namespace kgattack {

namespace {

std::string padded(const char* prefix, int i) {
    std::string n = std::to_string(i);
    if (n.size() < 2) n.insert(n.begin(), '0');
    return prefix + n;
}

}  // namespace

KnowledgeGraph make_synthetic_kg(const SyntheticConfig& config) {
    if (config.pairs < 3) throw Error("synthetic KG needs at least 3 pairs");
    const int p = config.pairs;
    Rng rng(splitmix64(config.seed));

    KnowledgeGraph kg;
    std::vector<EntityId> a(p), b(p);
    for (int i = 0; i < p; ++i) a[i] = kg.intern_entity(padded("a", i));
    for (int i = 0; i < p; ++i) b[i] = kg.intern_entity(padded("b", i));
    RelationId maps_to = kg.intern_relation("maps_to");
    RelationId maps_from = kg.intern_relation("maps_from");
    RelationId linked_to = kg.intern_relation("linked_to");
    RelationId follows = kg.intern_relation("follows");

    // Random matching between the two entity groups.
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.eng);

    // Assign each pair's query triple to a split.
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.eng);
    int n_train = static_cast<int>(std::lround(config.train_fraction * p));
    int n_valid = static_cast<int>(std::lround(config.valid_fraction * p));
    n_train = std::clamp(n_train, 1, p - 2);
    n_valid = std::clamp(n_valid, 1, p - n_train - 1);

    for (int i = 0; i < p; ++i) {
        int pair = order[i];
        EntityId s = a[pair];
        EntityId o = b[perm[pair]];
        kg.add_triple(Split::Train, Triple{s, linked_to, o});
        Split query_split = i < n_train              ? Split::Train
                            : i < n_train + n_valid  ? Split::Valid
                                                     : Split::Test;
        kg.add_triple(query_split, Triple{s, maps_to, o});
        if (query_split == Split::Train)
            kg.add_triple(Split::Train, Triple{o, maps_from, s});
    }
    if (config.chain)
        for (int i = 0; i + 1 < p; ++i)
            kg.add_triple(Split::Train, Triple{a[i], follows, a[i + 1]});

    if (config.descriptions) {
        for (int i = 0; i < p; ++i) {
            kg.set_description(a[i], "alpha chain element " + std::to_string(i));
            kg.set_description(b[i], "beta satellite " + std::to_string(i));
        }
    }
    kg.finalize();
    return kg;
}

}  // namespace kgattack
