#pragma once

#include <cstdint>

#include "kgattack/kg.hpp"

namespace kgattack {

/// Rule-generated sanity KG: `pairs` matched entity pairs (a_p, b_q) under a
/// random permutation, one universal support triple per pair, a query
/// relation split across train/valid/test, an inverse relation on train
/// pairs, and a chain over the a-side for connectivity.
///
/// Every held-out query triple (a_p, maps_to, b_q) keeps exactly one
/// training support, (a_p, linked_to, b_q), so deleting that support
/// disconnects the pair.
struct SyntheticConfig {
    int pairs = 25;
    std::uint64_t seed = 7;
    // Fractions of pairs whose query triple lands in train / valid; the
    // remainder goes to test.
    double train_fraction = 0.48;
    double valid_fraction = 0.20;
    bool chain = true;
    bool descriptions = true;
};

KnowledgeGraph make_synthetic_kg(const SyntheticConfig& config = {});

}  // namespace kgattack
