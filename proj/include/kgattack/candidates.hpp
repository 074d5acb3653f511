#pragma once

#include <string>
#include <vector>

#include "kgattack/types.hpp"

namespace kgattack {

template <typename Item>
struct Candidate {
    Item item{};
    double score = 0.0;
    std::string provenance;  // which filter (and measures/ranks) selected it
};

/// Ordered, size-bounded candidate list for one attack target. Scores are
/// non-increasing in list order and |items| <= bound.
template <typename Item>
struct CandidateSet {
    Triple target{};
    std::vector<Candidate<Item>> items;
    int bound = 0;  // δ

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    const Item& top() const {
        if (items.empty()) throw Error("empty candidate set");
        return items.front().item;
    }
};

}  // namespace kgattack
