#pragma once

#include "kgattack/candidates.hpp"
#include "kgattack/kg.hpp"
#include "kgattack/llm.hpp"
#include "kgattack/prompt.hpp"

namespace kgattack {

struct AttackDecision {
    int index = 0;  // 1-based into the candidate list
    std::string explanation;  // full LLM text; empty when the LLM was off
    bool fallback_used = false;
};

struct Perturbation {
    enum class Kind { Delete, Add };
    enum class Side { None, SubjectReplaced, ObjectReplaced };

    Kind kind = Kind::Delete;
    Triple triple{};
    Side side = Side::None;  // add only

    friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

struct DecideConfig {
    bool llm_enabled = false;
    bool fallback_enabled = true;       // on parse failure fall back to Top-1
    LlmBackend* backend = nullptr;      // required when llm_enabled
    const PromptTemplate* prompt_template = nullptr;  // null -> builtin for the mode
    Transcript* transcript = nullptr;   // optional audit log
};

/// Chooses a candidate: LLM multiple-choice when enabled, otherwise (or on
/// parse/range/transport failure with fallback enabled) the filter's Top-1.
AttackDecision decide(AttackMode mode, const Triple& tgt, const CandidateSet<Triple>& candidates,
                      const KnowledgeGraph& kg, const DecideConfig& config);
AttackDecision decide(AttackMode mode, const Triple& tgt,
                      const CandidateSet<EntityId>& candidates, const KnowledgeGraph& kg,
                      const DecideConfig& config);

/// Deletion: the chosen candidate triple (must be a train triple).
Perturbation make_perturbation(AttackMode mode, const Triple& tgt,
                               const AttackDecision& decision,
                               const CandidateSet<Triple>& candidates,
                               const KnowledgeGraph& kg);

/// Addition: forge a poison from the influential triple by replacing the
/// endpoint not shared with the target (tie -> object) with the chosen
/// noise entity; falls through alternate side and then later candidate
/// entities until the poison is novel.
Perturbation make_perturbation(AttackMode mode, const Triple& tgt,
                               const AttackDecision& decision,
                               const CandidateSet<EntityId>& candidates, const Triple& influence,
                               const KnowledgeGraph& kg);

}  // namespace kgattack
