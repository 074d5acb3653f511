#include "kgattack/attack.hpp"

#include <algorithm>

#include "kgattack/embed.hpp"
#include "kgattack/log.hpp"

namespace kgattack {

namespace {

AttackDecision decide_common(AttackMode mode, const Triple& tgt, const PromptParts& prompt,
                             std::size_t n_candidates, const KnowledgeGraph& kg,
                             const DecideConfig& config) {
    AttackDecision decision;
    std::string rendered = prompt.render();
    std::string response;

    if (config.llm_enabled) {
        if (!config.backend) throw Error("decide: llm_enabled without a backend");
        try {
            LlmResult result = config.backend->complete(rendered);
            response = result.text;
            ParsedDecision parsed = parse_decision(response, static_cast<int>(n_candidates));
            if (parsed.ok()) {
                decision.index = parsed.index;
                decision.explanation = response;
            } else {
                if (!config.fallback_enabled)
                    throw Error(parsed.status == ParsedDecision::Status::RangeFailure
                                    ? "decide: answer index out of range"
                                    : "decide: no parseable answer in LLM response");
                logging::warn("decide: unparseable LLM answer, falling back to Top-1");
                decision.index = 1;
                decision.explanation = response;
                decision.fallback_used = true;
            }
        } catch (const Error&) {
            if (!config.fallback_enabled) throw;
            logging::warn("decide: LLM failure, falling back to Top-1");
            decision.index = 1;
            decision.fallback_used = true;
        }
    } else {
        decision.index = 1;  // filter Top-1
        decision.fallback_used = true;
    }

    if (config.transcript) {
        config.transcript->append({to_string(mode), verbalize(tgt, kg, false), rendered, response,
                                   decision.index, decision.fallback_used});
    }
    return decision;
}

}  // namespace

AttackDecision decide(AttackMode mode, const Triple& tgt, const CandidateSet<Triple>& candidates,
                      const KnowledgeGraph& kg, const DecideConfig& config) {
    if (candidates.empty()) throw Error("decide: empty candidate set");
    const PromptTemplate& tmpl =
        config.prompt_template ? *config.prompt_template : PromptTemplate::builtin(mode);
    PromptParts prompt = build_prompt(mode, tgt, candidates, kg, tmpl);
    return decide_common(mode, tgt, prompt, candidates.size(), kg, config);
}

AttackDecision decide(AttackMode mode, const Triple& tgt,
                      const CandidateSet<EntityId>& candidates, const KnowledgeGraph& kg,
                      const DecideConfig& config) {
    if (candidates.empty()) throw Error("decide: empty candidate set");
    const PromptTemplate& tmpl =
        config.prompt_template ? *config.prompt_template : PromptTemplate::builtin(mode);
    PromptParts prompt = build_prompt(mode, tgt, candidates, kg, tmpl);
    return decide_common(mode, tgt, prompt, candidates.size(), kg, config);
}

Perturbation make_perturbation(AttackMode mode, const Triple& tgt,
                               const AttackDecision& decision,
                               const CandidateSet<Triple>& candidates,
                               const KnowledgeGraph& kg) {
    (void)tgt;
    if (mode != AttackMode::Delete)
        throw Error("make_perturbation: triple candidates are for delete mode");
    if (decision.index < 1 || decision.index > static_cast<int>(candidates.size()))
        throw Error("make_perturbation: decision index out of range");
    const Triple& chosen = candidates.items[static_cast<std::size_t>(decision.index) - 1].item;
    const auto& train = kg.train();
    if (std::find(train.begin(), train.end(), chosen) == train.end())
        throw Error("make_perturbation: deletion candidate is not a train triple");
    return {Perturbation::Kind::Delete, chosen, Perturbation::Side::None};
}

Perturbation make_perturbation(AttackMode mode, const Triple& tgt,
                               const AttackDecision& decision,
                               const CandidateSet<EntityId>& candidates, const Triple& influence,
                               const KnowledgeGraph& kg) {
    if (mode != AttackMode::Add)
        throw Error("make_perturbation: entity candidates are for add mode");
    if (decision.index < 1 || decision.index > static_cast<int>(candidates.size()))
        throw Error("make_perturbation: decision index out of range");

    // Replace the endpoint of the influential triple not shared with the
    // target, so the poison stays attached to the target's neighborhood;
    // both-or-neither shared replaces the object.
    bool s_shared = influence.s == tgt.s || influence.s == tgt.o;
    bool o_shared = influence.o == tgt.s || influence.o == tgt.o;
    Perturbation::Side primary = (o_shared && !s_shared) ? Perturbation::Side::SubjectReplaced
                                                         : Perturbation::Side::ObjectReplaced;
    Perturbation::Side alternate = primary == Perturbation::Side::SubjectReplaced
                                       ? Perturbation::Side::ObjectReplaced
                                       : Perturbation::Side::SubjectReplaced;

    auto forge = [&](Perturbation::Side side, EntityId noise) {
        return side == Perturbation::Side::SubjectReplaced
                   ? Triple{noise, influence.r, influence.o}
                   : Triple{influence.s, influence.r, noise};
    };

    std::size_t start = static_cast<std::size_t>(decision.index) - 1;
    for (std::size_t step = 0; step < candidates.size(); ++step) {
        EntityId noise = candidates.items[(start + step) % candidates.size()].item;
        for (Perturbation::Side side : {primary, alternate}) {
            Triple poison = forge(side, noise);
            if (!kg.known(poison)) return {Perturbation::Kind::Add, poison, side};
        }
    }
    throw Error("make_perturbation: all candidate entities produce existing triples");
}

}  // namespace kgattack
