#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "kgattack/candidates.hpp"
#include "kgattack/kg.hpp"

namespace kgattack {

enum class AttackMode { Delete, Add };

const char* to_string(AttackMode mode);
AttackMode attack_mode_from_string(const std::string& name);

/// The four prompt components; the rendered prompt is
/// instruction ⊕ example ⊕ candidates ⊕ reference with single blank-line
/// separators.
struct PromptParts {
    std::string instruction;
    std::string example;
    std::string candidates;
    std::string reference;

    std::string render() const;
    /// Rough token estimate: rendered length / 4.
    int token_estimate() const;
};

/// Template file with [instruction] / [example] / [candidates] / [reference]
/// sections and the placeholders {target_triple},
/// {influence_triple_choice}, {entity_desc}.
struct PromptTemplate {
    std::string instruction;
    std::string example;
    std::string candidates;
    std::string reference;

    static PromptTemplate parse(const std::string& text);
    static PromptTemplate load(const std::filesystem::path& path);
    static const PromptTemplate& builtin(AttackMode mode);
};

PromptParts build_prompt(AttackMode mode, const Triple& tgt,
                         const CandidateSet<Triple>& candidates, const KnowledgeGraph& kg,
                         const PromptTemplate& tmpl);
PromptParts build_prompt(AttackMode mode, const Triple& tgt,
                         const CandidateSet<EntityId>& candidates, const KnowledgeGraph& kg,
                         const PromptTemplate& tmpl);

/// Outcome of scanning an LLM response for the answer field.
struct ParsedDecision {
    enum class Status { Ok, ParseFailure, RangeFailure };
    Status status = Status::ParseFailure;
    int index = 0;  // valid when status == Ok

    bool ok() const { return status == Status::Ok; }
};

/// Extracts the LAST occurrence of the answer pattern
///   "answer" : "<int>"
/// (quoting and whitespace tolerant; bare `answer: 3` accepted; the word is
/// matched case-insensitively). Validates 1 <= int <= n_candidates. Total:
/// never throws on arbitrary input.
ParsedDecision parse_decision(std::string_view response, int n_candidates) noexcept;

}  // namespace kgattack
