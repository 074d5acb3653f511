#include "kgattack/prompt.hpp"

#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include "kgattack/embed.hpp"

namespace kgattack {

namespace {

// Shipped defaults; templates/delete.txt and templates/add.txt carry the
// same text for users who want to edit a copy.
constexpr const char* kDeleteTemplate = R"([instruction]
You are an expert in knowledge graph reasoning and adversarial attack design. A knowledge graph embedding model (such as ConvE) predicts the target triple below. Select exactly one candidate triple to delete from the training data so that the model's ability to predict the target triple degrades as much as possible. Think through each candidate, then answer with a single choice number.

[example]
Example target triple: (telephone, verb group, call)
Example candidate triples:
1. (call, verb group, telephone)
2. (call in, hypernym, telephone)
3. (telephone, hypernym, telecommunicate)
4. (telephone, derivationally related form, telephony)
5. (telephony, derivationally related form, telephone)
Example reasoning: candidate 1, (call, verb group, telephone), states the same relation as the target in the reverse direction, so the two triples reinforce each other. Deleting it removes that mutual evidence and weakens the model's confidence in the target triple more than any of the other candidates, which touch different relations or different entity pairs. "answer": "1"

[candidates]
Please process the following target triple {target_triple}.
Here are the candidate triples:
{influence_triple_choice}

[reference]
The entities are described as follows:
{entity_desc}
Show your choice in the answer field with only the choice number, e.g., "answer": "1".
)";

constexpr const char* kAddTemplate = R"([instruction]
You are an expert in knowledge graph reasoning and adversarial attack design. A knowledge graph embedding model predicts the target triple below. Select exactly one noise entity from the candidate list; it will replace an endpoint of the target's strongest supporting triple, and the forged triple will be inserted into the training data to mislead the model. Pick the entity that is plausible enough to blend in yet disruptive to the target prediction, then answer with a single choice number.

[example]
Example target triple: (telephone, verb group, call)
Example candidate entities:
1. megaphone
2. mail
3. shout
Example reasoning: "shout" is itself a verb of communication, so a forged verb-group triple that points at it stays plausible while pulling the model away from "call". The other candidates are objects rather than verbs and would be easy for the model to separate. "answer": "3"

[candidates]
Please process the following target triple {target_triple}.
Here are the candidate entities:
{influence_triple_choice}

[reference]
The entities are described as follows:
{entity_desc}
Show your choice in the answer field with only the choice number, e.g., "answer": "1".
)";

std::string trim_blank(std::string s) {
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.erase(s.begin());
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

std::string substitute(std::string text, const std::string& placeholder,
                       const std::string& value) {
    std::string token = "{" + placeholder + "}";
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

void require_placeholder(const PromptTemplate& tmpl, const std::string& name) {
    std::string token = "{" + name + "}";
    for (const std::string* section :
         {&tmpl.instruction, &tmpl.example, &tmpl.candidates, &tmpl.reference})
        if (section->find(token) != std::string::npos) return;
    throw Error("prompt template is missing the placeholder " + token);
}

// Description block: target endpoints first, then candidate entities in
// first-appearance order; entities without a description render label only.
std::string describe_entities(const std::vector<EntityId>& order, const KnowledgeGraph& kg) {
    std::string out;
    std::vector<EntityId> seen;
    for (EntityId e : order) {
        if (std::find(seen.begin(), seen.end(), e) != seen.end()) continue;
        seen.push_back(e);
        if (!out.empty()) out += '\n';
        out += kg.entity_label(e);
        const std::string& desc = kg.entity_description(e);
        if (!desc.empty()) out += ": " + desc;
    }
    return out;
}

PromptParts instantiate(const PromptTemplate& tmpl, const std::string& target,
                        const std::string& choices, const std::string& descriptions) {
    require_placeholder(tmpl, "target_triple");
    require_placeholder(tmpl, "influence_triple_choice");
    require_placeholder(tmpl, "entity_desc");
    auto fill = [&](const std::string& section) {
        std::string s = substitute(section, "target_triple", target);
        s = substitute(s, "influence_triple_choice", choices);
        return substitute(s, "entity_desc", descriptions);
    };
    return {fill(tmpl.instruction), fill(tmpl.example), fill(tmpl.candidates),
            fill(tmpl.reference)};
}

}  // namespace

const char* to_string(AttackMode mode) {
    return mode == AttackMode::Delete ? "delete" : "add";
}

AttackMode attack_mode_from_string(const std::string& name) {
    if (name == "delete") return AttackMode::Delete;
    if (name == "add") return AttackMode::Add;
    throw Error("unknown attack mode: " + name);
}

std::string PromptParts::render() const {
    return instruction + "\n\n" + example + "\n\n" + candidates + "\n\n" + reference;
}

int PromptParts::token_estimate() const { return static_cast<int>(render().size() / 4); }

PromptTemplate PromptTemplate::parse(const std::string& text) {
    PromptTemplate tmpl;
    std::string* current = nullptr;
    std::istringstream in(text);
    std::string line;
    bool any_section = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "[instruction]") { current = &tmpl.instruction; any_section = true; continue; }
        if (line == "[example]") { current = &tmpl.example; any_section = true; continue; }
        if (line == "[candidates]") { current = &tmpl.candidates; any_section = true; continue; }
        if (line == "[reference]") { current = &tmpl.reference; any_section = true; continue; }
        if (!current) {
            if (line.empty()) continue;
            throw Error("prompt template: text before the first section header");
        }
        *current += line;
        *current += '\n';
    }
    if (!any_section) throw Error("prompt template: no sections found");
    tmpl.instruction = trim_blank(tmpl.instruction);
    tmpl.example = trim_blank(tmpl.example);
    tmpl.candidates = trim_blank(tmpl.candidates);
    tmpl.reference = trim_blank(tmpl.reference);
    return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open prompt template: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const PromptTemplate& PromptTemplate::builtin(AttackMode mode) {
    static const PromptTemplate del = parse(kDeleteTemplate);
    static const PromptTemplate add = parse(kAddTemplate);
    return mode == AttackMode::Delete ? del : add;
}

PromptParts build_prompt(AttackMode mode, const Triple& tgt,
                         const CandidateSet<Triple>& candidates, const KnowledgeGraph& kg,
                         const PromptTemplate& tmpl) {
    if (candidates.empty()) throw Error("build_prompt: empty candidate set");
    std::string choices;
    std::vector<EntityId> entities{tgt.s, tgt.o};
    for (std::size_t i = 0; i < candidates.items.size(); ++i) {
        const Triple& c = candidates.items[i].item;
        if (!choices.empty()) choices += '\n';
        choices += std::to_string(i + 1) + ". " + verbalize(c, kg, false);
        entities.push_back(c.s);
        entities.push_back(c.o);
    }
    (void)mode;
    return instantiate(tmpl, verbalize(tgt, kg, false), choices, describe_entities(entities, kg));
}

PromptParts build_prompt(AttackMode mode, const Triple& tgt,
                         const CandidateSet<EntityId>& candidates, const KnowledgeGraph& kg,
                         const PromptTemplate& tmpl) {
    if (candidates.empty()) throw Error("build_prompt: empty candidate set");
    std::string choices;
    std::vector<EntityId> entities{tgt.s, tgt.o};
    for (std::size_t i = 0; i < candidates.items.size(); ++i) {
        EntityId e = candidates.items[i].item;
        if (!choices.empty()) choices += '\n';
        choices += std::to_string(i + 1) + ". " + kg.entity_label(e);
        entities.push_back(e);
    }
    (void)mode;
    return instantiate(tmpl, verbalize(tgt, kg, false), choices, describe_entities(entities, kg));
}

ParsedDecision parse_decision(std::string_view response, int n_candidates) noexcept {
    try {
        if (n_candidates < 1) return {};
        static const std::regex pattern(
            R"re(["']?answer["']?\s*[:=]\s*["']?\s*([0-9]{1,9}))re",
            std::regex::ECMAScript | std::regex::icase);
        std::cregex_iterator it(response.data(), response.data() + response.size(), pattern);
        std::cregex_iterator end;
        std::string last;
        for (; it != end; ++it) last = (*it)[1].str();
        if (last.empty()) return {ParsedDecision::Status::ParseFailure, 0};
        int value = 0;
        auto [ptr, ec] = std::from_chars(last.data(), last.data() + last.size(), value);
        if (ec != std::errc{} || ptr != last.data() + last.size())
            return {ParsedDecision::Status::ParseFailure, 0};
        if (value < 1 || value > n_candidates)
            return {ParsedDecision::Status::RangeFailure, value};
        return {ParsedDecision::Status::Ok, value};
    } catch (...) {
        return {ParsedDecision::Status::ParseFailure, 0};
    }
}

}  // namespace kgattack
