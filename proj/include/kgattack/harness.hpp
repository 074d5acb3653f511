#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kgattack/attack.hpp"
#include "kgattack/kge.hpp"
#include "kgattack/prompt.hpp"

namespace kgattack {

enum class FilterKind { Semantic, Centrality, Hoa, Random };

const char* to_string(FilterKind f);
FilterKind filter_from_string(const std::string& name);

struct ExperimentConfig {
    // Dataset: a directory, or the bundled synthetic generator.
    std::string data_dir;
    bool synthetic = true;
    int synth_pairs = 25;
    std::uint64_t synth_seed = 7;

    std::vector<Architecture> architectures{Architecture::TransE};
    AttackMode mode = AttackMode::Delete;
    FilterKind filter = FilterKind::Semantic;
    int k = 5;             // TopK per filter
    int centrality_h = 3;  // hop radius for the centrality filter
    bool with_desc = false;
    std::string provider = "ngram";  // ngram | hash | http | hoa

    bool llm = false;
    std::string replay_transcript;  // non-empty -> replay instead of live calls
    std::string template_path;      // non-empty -> custom prompt template

    std::vector<std::uint64_t> seeds{1};
    std::string out_dir;

    int dim = 32;
    int epochs = 200;
    bool isolated_retrain = false;  // one retrain per target (small KGs only)
    int hoa_hops = 3;
    int hoa_epochs = 100;
};

/// Flat key = value config file (strings, numbers, booleans, comma lists).
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ArchMetrics {
    std::string arch;
    double clean_mrr = 0, clean_hits1 = 0, clean_hits10 = 0;
    double poisoned_mrr = 0, poisoned_hits1 = 0, poisoned_hits10 = 0;
};

struct TargetRanks {
    double clean_rank_s = 0, clean_rank_o = 0;
    double poisoned_rank_s = 0, poisoned_rank_o = 0;
};

struct AttackRecord {
    Triple target{};
    std::string target_text;
    Perturbation perturbation{};
    std::string perturbation_text;
    std::string explanation;
    bool fallback_used = false;
    std::map<std::string, TargetRanks> ranks;  // keyed by architecture name
};

struct SeedReport {
    std::uint64_t seed = 0;
    std::size_t clean_train_size = 0;
    std::size_t poisoned_train_size = 0;
    std::size_t deletions_applied = 0;
    std::size_t additions_applied = 0;
    std::vector<std::string> targets;  // verbalized
    std::vector<ArchMetrics> metrics;
    std::vector<AttackRecord> records;
};

struct AttackReport {
    // config echo
    std::string dataset;
    std::string mode;
    std::string filter;
    std::string provider;
    int k = 0;
    bool llm = false;
    std::vector<std::string> architectures;

    std::vector<SeedReport> seeds;
    std::vector<std::string> failures;
    bool partial = false;

    // meta; excluded from reproducibility comparisons
    double wall_clock_s = 0;
    std::string created;
};

/// Full pipeline: clean training, target selection, per-target attack,
/// joint poisoning, retraining from scratch with the same seeds, and metric
/// comparison. Stage errors are recorded as failure markers (-> partial)
/// rather than aborting the remaining seeds.
AttackReport run_experiment(const ExperimentConfig& config);

/// Deletion: uniform choice from the target's 1-hop triple-graph
/// neighborhood. Addition: uniform incident triple, uniform replacement
/// side and entity, novelty-checked. Deterministic given seed.
Perturbation random_baseline(AttackMode mode, const Triple& tgt, const KnowledgeGraph& kg,
                             std::uint64_t seed);
Perturbation random_baseline(AttackMode mode, const Triple& tgt, const TripleGraph& tg,
                             std::uint64_t seed);

std::string report_to_json_string(const AttackReport& report);
AttackReport report_from_json_string(const std::string& json_text);

/// Writes report.json, targets.csv, and table.txt into out_dir.
void emit_report(const AttackReport& report, const std::filesystem::path& out_dir);

}  // namespace kgattack
