#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "kgattack/kg.hpp"
#include "kgattack/linalg.hpp"

namespace kgattack {

enum class Architecture { TransE, DistMult, ComplEx, ConvE };

const char* to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

struct KgeConfig {
    Architecture arch = Architecture::TransE;
    int dim = 32;
    int epochs = 200;
    double lr = 0.1;             // Adagrad step (TransE/DistMult/ComplEx), Adam step (ConvE)
    int negatives = 10;          // negatives per positive; unused by ConvE (1-vs-all)
    double margin = 1.0;         // TransE margin ranking loss
    double l2 = 1e-3;            // DistMult/ComplEx weight decay on touched rows
    double label_smoothing = 0.1;  // ConvE
    int conv_channels = 8;
    int kernel_h = 3;
    int kernel_w = 3;
    int reshape_h = 4;  // entity reshaped to reshape_h x (dim / reshape_h)
    std::uint64_t seed = 1;
};

/// Pinned per-architecture desk-scale recipe (dim 32).
KgeConfig desk_scale_config(Architecture arch);

struct KgeModel {
    Architecture arch = Architecture::TransE;
    int dim = 0;
    std::uint64_t seed = 0;
    KgeConfig config;

    Mat entities;    // |E| x dim (ComplEx: |E| x 2*dim, re then im)
    Mat relations;   // |R| x dim (ComplEx: 2*dim)
    Mat kernels;     // ConvE: channels x (kernel_h*kernel_w)
    Mat projection;  // ConvE: dim x conv_features

    std::vector<double> loss_history;  // per-epoch training loss; not serialized

    int reshape_w() const { return dim / config.reshape_h; }
    int conv_out_h() const { return 2 * config.reshape_h - config.kernel_h + 1; }
    int conv_out_w() const { return reshape_w() - config.kernel_w + 1; }
    int conv_features() const { return config.conv_channels * conv_out_h() * conv_out_w(); }
};

/// Architecture-specific plausibility score; higher is more plausible for
/// every architecture (TransE returns the negated translation distance).
double score(const KgeModel& model, const Triple& t);

/// Scores (s, r, e) for every entity e. Bitwise identical to calling
/// score() per candidate.
std::vector<double> score_objects(const KgeModel& model, EntityId s, RelationId r);
/// Scores (e, r, o) for every entity e.
std::vector<double> score_subjects(const KgeModel& model, RelationId r, EntityId o);

/// Analytic gradients of score(model, t) w.r.t. the touched parameters.
struct ScoreGradients {
    Vec subject;     // d score / d entities[t.s]
    Vec relation;    // d score / d relations[t.r]
    Vec object;      // d score / d entities[t.o]
    Mat kernels;     // ConvE only
    Mat projection;  // ConvE only
};
ScoreGradients score_gradients(const KgeModel& model, const Triple& t);

KgeModel init_model(const KnowledgeGraph& kg, const KgeConfig& config);

/// Deterministic given config.seed. Throws on NaN loss (message carries the
/// epoch). loss_history records the mean per-epoch training loss.
KgeModel train(const KnowledgeGraph& kg, const KgeConfig& config);

struct RankResult {
    Triple target;
    double rank_s = 0;  // filtered subject-corruption rank, average over ties
    double rank_o = 0;
    double rr_s() const { return 1.0 / rank_s; }
    double rr_o() const { return 1.0 / rank_o; }
};

struct EvalMetrics {
    double mrr = 0;
    double hits1 = 0;
    double hits10 = 0;
    std::vector<RankResult> per_target;
};

/// Filtered link-prediction metrics over both corruption sides. With
/// filtered=false, ranks are raw (known corruptions are not excluded).
EvalMetrics evaluate(const KgeModel& model, const KnowledgeGraph& kg,
                     std::span<const Triple> targets, bool filtered = true);

/// Test triples with both-side filtered rank 1 under every supplied model.
std::vector<Triple> select_attack_targets(std::span<const KgeModel> models,
                                          const KnowledgeGraph& kg);

void save_checkpoint(const KgeModel& model, const std::filesystem::path& path);
KgeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace kgattack
