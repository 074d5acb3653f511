#include "kgattack/kge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "kgattack/binio.hpp"
#include "kgattack/log.hpp"

namespace kgattack {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4b47434b;  // "KGCK"
constexpr std::uint32_t kCheckpointVersion = 1;

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) {
        double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    double z = std::exp(x);
    return z / (1.0 + z);
}

// ---- per-row scorers (shared by score / score_objects / score_subjects) ----

double transe_row(const double* s, const double* r, const double* o, int d) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
        double diff = s[k] + r[k] - o[k];
        acc += diff * diff;
    }
    return -std::sqrt(acc);
}

double distmult_row(const double* s, const double* r, const double* o, int d) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += s[k] * r[k] * o[k];
    return acc;
}

// Layout: [re(0..d-1), im(0..d-1)]; Re<s, r, conj(o)>.
double complex_row(const double* s, const double* r, const double* o, int d) {
    const double *sr = s, *si = s + d, *rr = r, *ri = r + d, *pr = o, *pi = o + d;
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
        acc += sr[k] * rr[k] * pr[k] + sr[k] * ri[k] * pi[k] + si[k] * rr[k] * pi[k] -
               si[k] * ri[k] * pr[k];
    }
    return acc;
}

// ConvE forward state up to the hidden activation; the score is then a plain
// dot product with the object embedding.
struct ConveForward {
    Vec image;   // (2*reshape_h) x reshape_w
    Vec pre;     // channels x out_h x out_w, pre-ReLU
    Vec feat;    // ReLU(pre)
    Vec hidden;  // dim, pre-ReLU
    Vec hact;    // ReLU(hidden)
};

ConveForward conve_forward(const KgeModel& m, const double* s, const double* r) {
    const int rh = m.config.reshape_h, rw = m.reshape_w();
    const int kh = m.config.kernel_h, kw = m.config.kernel_w;
    const int channels = m.config.conv_channels;
    const int oh = m.conv_out_h(), ow = m.conv_out_w();
    const int wimg = rw;

    ConveForward f;
    f.image.assign(static_cast<std::size_t>(2 * rh) * rw, 0.0);
    for (int k = 0; k < m.dim; ++k) {
        f.image[static_cast<std::size_t>(k / rw) * wimg + k % rw] = s[k];
        f.image[static_cast<std::size_t>(rh + k / rw) * wimg + k % rw] = r[k];
    }
    f.pre.assign(static_cast<std::size_t>(channels) * oh * ow, 0.0);
    f.feat = f.pre;
    for (int c = 0; c < channels; ++c) {
        const double* kern = m.kernels.row(c);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = 0.0;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx)
                        acc += kern[ky * kw + kx] *
                               f.image[static_cast<std::size_t>(y + ky) * wimg + x + kx];
                std::size_t idx = (static_cast<std::size_t>(c) * oh + y) * ow + x;
                f.pre[idx] = acc;
                f.feat[idx] = acc > 0 ? acc : 0.0;
            }
        }
    }
    f.hidden.assign(m.dim, 0.0);
    f.hact.assign(m.dim, 0.0);
    const int features = m.conv_features();
    for (int j = 0; j < m.dim; ++j) {
        const double* w = m.projection.row(j);
        double acc = 0.0;
        for (int fidx = 0; fidx < features; ++fidx) acc += w[fidx] * f.feat[fidx];
        f.hidden[j] = acc;
        f.hact[j] = acc > 0 ? acc : 0.0;
    }
    return f;
}

// Backpropagates d score / d hact into parameter gradients. Accumulates into
// the supplied buffers (which must be pre-sized or empty-initialized).
void conve_backward(const KgeModel& m, const ConveForward& f, const double* s, const double* r,
                    const Vec& dhact, Vec& ds, Vec& dr, Mat& dkernels, Mat& dprojection) {
    const int rh = m.config.reshape_h, rw = m.reshape_w();
    const int kh = m.config.kernel_h, kw = m.config.kernel_w;
    const int channels = m.config.conv_channels;
    const int oh = m.conv_out_h(), ow = m.conv_out_w();
    const int features = m.conv_features();
    (void)s;
    (void)r;

    Vec dfeat(features, 0.0);
    for (int j = 0; j < m.dim; ++j) {
        double dh = f.hidden[j] > 0 ? dhact[j] : 0.0;
        if (dh == 0.0) continue;
        double* dw = dprojection.row(j);
        const double* w = m.projection.row(j);
        for (int fidx = 0; fidx < features; ++fidx) {
            dw[fidx] += dh * f.feat[fidx];
            dfeat[fidx] += dh * w[fidx];
        }
    }
    Vec dimage(f.image.size(), 0.0);
    for (int c = 0; c < channels; ++c) {
        const double* kern = m.kernels.row(c);
        double* dkern = dkernels.row(c);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                std::size_t idx = (static_cast<std::size_t>(c) * oh + y) * ow + x;
                double dp = f.pre[idx] > 0 ? dfeat[idx] : 0.0;
                if (dp == 0.0) continue;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        std::size_t img_idx = static_cast<std::size_t>(y + ky) * rw + x + kx;
                        dkern[ky * kw + kx] += dp * f.image[img_idx];
                        dimage[img_idx] += dp * kern[ky * kw + kx];
                    }
                }
            }
        }
    }
    for (int k = 0; k < m.dim; ++k) {
        ds[k] += dimage[static_cast<std::size_t>(k / rw) * rw + k % rw];
        dr[k] += dimage[static_cast<std::size_t>(rh + k / rw) * rw + k % rw];
    }
}

void check_ids(const KgeModel& m, const Triple& t) {
    if (t.s >= static_cast<EntityId>(m.entities.rows) ||
        t.o >= static_cast<EntityId>(m.entities.rows) ||
        t.r >= static_cast<RelationId>(m.relations.rows))
        throw Error("score: id out of range for model");
}

// ---- optimizers ----

struct Adagrad {
    double lr;
    double eps = 1e-10;
    Mat accum;

    Adagrad(double lr_, int rows, int cols) : lr(lr_), accum(rows, cols) {}

    void update(Mat& param, int row, std::span<const double> grad) {
        double* acc = accum.row(row);
        double* p = param.row(row);
        for (std::size_t k = 0; k < grad.size(); ++k) {
            acc[k] += grad[k] * grad[k];
            p[k] -= lr * grad[k] / (std::sqrt(acc[k]) + eps);
        }
    }
};

struct AdamState {
    Mat m, v;
    AdamState(int rows, int cols) : m(rows, cols), v(rows, cols) {}
};

struct Adam {
    double lr;
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long t = 0;

    void step(Mat& param, const Mat& grad, AdamState& state) const {
        double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (std::size_t i = 0; i < param.a.size(); ++i) {
            double g = grad.a[i];
            state.m.a[i] = b1 * state.m.a[i] + (1 - b1) * g;
            state.v.a[i] = b2 * state.v.a[i] + (1 - b2) * g * g;
            double mhat = state.m.a[i] / c1;
            double vhat = state.v.a[i] / c2;
            param.a[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

// Accumulates per-row gradients so rows touched twice (e.g. s == o) update
// once with the summed gradient.
struct RowGrads {
    struct Entry {
        int table;  // 0 = entities, 1 = relations
        int row;
        Vec g;
    };
    std::vector<Entry> entries;

    Vec& slot(int table, int row, int cols) {
        for (auto& e : entries)
            if (e.table == table && e.row == row) return e.g;
        entries.push_back({table, row, Vec(cols, 0.0)});
        return entries.back().g;
    }
    void clear() { entries.clear(); }
};

Triple corrupt_uniform(Rng& rng, const Triple& t, std::size_t n_entities) {
    Triple neg = t;
    bool corrupt_object = rng.coin();
    for (int tries = 0; tries < 16; ++tries) {
        auto e = static_cast<EntityId>(rng.index(n_entities));
        if (corrupt_object) {
            if (e != t.o) {
                neg.o = e;
                return neg;
            }
        } else {
            if (e != t.s) {
                neg.s = e;
                return neg;
            }
        }
    }
    return neg;  // degenerate tiny-entity-count case; neg == t is harmless
}

void check_finite_loss(double loss, int epoch) {
    if (!std::isfinite(loss))
        throw Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
}

void train_margin(KgeModel& m, const KnowledgeGraph& kg, const KgeConfig& cfg) {
    Rng rng(splitmix64(cfg.seed ^ 0x7261696e));
    Adagrad ent_opt(cfg.lr, m.entities.rows, m.entities.cols);
    Adagrad rel_opt(cfg.lr, m.relations.rows, m.relations.cols);
    const int d = m.dim;
    std::vector<std::uint32_t> order(kg.train().size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

    RowGrads grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.eng);
        double loss_sum = 0.0;
        std::size_t pairs = 0;
        for (std::uint32_t idx : order) {
            const Triple& pos = kg.train()[idx];
            for (int n = 0; n < cfg.negatives; ++n) {
                Triple neg = corrupt_uniform(rng, pos, kg.entity_count());
                const double* sp = m.entities.row(pos.s);
                const double* rp = m.relations.row(pos.r);
                const double* op = m.entities.row(pos.o);
                const double* sn = m.entities.row(neg.s);
                const double* on = m.entities.row(neg.o);
                double dist_pos = -transe_row(sp, rp, op, d);
                double dist_neg = -transe_row(sn, rp, on, d);
                double hinge = cfg.margin + dist_pos - dist_neg;
                ++pairs;
                if (hinge <= 0) continue;
                loss_sum += hinge;

                grads.clear();
                Vec& gs = grads.slot(0, static_cast<int>(pos.s), d);
                Vec& go = grads.slot(0, static_cast<int>(pos.o), d);
                Vec& gr = grads.slot(1, static_cast<int>(pos.r), d);
                if (dist_pos > 0) {
                    for (int k = 0; k < d; ++k) {
                        double u = (sp[k] + rp[k] - op[k]) / dist_pos;
                        gs[k] += u;
                        gr[k] += u;
                        go[k] -= u;
                    }
                }
                Vec& gsn = grads.slot(0, static_cast<int>(neg.s), d);
                Vec& gon = grads.slot(0, static_cast<int>(neg.o), d);
                Vec& grn = grads.slot(1, static_cast<int>(neg.r), d);
                if (dist_neg > 0) {
                    for (int k = 0; k < d; ++k) {
                        double u = (sn[k] + rp[k] - on[k]) / dist_neg;
                        gsn[k] -= u;
                        grn[k] -= u;
                        gon[k] += u;
                    }
                }
                for (auto& e : grads.entries) {
                    if (e.table == 0)
                        ent_opt.update(m.entities, e.row, e.g);
                    else
                        rel_opt.update(m.relations, e.row, e.g);
                }
            }
        }
        double loss = pairs ? loss_sum / static_cast<double>(pairs) : 0.0;
        check_finite_loss(loss, epoch);
        m.loss_history.push_back(loss);
    }
}

void train_bce(KgeModel& m, const KnowledgeGraph& kg, const KgeConfig& cfg) {
    const bool cplx = m.arch == Architecture::ComplEx;
    const int cols = m.entities.cols;
    const int d = m.dim;
    Rng rng(splitmix64(cfg.seed ^ 0x62636531));
    Adagrad ent_opt(cfg.lr, m.entities.rows, cols);
    Adagrad rel_opt(cfg.lr, m.relations.rows, cols);
    std::vector<std::uint32_t> order(kg.train().size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

    auto row_score = [&](const Triple& t) {
        const double* s = m.entities.row(t.s);
        const double* r = m.relations.row(t.r);
        const double* o = m.entities.row(t.o);
        return cplx ? complex_row(s, r, o, d) : distmult_row(s, r, o, d);
    };
    // dL/dscore = df; adds score gradients plus weight decay into the buffer.
    RowGrads grads;
    auto accumulate = [&](const Triple& t, double df, bool decay_all) {
        const double* s = m.entities.row(t.s);
        const double* r = m.relations.row(t.r);
        const double* o = m.entities.row(t.o);
        Vec& gs = grads.slot(0, static_cast<int>(t.s), cols);
        Vec& gr = grads.slot(1, static_cast<int>(t.r), cols);
        Vec& go = grads.slot(0, static_cast<int>(t.o), cols);
        if (!cplx) {
            for (int k = 0; k < d; ++k) {
                gs[k] += df * r[k] * o[k];
                gr[k] += df * s[k] * o[k];
                go[k] += df * s[k] * r[k];
            }
        } else {
            const double *sr = s, *si = s + d, *rr = r, *ri = r + d, *pr = o, *pi = o + d;
            for (int k = 0; k < d; ++k) {
                gs[k] += df * (rr[k] * pr[k] + ri[k] * pi[k]);
                gs[d + k] += df * (rr[k] * pi[k] - ri[k] * pr[k]);
                gr[k] += df * (sr[k] * pr[k] + si[k] * pi[k]);
                gr[d + k] += df * (sr[k] * pi[k] - si[k] * pr[k]);
                go[k] += df * (sr[k] * rr[k] - si[k] * ri[k]);
                go[d + k] += df * (sr[k] * ri[k] + si[k] * rr[k]);
            }
        }
        if (decay_all && cfg.l2 > 0) {
            for (int k = 0; k < cols; ++k) {
                gs[k] += 2 * cfg.l2 * s[k];
                gr[k] += 2 * cfg.l2 * r[k];
                go[k] += 2 * cfg.l2 * o[k];
            }
        }
    };
    auto apply = [&]() {
        for (auto& e : grads.entries) {
            if (e.table == 0)
                ent_opt.update(m.entities, e.row, e.g);
            else
                rel_opt.update(m.relations, e.row, e.g);
        }
        grads.clear();
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.eng);
        double loss_sum = 0.0;
        std::size_t terms = 0;
        for (std::uint32_t idx : order) {
            const Triple& pos = kg.train()[idx];
            double f = row_score(pos);
            loss_sum += softplus(-f);
            ++terms;
            accumulate(pos, sigmoid(f) - 1.0, /*decay_all=*/true);
            apply();
            for (int n = 0; n < cfg.negatives; ++n) {
                Triple neg = corrupt_uniform(rng, pos, kg.entity_count());
                double fn = row_score(neg);
                loss_sum += softplus(fn);
                ++terms;
                accumulate(neg, sigmoid(fn), /*decay_all=*/false);
                apply();
            }
        }
        double loss = terms ? loss_sum / static_cast<double>(terms) : 0.0;
        check_finite_loss(loss, epoch);
        m.loss_history.push_back(loss);
    }
}

void train_conve(KgeModel& m, const KnowledgeGraph& kg, const KgeConfig& cfg) {
    Rng rng(splitmix64(cfg.seed ^ 0x636f6e76));
    const auto n_entities = static_cast<int>(kg.entity_count());

    // 1-vs-all grouping by (s, r); deterministic base order.
    std::map<std::pair<EntityId, RelationId>, std::vector<EntityId>> group_map;
    for (const Triple& t : kg.train()) group_map[{t.s, t.r}].push_back(t.o);
    std::vector<std::pair<std::pair<EntityId, RelationId>, std::vector<EntityId>>> groups(
        group_map.begin(), group_map.end());

    Adam adam{cfg.lr};
    AdamState st_ent(m.entities.rows, m.entities.cols);
    AdamState st_rel(m.relations.rows, m.relations.cols);
    AdamState st_ker(m.kernels.rows, m.kernels.cols);
    AdamState st_proj(m.projection.rows, m.projection.cols);

    Mat g_ent(m.entities.rows, m.entities.cols);
    Mat g_rel(m.relations.rows, m.relations.cols);
    Mat g_ker(m.kernels.rows, m.kernels.cols);
    Mat g_proj(m.projection.rows, m.projection.cols);

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const double ls = cfg.label_smoothing;
    std::vector<char> is_positive(n_entities, 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.eng);
        double loss_sum = 0.0;
        for (std::size_t gi : order) {
            const auto& [sr, objects] = groups[gi];
            const auto [s, r] = sr;
            for (EntityId o : objects) is_positive[o] = 1;

            ConveForward f = conve_forward(m, m.entities.row(s), m.relations.row(r));
            g_ent.fill(0.0);
            g_rel.fill(0.0);
            g_ker.fill(0.0);
            g_proj.fill(0.0);

            Vec dhact(m.dim, 0.0);
            double loss = 0.0;
            for (int e = 0; e < n_entities; ++e) {
                const double* oe = m.entities.row(e);
                double x = dot({f.hact.data(), f.hact.size()},
                               {oe, static_cast<std::size_t>(m.dim)});
                double y = is_positive[e] ? 1.0 : 0.0;
                double yt = y * (1.0 - ls) + ls / n_entities;
                loss += std::max(x, 0.0) - x * yt + softplus(-std::abs(x));
                double g = (sigmoid(x) - yt) / n_entities;
                axpy(g, {oe, static_cast<std::size_t>(m.dim)}, dhact);
                axpy(g, f.hact, g_ent.row_span(e));
            }
            loss /= n_entities;
            loss_sum += loss;

            Vec ds(m.dim, 0.0), dr(m.dim, 0.0);
            conve_backward(m, f, m.entities.row(s), m.relations.row(r), dhact, ds, dr, g_ker,
                           g_proj);
            axpy(1.0, ds, g_ent.row_span(static_cast<int>(s)));
            axpy(1.0, dr, g_rel.row_span(static_cast<int>(r)));

            ++adam.t;
            adam.step(m.entities, g_ent, st_ent);
            adam.step(m.relations, g_rel, st_rel);
            adam.step(m.kernels, g_ker, st_ker);
            adam.step(m.projection, g_proj, st_proj);

            for (EntityId o : objects) is_positive[o] = 0;
        }
        double loss = groups.empty() ? 0.0 : loss_sum / static_cast<double>(groups.size());
        check_finite_loss(loss, epoch);
        m.loss_history.push_back(loss);
    }
}

}  // namespace

const char* to_string(Architecture arch) {
    switch (arch) {
        case Architecture::TransE: return "transe";
        case Architecture::DistMult: return "distmult";
        case Architecture::ComplEx: return "complex";
        case Architecture::ConvE: return "conve";
    }
    return "?";
}

Architecture architecture_from_string(const std::string& name) {
    if (name == "transe") return Architecture::TransE;
    if (name == "distmult") return Architecture::DistMult;
    if (name == "complex") return Architecture::ComplEx;
    if (name == "conve") return Architecture::ConvE;
    throw Error("unknown architecture: " + name);
}

KgeConfig desk_scale_config(Architecture arch) {
    KgeConfig cfg;
    cfg.arch = arch;
    switch (arch) {
        case Architecture::TransE:
            cfg.lr = 0.1;
            cfg.margin = 1.0;
            break;
        case Architecture::DistMult:
        case Architecture::ComplEx:
            cfg.lr = 0.1;
            cfg.l2 = 1e-3;
            break;
        case Architecture::ConvE:
            cfg.lr = 1e-3;
            break;
    }
    return cfg;
}

double score(const KgeModel& m, const Triple& t) {
    check_ids(m, t);
    const double* s = m.entities.row(t.s);
    const double* r = m.relations.row(t.r);
    const double* o = m.entities.row(t.o);
    switch (m.arch) {
        case Architecture::TransE: return transe_row(s, r, o, m.dim);
        case Architecture::DistMult: return distmult_row(s, r, o, m.dim);
        case Architecture::ComplEx: return complex_row(s, r, o, m.dim);
        case Architecture::ConvE: {
            ConveForward f = conve_forward(m, s, r);
            return dot(f.hact, {o, static_cast<std::size_t>(m.dim)});
        }
    }
    throw Error("unreachable");
}

std::vector<double> score_objects(const KgeModel& m, EntityId s, RelationId r) {
    check_ids(m, Triple{s, r, 0});
    const auto n = static_cast<std::size_t>(m.entities.rows);
    std::vector<double> out(n);
    const double* sp = m.entities.row(s);
    const double* rp = m.relations.row(r);
    if (m.arch == Architecture::ConvE) {
        ConveForward f = conve_forward(m, sp, rp);
        for (std::size_t e = 0; e < n; ++e)
            out[e] = dot(f.hact, {m.entities.row(static_cast<int>(e)),
                                  static_cast<std::size_t>(m.dim)});
        return out;
    }
    for (std::size_t e = 0; e < n; ++e) {
        const double* op = m.entities.row(static_cast<int>(e));
        switch (m.arch) {
            case Architecture::TransE: out[e] = transe_row(sp, rp, op, m.dim); break;
            case Architecture::DistMult: out[e] = distmult_row(sp, rp, op, m.dim); break;
            case Architecture::ComplEx: out[e] = complex_row(sp, rp, op, m.dim); break;
            default: break;
        }
    }
    return out;
}

std::vector<double> score_subjects(const KgeModel& m, RelationId r, EntityId o) {
    check_ids(m, Triple{0, r, o});
    const auto n = static_cast<std::size_t>(m.entities.rows);
    std::vector<double> out(n);
    const double* rp = m.relations.row(r);
    const double* op = m.entities.row(o);
    for (std::size_t e = 0; e < n; ++e) {
        const double* sp = m.entities.row(static_cast<int>(e));
        switch (m.arch) {
            case Architecture::TransE: out[e] = transe_row(sp, rp, op, m.dim); break;
            case Architecture::DistMult: out[e] = distmult_row(sp, rp, op, m.dim); break;
            case Architecture::ComplEx: out[e] = complex_row(sp, rp, op, m.dim); break;
            case Architecture::ConvE: {
                ConveForward f = conve_forward(m, sp, rp);
                out[e] = dot(f.hact, {op, static_cast<std::size_t>(m.dim)});
                break;
            }
        }
    }
    return out;
}

ScoreGradients score_gradients(const KgeModel& m, const Triple& t) {
    check_ids(m, t);
    const int d = m.dim;
    const double* s = m.entities.row(t.s);
    const double* r = m.relations.row(t.r);
    const double* o = m.entities.row(t.o);

    ScoreGradients g;
    g.subject.assign(m.entities.cols, 0.0);
    g.relation.assign(m.relations.cols, 0.0);
    g.object.assign(m.entities.cols, 0.0);

    switch (m.arch) {
        case Architecture::TransE: {
            double dist = -transe_row(s, r, o, d);
            if (dist > 0) {
                for (int k = 0; k < d; ++k) {
                    double u = (s[k] + r[k] - o[k]) / dist;
                    g.subject[k] = -u;
                    g.relation[k] = -u;
                    g.object[k] = u;
                }
            }
            break;
        }
        case Architecture::DistMult: {
            for (int k = 0; k < d; ++k) {
                g.subject[k] = r[k] * o[k];
                g.relation[k] = s[k] * o[k];
                g.object[k] = s[k] * r[k];
            }
            break;
        }
        case Architecture::ComplEx: {
            const double *sr = s, *si = s + d, *rr = r, *ri = r + d, *pr = o, *pi = o + d;
            for (int k = 0; k < d; ++k) {
                g.subject[k] = rr[k] * pr[k] + ri[k] * pi[k];
                g.subject[d + k] = rr[k] * pi[k] - ri[k] * pr[k];
                g.relation[k] = sr[k] * pr[k] + si[k] * pi[k];
                g.relation[d + k] = sr[k] * pi[k] - si[k] * pr[k];
                g.object[k] = sr[k] * rr[k] - si[k] * ri[k];
                g.object[d + k] = sr[k] * ri[k] + si[k] * rr[k];
            }
            break;
        }
        case Architecture::ConvE: {
            g.kernels = Mat(m.kernels.rows, m.kernels.cols);
            g.projection = Mat(m.projection.rows, m.projection.cols);
            ConveForward f = conve_forward(m, s, r);
            for (int k = 0; k < d; ++k) g.object[k] = f.hact[k];
            Vec dhact(o, o + d);  // d score / d hact = object embedding
            conve_backward(m, f, s, r, dhact, g.subject, g.relation, g.kernels, g.projection);
            break;
        }
    }
    return g;
}

KgeModel init_model(const KnowledgeGraph& kg, const KgeConfig& cfg) {
    if (cfg.dim <= 0) throw Error("dim must be positive");
    if (cfg.arch == Architecture::ConvE) {
        if (cfg.reshape_h <= 0 || cfg.dim % cfg.reshape_h != 0)
            throw Error("ConvE: dim must be divisible by reshape_h");
        int rw = cfg.dim / cfg.reshape_h;
        if (2 * cfg.reshape_h < cfg.kernel_h || rw < cfg.kernel_w)
            throw Error("ConvE: kernel does not fit the reshaped input");
    }

    KgeModel m;
    m.arch = cfg.arch;
    m.dim = cfg.dim;
    m.seed = cfg.seed;
    m.config = cfg;
    const int cols = cfg.arch == Architecture::ComplEx ? 2 * cfg.dim : cfg.dim;
    m.entities = Mat(static_cast<int>(kg.entity_count()), cols);
    m.relations = Mat(static_cast<int>(kg.relation_count()), cols);

    Rng rng(splitmix64(cfg.seed));
    switch (cfg.arch) {
        case Architecture::TransE: {
            double b = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
            for (double& v : m.entities.a) v = rng.uniform(-b, b);
            for (double& v : m.relations.a) v = rng.uniform(-b, b);
            break;
        }
        case Architecture::DistMult:
        case Architecture::ComplEx: {
            for (double& v : m.entities.a) v = rng.normal(0.0, 0.1);
            for (double& v : m.relations.a) v = rng.normal(0.0, 0.1);
            break;
        }
        case Architecture::ConvE: {
            for (double& v : m.entities.a) v = rng.normal(0.0, 0.1);
            for (double& v : m.relations.a) v = rng.normal(0.0, 0.1);
            m.kernels = Mat(cfg.conv_channels, cfg.kernel_h * cfg.kernel_w);
            for (double& v : m.kernels.a) v = rng.normal(0.0, 0.1);
            m.projection = Mat(cfg.dim, m.conv_features());
            double pb = std::sqrt(1.0 / m.conv_features());
            for (double& v : m.projection.a) v = rng.normal(0.0, pb);
            break;
        }
    }
    return m;
}

KgeModel train(const KnowledgeGraph& kg, const KgeConfig& cfg) {
    if (kg.train().empty()) throw Error("train: empty train split");
    KgeModel m = init_model(kg, cfg);
    switch (cfg.arch) {
        case Architecture::TransE: train_margin(m, kg, cfg); break;
        case Architecture::DistMult:
        case Architecture::ComplEx: train_bce(m, kg, cfg); break;
        case Architecture::ConvE: train_conve(m, kg, cfg); break;
    }
    for (double v : m.entities.a)
        if (!std::isfinite(v)) throw Error("train: non-finite entity parameters");
    for (double v : m.relations.a)
        if (!std::isfinite(v)) throw Error("train: non-finite relation parameters");
    return m;
}

EvalMetrics evaluate(const KgeModel& model, const KnowledgeGraph& kg,
                     std::span<const Triple> targets, bool filtered) {
    if (targets.empty()) throw Error("evaluate: empty target list");
    EvalMetrics out;
    out.per_target.reserve(targets.size());
    double rr_sum = 0.0, h1_sum = 0.0, h10_sum = 0.0;
    const auto n = static_cast<EntityId>(kg.entity_count());

    auto rank_of = [&](const std::vector<double>& scores, EntityId truth, auto&& excluded) {
        double st = scores[truth];
        long better = 0, tied = 1;
        for (EntityId e = 0; e < n; ++e) {
            if (e == truth) continue;
            if (filtered && excluded(e)) continue;
            if (scores[e] > st)
                ++better;
            else if (scores[e] == st)
                ++tied;
        }
        return static_cast<double>(better) + 0.5 * (tied + 1);
    };

    for (const Triple& t : targets) {
        auto obj_scores = score_objects(model, t.s, t.r);
        double rank_o = rank_of(obj_scores, t.o,
                                [&](EntityId e) { return kg.known(Triple{t.s, t.r, e}); });
        auto subj_scores = score_subjects(model, t.r, t.o);
        double rank_s = rank_of(subj_scores, t.s,
                                [&](EntityId e) { return kg.known(Triple{e, t.r, t.o}); });
        out.per_target.push_back({t, rank_s, rank_o});
        rr_sum += 1.0 / rank_s + 1.0 / rank_o;
        h1_sum += (rank_s <= 1.0) + (rank_o <= 1.0);
        h10_sum += (rank_s <= 10.0) + (rank_o <= 10.0);
    }
    double sides = 2.0 * static_cast<double>(targets.size());
    out.mrr = rr_sum / sides;
    out.hits1 = h1_sum / sides;
    out.hits10 = h10_sum / sides;
    return out;
}

std::vector<Triple> select_attack_targets(std::span<const KgeModel> models,
                                          const KnowledgeGraph& kg) {
    if (models.empty()) throw Error("select_attack_targets: no models");
    if (kg.test().empty()) return {};
    std::vector<char> keep(kg.test().size(), 1);
    for (const KgeModel& m : models) {
        EvalMetrics metrics = evaluate(m, kg, kg.test());
        for (std::size_t i = 0; i < kg.test().size(); ++i) {
            const RankResult& r = metrics.per_target[i];
            if (!(r.rank_s == 1.0 && r.rank_o == 1.0)) keep[i] = 0;
        }
    }
    std::vector<Triple> out;
    for (std::size_t i = 0; i < kg.test().size(); ++i)
        if (keep[i]) out.push_back(kg.test()[i]);
    if (out.empty())
        logging::warn("select_attack_targets: no test triple is Hits@1 under every model");
    return out;
}

void save_checkpoint(const KgeModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path.string());
    binio::write_u32(out, kCheckpointMagic);
    binio::write_u32(out, kCheckpointVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(m.arch));
    binio::write_u32(out, static_cast<std::uint32_t>(m.dim));
    binio::write_u64(out, static_cast<std::uint64_t>(m.entities.rows));
    binio::write_u64(out, static_cast<std::uint64_t>(m.relations.rows));
    binio::write_u64(out, m.seed);
    binio::write_mat(out, m.entities);
    binio::write_mat(out, m.relations);
    if (m.arch == Architecture::ConvE) {
        binio::write_u32(out, static_cast<std::uint32_t>(m.config.conv_channels));
        binio::write_u32(out, static_cast<std::uint32_t>(m.config.kernel_h));
        binio::write_u32(out, static_cast<std::uint32_t>(m.config.kernel_w));
        binio::write_u32(out, static_cast<std::uint32_t>(m.config.reshape_h));
        binio::write_mat(out, m.kernels);
        binio::write_mat(out, m.projection);
    }
    if (!out) throw Error("write failed: " + path.string());
}

KgeModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + path.string());
    if (binio::read_u32(in) != kCheckpointMagic) throw Error("not a model checkpoint");
    auto version = binio::read_u32(in);
    if (version != kCheckpointVersion)
        throw Error("unsupported checkpoint version " + std::to_string(version));
    KgeModel m;
    m.arch = static_cast<Architecture>(binio::read_u32(in));
    m.dim = static_cast<int>(binio::read_u32(in));
    auto n_ent = binio::read_u64(in);
    auto n_rel = binio::read_u64(in);
    m.seed = binio::read_u64(in);
    m.config.arch = m.arch;
    m.config.dim = m.dim;
    m.config.seed = m.seed;
    m.entities = binio::read_mat(in);
    m.relations = binio::read_mat(in);
    if (static_cast<std::uint64_t>(m.entities.rows) != n_ent ||
        static_cast<std::uint64_t>(m.relations.rows) != n_rel)
        throw Error("checkpoint header/block mismatch");
    if (m.arch == Architecture::ConvE) {
        m.config.conv_channels = static_cast<int>(binio::read_u32(in));
        m.config.kernel_h = static_cast<int>(binio::read_u32(in));
        m.config.kernel_w = static_cast<int>(binio::read_u32(in));
        m.config.reshape_h = static_cast<int>(binio::read_u32(in));
        m.kernels = binio::read_mat(in);
        m.projection = binio::read_mat(in);
    }
    return m;
}

}  // namespace kgattack
