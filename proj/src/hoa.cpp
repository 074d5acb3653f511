#include "kgattack/hoa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "kgattack/binio.hpp"
#include "kgattack/log.hpp"

namespace kgattack {

namespace {

constexpr std::uint32_t kFeaturesMagic = 0x484f4146;  // "HOAF"
constexpr std::uint32_t kHeadMagic = 0x484f4148;      // "HOAH"
constexpr std::uint32_t kVersion = 1;

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double z = std::exp(x);
    return z / (1.0 + z);
}

void write_vec(std::ostream& out, const Vec& v) {
    binio::write_u64(out, v.size());
    binio::write_f64(out, v);
}

Vec read_vec(std::istream& in) {
    auto size = binio::read_u64(in);
    if (size > (1u << 28)) throw Error("corrupt vector header");
    Vec v(size);
    binio::read_f64(in, v);
    return v;
}

void write_mlp(std::ostream& out, const Mlp& m) {
    binio::write_mat(out, m.w1);
    write_vec(out, m.b1);
    binio::write_mat(out, m.w2);
    write_vec(out, m.b2);
}

Mlp read_mlp(std::istream& in) {
    Mlp m;
    m.w1 = binio::read_mat(in);
    m.b1 = read_vec(in);
    m.w2 = binio::read_mat(in);
    m.b2 = read_vec(in);
    return m;
}

// ---- MLP forward/backward with cached pre-activations ----

struct MlpCache {
    Vec pre1;  // w1 x + b1
    Vec h1;    // relu(pre1)
    Vec out;   // w2 h1 + b2
};

MlpCache mlp_forward(const Mlp& m, std::span<const double> x) {
    MlpCache c;
    const int hidden = m.w1.rows, outd = m.w2.rows;
    c.pre1.assign(hidden, 0.0);
    c.h1.assign(hidden, 0.0);
    for (int i = 0; i < hidden; ++i) {
        c.pre1[i] = m.b1[i] + dot(m.w1.row_span(i), x);
        c.h1[i] = c.pre1[i] > 0 ? c.pre1[i] : 0.0;
    }
    c.out.assign(outd, 0.0);
    for (int i = 0; i < outd; ++i) c.out[i] = m.b2[i] + dot(m.w2.row_span(i), c.h1);
    return c;
}

// Accumulates parameter gradients; optionally propagates into dx.
void mlp_backward(const Mlp& m, const MlpCache& c, std::span<const double> x,
                  std::span<const double> dout, Mlp& g, Vec* dx) {
    const int hidden = m.w1.rows, outd = m.w2.rows;
    Vec dh1(hidden, 0.0);
    for (int i = 0; i < outd; ++i) {
        g.b2[i] += dout[i];
        axpy(dout[i], c.h1, g.w2.row_span(i));
        axpy(dout[i], m.w2.row_span(i), dh1);
    }
    for (int i = 0; i < hidden; ++i) {
        double d = c.pre1[i] > 0 ? dh1[i] : 0.0;
        if (d == 0.0) continue;
        g.b1[i] += d;
        axpy(d, x, g.w1.row_span(i));
        if (dx) axpy(d, m.w1.row_span(i), *dx);
    }
}

Mlp zero_like(const Mlp& m) {
    Mlp z;
    z.w1 = Mat(m.w1.rows, m.w1.cols);
    z.b1.assign(m.b1.size(), 0.0);
    z.w2 = Mat(m.w2.rows, m.w2.cols);
    z.b2.assign(m.b2.size(), 0.0);
    return z;
}

// ---- fusion forward/backward ----

struct FuseCache {
    std::vector<MlpCache> hop;
    Vec alpha;
    Vec concat;
    MlpCache out;
};

Vec fuse_cached(const HoaFeatures& f, const FusionHead& head, EntityId e, FuseCache& cache) {
    const int d = head.dim;
    cache.hop.resize(head.hops);
    cache.alpha = softmax(head.theta);
    cache.concat.assign(static_cast<std::size_t>(head.hops) * d, 0.0);
    for (int k = 0; k < head.hops; ++k) {
        auto x = f.level(k + 1).row_span(static_cast<int>(e));
        cache.hop[k] = mlp_forward(head.hop_mlps[k], x);
        for (int j = 0; j < d; ++j)
            cache.concat[static_cast<std::size_t>(k) * d + j] =
                cache.alpha[k] * cache.hop[k].out[j];
    }
    cache.out = mlp_forward(head.output, cache.concat);
    return cache.out.out;
}

void fuse_backward(const HoaFeatures& f, const FusionHead& head, EntityId e,
                   const FuseCache& cache, std::span<const double> df,
                   FusionHeadGradients& g) {
    const int d = head.dim;
    Vec dconcat(cache.concat.size(), 0.0);
    mlp_backward(head.output, cache.out, cache.concat, df, g.output, &dconcat);

    Vec dalpha(head.hops, 0.0);
    for (int k = 0; k < head.hops; ++k) {
        std::span<const double> dc{dconcat.data() + static_cast<std::size_t>(k) * d,
                                   static_cast<std::size_t>(d)};
        dalpha[k] = dot(dc, cache.hop[k].out);
        Vec dm(d, 0.0);
        for (int j = 0; j < d; ++j) dm[j] = cache.alpha[k] * dc[j];
        auto x = f.level(k + 1).row_span(static_cast<int>(e));
        mlp_backward(head.hop_mlps[k], cache.hop[k], x, dm, g.hop_mlps[k], nullptr);
    }
    // Softmax Jacobian: dtheta_j = alpha_j (dalpha_j - sum_i alpha_i dalpha_i).
    double mix = 0.0;
    for (int k = 0; k < head.hops; ++k) mix += cache.alpha[k] * dalpha[k];
    for (int k = 0; k < head.hops; ++k) g.theta[k] += cache.alpha[k] * (dalpha[k] - mix);
}

// ---- flat parameter visitation (optimizer + serialization order) ----

template <typename F>
void visit_mlp(Mlp& m, Mlp& g, F&& fn) {
    for (std::size_t i = 0; i < m.w1.a.size(); ++i) fn(m.w1.a[i], g.w1.a[i]);
    for (std::size_t i = 0; i < m.b1.size(); ++i) fn(m.b1[i], g.b1[i]);
    for (std::size_t i = 0; i < m.w2.a.size(); ++i) fn(m.w2.a[i], g.w2.a[i]);
    for (std::size_t i = 0; i < m.b2.size(); ++i) fn(m.b2[i], g.b2[i]);
}

template <typename F>
void visit_params(FusionHead& head, FusionHeadGradients& g, F&& fn) {
    for (int k = 0; k < head.hops; ++k) visit_mlp(head.hop_mlps[k], g.hop_mlps[k], fn);
    for (std::size_t i = 0; i < head.theta.size(); ++i) fn(head.theta[i], g.theta[i]);
    visit_mlp(head.output, g.output, fn);
    visit_mlp(head.adapter, g.adapter, fn);
    for (std::size_t i = 0; i < head.classifier_w.size(); ++i)
        fn(head.classifier_w[i], g.classifier_w[i]);
    fn(head.classifier_b, g.classifier_b);
}

FusionHeadGradients zero_gradients(const FusionHead& head) {
    FusionHeadGradients g;
    g.hop_mlps.reserve(head.hop_mlps.size());
    for (const Mlp& m : head.hop_mlps) g.hop_mlps.push_back(zero_like(m));
    g.theta.assign(head.theta.size(), 0.0);
    g.output = zero_like(head.output);
    g.adapter = zero_like(head.adapter);
    g.classifier_w.assign(head.classifier_w.size(), 0.0);
    g.classifier_b = 0.0;
    return g;
}

Mlp random_mlp(int in, int hidden, int out, Rng& rng) {
    Mlp m;
    m.w1 = Mat(hidden, in);
    m.b1.assign(hidden, 0.0);
    m.w2 = Mat(out, hidden);
    m.b2.assign(out, 0.0);
    double s1 = std::sqrt(2.0 / in);
    double s2 = std::sqrt(2.0 / hidden);
    for (double& v : m.w1.a) v = rng.normal(0.0, s1);
    for (double& v : m.w2.a) v = rng.normal(0.0, s2);
    return m;
}

}  // namespace

void SparseMatrix::multiply(const Mat& x, Mat& out) const {
    if (x.rows != n) throw Error("sparse multiply: dimension mismatch");
    if (out.rows != n || out.cols != x.cols) out = Mat(n, x.cols);
    out.fill(0.0);
    for (int i = 0; i < n; ++i) {
        auto dst = out.row_span(i);
        for (int idx = row_ptr[i]; idx < row_ptr[i + 1]; ++idx)
            axpy(val[idx], x.row_span(col[idx]), dst);
    }
}

Vec SparseMatrix::multiply(const Vec& x) const {
    if (static_cast<int>(x.size()) != n) throw Error("sparse multiply: dimension mismatch");
    Vec out(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int idx = row_ptr[i]; idx < row_ptr[i + 1]; ++idx)
            out[i] += val[idx] * x[col[idx]];
    return out;
}

SparseMatrix normalize_adjacency(const KnowledgeGraph& kg) {
    if (kg.train().empty()) throw Error("normalize_adjacency: empty train split");
    const int n = static_cast<int>(kg.entity_count());
    SparseMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);

    std::vector<double> inv_sqrt_deg(n);
    for (int i = 0; i < n; ++i) {
        auto nbrs = kg.neighbors(static_cast<EntityId>(i));
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(nbrs.size()) + 1.0);
    }
    for (int i = 0; i < n; ++i) {
        auto nbrs = kg.neighbors(static_cast<EntityId>(i));
        bool self_emitted = false;
        auto emit = [&](int j) {
            m.col.push_back(j);
            m.val.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
        };
        for (EntityId nbr : nbrs) {
            if (!self_emitted && static_cast<int>(nbr) > i) {
                emit(i);
                self_emitted = true;
            }
            emit(static_cast<int>(nbr));
        }
        if (!self_emitted) emit(i);
        m.row_ptr[i + 1] = static_cast<int>(m.col.size());
    }
    return m;
}

const Mat& HoaFeatures::level(int k) const {
    if (k < 1 || k > hops) throw Error("HoaFeatures::level: k out of range");
    return powers[static_cast<std::size_t>(k) - 1];
}

HoaFeatures propagate(const SparseMatrix& adj, const Mat& z, const Mat& relations, int hops) {
    if (hops < 1) throw Error("propagate: hops must be >= 1");
    if (z.rows != adj.n) throw Error("propagate: Z row count does not match adjacency");
    HoaFeatures f;
    f.hops = hops;
    f.base = z;
    f.relations = relations;
    f.powers.reserve(hops);
    const Mat* prev = &f.base;
    for (int k = 1; k <= hops; ++k) {
        Mat next(adj.n, z.cols);
        adj.multiply(*prev, next);
        f.powers.push_back(std::move(next));
        prev = &f.powers.back();
    }
    return f;
}

HoaFeatures build_hoa_features(const KnowledgeGraph& kg, const KgeModel& transe, int hops) {
    if (transe.arch != Architecture::TransE)
        throw Error("build_hoa_features: model is not a TransE model");
    if (transe.entities.rows != static_cast<int>(kg.entity_count()))
        throw Error("build_hoa_features: model entity count does not match the KG");
    SparseMatrix adj = normalize_adjacency(kg);
    HoaFeatures f = propagate(adj, transe.entities, transe.relations, hops);
    f.kg_hash = kg.structural_hash();
    return f;
}

HoaFeatures build_hoa_features(const KnowledgeGraph& kg, const std::filesystem::path& transe_ckpt,
                               int hops) {
    KgeModel model = load_checkpoint(transe_ckpt);
    std::ifstream in(transe_ckpt, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    HoaFeatures f = build_hoa_features(kg, model, hops);
    f.checkpoint_hash = fnv1a64(bytes);
    return f;
}

void save_hoa_features(const HoaFeatures& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write features: " + path.string());
    binio::write_u32(out, kFeaturesMagic);
    binio::write_u32(out, kVersion);
    binio::write_u64(out, f.kg_hash);
    binio::write_u64(out, f.checkpoint_hash);
    binio::write_u32(out, static_cast<std::uint32_t>(f.hops));
    binio::write_mat(out, f.base);
    binio::write_mat(out, f.relations);
    for (const Mat& m : f.powers) binio::write_mat(out, m);
    if (!out) throw Error("write failed: " + path.string());
}

HoaFeatures load_hoa_features(const std::filesystem::path& path, std::uint64_t kg_hash,
                              std::uint64_t checkpoint_hash, int hops) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open features: " + path.string());
    if (binio::read_u32(in) != kFeaturesMagic) throw Error("not a HoA features file");
    if (binio::read_u32(in) != kVersion) throw Error("unsupported features version");
    HoaFeatures f;
    f.kg_hash = binio::read_u64(in);
    f.checkpoint_hash = binio::read_u64(in);
    f.hops = static_cast<int>(binio::read_u32(in));
    if (f.kg_hash != kg_hash) throw Error("features cache: KG hash mismatch");
    if (f.checkpoint_hash != checkpoint_hash) throw Error("features cache: checkpoint hash mismatch");
    if (f.hops != hops) throw Error("features cache: hop count mismatch");
    f.base = binio::read_mat(in);
    f.relations = binio::read_mat(in);
    for (int k = 0; k < f.hops; ++k) f.powers.push_back(binio::read_mat(in));
    return f;
}

Vec Mlp::forward(std::span<const double> x) const { return mlp_forward(*this, x).out; }

Vec softmax(std::span<const double> logits) {
    if (logits.empty()) throw Error("softmax: empty input");
    double mx = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

FusionHead init_fusion_head(int dim, int hops, std::uint64_t seed) {
    if (dim <= 0 || hops <= 0) throw Error("init_fusion_head: bad dimensions");
    FusionHead head;
    head.dim = dim;
    head.hops = hops;
    head.seed = seed;
    Rng rng(splitmix64(seed ^ 0x686f61));
    for (int k = 0; k < hops; ++k) head.hop_mlps.push_back(random_mlp(dim, dim, dim, rng));
    head.theta.assign(hops, 0.0);
    head.output = random_mlp(hops * dim, dim, dim, rng);
    head.adapter = random_mlp(3 * dim, dim, dim, rng);
    head.classifier_w.assign(dim, 0.0);
    double s = std::sqrt(1.0 / dim);
    for (double& v : head.classifier_w) v = rng.normal(0.0, s);
    head.classifier_b = 0.0;
    return head;
}

Vec fuse(const HoaFeatures& features, const FusionHead& head, EntityId e) {
    if (static_cast<int>(e) >= features.base.rows) throw Error("fuse: entity id out of range");
    FuseCache cache;
    return fuse_cached(features, head, e, cache);
}

Vec adapter_features(const HoaFeatures& features, const FusionHead& head, const Triple& t) {
    if (t.r >= static_cast<RelationId>(features.relations.rows))
        throw Error("adapter_features: relation id out of range");
    Vec fs = fuse(features, head, t.s);
    Vec fo = fuse(features, head, t.o);
    Vec u;
    u.reserve(3 * static_cast<std::size_t>(head.dim));
    u.insert(u.end(), fs.begin(), fs.end());
    auto zr = features.relations.row_span(static_cast<int>(t.r));
    u.insert(u.end(), zr.begin(), zr.end());
    u.insert(u.end(), fo.begin(), fo.end());
    return head.adapter.forward(u);
}

double classify(const HoaFeatures& features, const FusionHead& head, const Triple& t) {
    Vec k = adapter_features(features, head, t);
    return sigmoid(dot(k, head.classifier_w) + head.classifier_b);
}

double hoa_classifier_loss(const HoaFeatures& features, const FusionHead& head,
                           std::span<const LabeledTriple> batch, FusionHeadGradients* grads) {
    if (batch.empty()) throw Error("hoa_classifier_loss: empty batch");
    const int d = head.dim;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (const LabeledTriple& sample : batch) {
        const Triple& t = sample.triple;
        FuseCache cs, co;
        Vec fs = fuse_cached(features, head, t.s, cs);
        Vec fo = fuse_cached(features, head, t.o, co);
        Vec u;
        u.reserve(3 * static_cast<std::size_t>(d));
        u.insert(u.end(), fs.begin(), fs.end());
        auto zr = features.relations.row_span(static_cast<int>(t.r));
        u.insert(u.end(), zr.begin(), zr.end());
        u.insert(u.end(), fo.begin(), fo.end());
        MlpCache ca = mlp_forward(head.adapter, u);
        double logit = dot(ca.out, head.classifier_w) + head.classifier_b;
        loss += softplus(logit) - sample.label * logit;
        if (!grads) continue;

        double dlogit = (sigmoid(logit) - sample.label) * inv_n;
        axpy(dlogit, ca.out, grads->classifier_w);
        grads->classifier_b += dlogit;
        Vec dk(d, 0.0);
        axpy(dlogit, head.classifier_w, dk);

        Vec du(3 * static_cast<std::size_t>(d), 0.0);
        mlp_backward(head.adapter, ca, u, dk, grads->adapter, &du);
        std::span<const double> dfs{du.data(), static_cast<std::size_t>(d)};
        std::span<const double> dfo{du.data() + 2 * static_cast<std::size_t>(d),
                                    static_cast<std::size_t>(d)};
        fuse_backward(features, head, t.s, cs, dfs, *grads);
        fuse_backward(features, head, t.o, co, dfo, *grads);
    }
    return loss * inv_n;
}

FusionHead train_hoa_classifier(const KnowledgeGraph& kg, const HoaFeatures& features,
                                const HoaTrainConfig& config) {
    if (features.hops != config.hops)
        throw Error("train_hoa_classifier: features hop count does not match config");
    FusionHead head = init_fusion_head(features.dim(), config.hops, config.seed);
    Rng rng(splitmix64(config.seed ^ 0x636c7366));

    const auto n_entities = kg.entity_count();
    auto corrupt_filtered = [&](const Triple& t) -> std::optional<Triple> {
        bool corrupt_object = rng.coin();
        for (int tries = 0; tries < 100; ++tries) {
            Triple neg = t;
            auto e = static_cast<EntityId>(rng.index(n_entities));
            (corrupt_object ? neg.o : neg.s) = e;
            if (neg != t && !kg.known(neg)) return neg;
        }
        // Deterministic sweep as a last resort on dense tiny graphs.
        for (EntityId e = 0; e < n_entities; ++e) {
            Triple neg = t;
            (corrupt_object ? neg.o : neg.s) = e;
            if (neg != t && !kg.known(neg)) return neg;
        }
        return std::nullopt;
    };

    // Flat Adam over every head parameter.
    std::size_t n_params = 0;
    {
        FusionHeadGradients g = zero_gradients(head);
        visit_params(head, g, [&](double&, double&) { ++n_params; });
    }
    Vec adam_m(n_params, 0.0), adam_v(n_params, 0.0);
    long step = 0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    std::vector<LabeledTriple> samples;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        samples.clear();
        for (const Triple& t : kg.train()) {
            samples.push_back({t, 1.0});
            if (auto neg = corrupt_filtered(t)) samples.push_back({*neg, 0.0});
        }
        std::shuffle(samples.begin(), samples.end(), rng.eng);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < samples.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::size_t len =
                std::min<std::size_t>(config.batch_size, samples.size() - start);
            FusionHeadGradients grads = zero_gradients(head);
            double loss = hoa_classifier_loss(features, head,
                                              {samples.data() + start, len}, &grads);
            epoch_loss += loss;
            ++batches;
            ++step;
            double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            std::size_t i = 0;
            visit_params(head, grads, [&](double& p, double& g) {
                adam_m[i] = b1 * adam_m[i] + (1 - b1) * g;
                adam_v[i] = b2 * adam_v[i] + (1 - b2) * g * g;
                p -= config.lr * (adam_m[i] / c1) / (std::sqrt(adam_v[i] / c2) + eps);
                ++i;
            });
        }
        if (batches && !std::isfinite(epoch_loss))
            throw Error("hoa classifier diverged at epoch " + std::to_string(epoch));
    }
    return head;
}

CandidateSet<Triple> hoa_filter(const TripleGraph& tg, const FusionHead& head,
                                const HoaFeatures& features, const Triple& tgt, int k) {
    if (k < 1) throw Error("hoa_filter: k must be >= 1");
    auto neighborhood = tg.neighbors(tgt);
    if (neighborhood.empty()) throw Error("hoa_filter: empty neighborhood");

    Vec target_features = adapter_features(features, head, tgt);
    struct Scored {
        std::uint32_t node;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(neighborhood.size());
    for (std::uint32_t node : neighborhood) {
        Vec kf = adapter_features(features, head, tg.node(node));
        scored.push_back({node, cosine(target_features, kf)});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.node < b.node;
    });

    CandidateSet<Triple> out;
    out.target = tgt;
    out.bound = k;
    for (const Scored& s : scored) {
        if (static_cast<int>(out.items.size()) >= k) break;
        out.items.push_back({tg.node(s.node), s.score, "hoa"});
    }
    return out;
}

void save_fusion_head(const FusionHead& head, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write head: " + path.string());
    binio::write_u32(out, kHeadMagic);
    binio::write_u32(out, kVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(head.dim));
    binio::write_u32(out, static_cast<std::uint32_t>(head.hops));
    binio::write_u64(out, head.seed);
    for (const Mlp& m : head.hop_mlps) write_mlp(out, m);
    write_vec(out, head.theta);
    write_mlp(out, head.output);
    write_mlp(out, head.adapter);
    write_vec(out, head.classifier_w);
    binio::write_f64(out, {&head.classifier_b, 1});
    if (!out) throw Error("write failed: " + path.string());
}

FusionHead load_fusion_head(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open head: " + path.string());
    if (binio::read_u32(in) != kHeadMagic) throw Error("not a fusion head file");
    if (binio::read_u32(in) != kVersion) throw Error("unsupported head version");
    FusionHead head;
    head.dim = static_cast<int>(binio::read_u32(in));
    head.hops = static_cast<int>(binio::read_u32(in));
    head.seed = binio::read_u64(in);
    for (int k = 0; k < head.hops; ++k) head.hop_mlps.push_back(read_mlp(in));
    head.theta = read_vec(in);
    head.output = read_mlp(in);
    head.adapter = read_mlp(in);
    head.classifier_w = read_vec(in);
    binio::read_f64(in, {&head.classifier_b, 1});
    return head;
}

}  // namespace kgattack
