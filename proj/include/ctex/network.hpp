#pragma once

#include <string>
#include <vector>

#include "ctex/ops.hpp"
#include "ctex/rng.hpp"

namespace ctex {

// Named, persistent parameter storage. Parameters live here between batches;
// each training step copies them onto a fresh tape as gradient-enabled
// leaves and writes updates back through the optimizer.
template <typename S>
struct ParamStore {
    struct Entry {
        std::string name;
        Shape shape;
        ArrX<S> value;
    };
    std::vector<Entry> entries;

    int add(std::string name, Shape shape, ArrX<S> value) {
        if (value.size() != numel(shape)) {
            throw ShapeError("ParamStore: value for '" + name + "' does not match " +
                             shape_str(shape));
        }
        entries.push_back({std::move(name), std::move(shape), std::move(value)});
        return static_cast<int>(entries.size()) - 1;
    }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }

    Entry& operator[](int id) { return entries[static_cast<std::size_t>(id)]; }
    const Entry& operator[](int id) const { return entries[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(entries.size()); }
};

// One gradient-enabled leaf per store entry, in store order.
template <typename S>
std::vector<Var<S>> make_leaves(Tape<S>& tape, const ParamStore<S>& store,
                                bool requires_grad = true) {
    std::vector<Var<S>> leaves;
    leaves.reserve(static_cast<std::size_t>(store.size()));
    for (const auto& e : store.entries) {
        leaves.push_back(tape.leaf(e.value, e.shape, requires_grad));
    }
    return leaves;
}

template <typename S>
ArrX<S> he_normal(Rng& rng, long n, long fan_in) {
    ArrX<S> v(n);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (long i = 0; i < n; ++i) v[i] = static_cast<S>(rng.normal() * std_dev);
    return v;
}

template <typename S>
ArrX<S> xavier_normal(Rng& rng, long n, long fan_in) {
    ArrX<S> v(n);
    const double std_dev = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (long i = 0; i < n; ++i) v[i] = static_cast<S>(rng.normal() * std_dev);
    return v;
}

// ---- encoder ----------------------------------------------------------------

struct ConvStage {
    int out_channels = 8;
    int kernel = 3;
    int stride = 2;
    int pad = 1;
};

struct EncoderConfig {
    int in_channels = 1;
    std::vector<ConvStage> stages;

    int feature_dim() const { return stages.empty() ? 0 : stages.back().out_channels; }
};

// Stack of conv / bias / relu stages followed by global average pooling; the
// pooled vector is the per-image feature.
template <typename S>
struct Encoder {
    EncoderConfig cfg;
    std::vector<int> weight_ids;
    std::vector<int> bias_ids;

    static Encoder build(ParamStore<S>& store, const EncoderConfig& cfg, Rng& rng,
                         const std::string& prefix) {
        Encoder enc;
        enc.cfg = cfg;
        int ci = cfg.in_channels;
        for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
            const ConvStage& st = cfg.stages[s];
            const long wn = static_cast<long>(st.out_channels) * ci * st.kernel * st.kernel;
            const long fan_in = static_cast<long>(ci) * st.kernel * st.kernel;
            enc.weight_ids.push_back(store.add(
                prefix + ".stage" + std::to_string(s) + ".weight",
                Shape{st.out_channels, ci, st.kernel, st.kernel}, he_normal<S>(rng, wn, fan_in)));
            enc.bias_ids.push_back(store.add(prefix + ".stage" + std::to_string(s) + ".bias",
                                             Shape{st.out_channels},
                                             ArrX<S>::Zero(st.out_channels)));
            ci = st.out_channels;
        }
        return enc;
    }

    // batch: N x C x H x W -> N x feature_dim()
    Var<S> forward(Tape<S>& tape, Var<S> batch, const std::vector<Var<S>>& leaves) const {
        Var<S> h = batch;
        for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
            const ConvStage& st = cfg.stages[s];
            h = conv2d(h, leaves[static_cast<std::size_t>(weight_ids[s])], st.stride, st.pad);
            h = add_channel_bias(h, leaves[static_cast<std::size_t>(bias_ids[s])]);
            h = relu(h);
        }
        (void)tape;
        return mean_pool_spatial(h);
    }
};

template <typename S>
Var<S> encoder_forward(Tape<S>& tape, Var<S> batch, const Encoder<S>& enc,
                       const std::vector<Var<S>>& leaves) {
    return enc.forward(tape, batch, leaves);
}

// ---- projector ----------------------------------------------------------------

struct ProjectorConfig {
    int in_dim = 16;
    int hidden_dim = 16;
    int out_dim = 32;
};

// Two affine layers with a ReLU between; no output normalization (the
// contrastive loss normalizes internally).
template <typename S>
struct Projector {
    ProjectorConfig cfg;
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

    static Projector build(ParamStore<S>& store, const ProjectorConfig& cfg, Rng& rng,
                           const std::string& prefix) {
        Projector p;
        p.cfg = cfg;
        p.w1 = store.add(prefix + ".fc1.weight", Shape{cfg.hidden_dim, cfg.in_dim},
                         he_normal<S>(rng, static_cast<long>(cfg.hidden_dim) * cfg.in_dim,
                                      cfg.in_dim));
        p.b1 = store.add(prefix + ".fc1.bias", Shape{cfg.hidden_dim},
                         ArrX<S>::Zero(cfg.hidden_dim));
        p.w2 = store.add(prefix + ".fc2.weight", Shape{cfg.out_dim, cfg.hidden_dim},
                         xavier_normal<S>(rng, static_cast<long>(cfg.out_dim) * cfg.hidden_dim,
                                          cfg.hidden_dim));
        p.b2 = store.add(prefix + ".fc2.bias", Shape{cfg.out_dim}, ArrX<S>::Zero(cfg.out_dim));
        return p;
    }

    // feat: N x in_dim -> N x out_dim
    Var<S> forward(Tape<S>& tape, Var<S> feat, const std::vector<Var<S>>& leaves) const {
        (void)tape;
        Var<S> h = add_row_vector(matmul(feat, leaves[static_cast<std::size_t>(w1)], false, true),
                                  leaves[static_cast<std::size_t>(b1)]);
        h = relu(h);
        return add_row_vector(matmul(h, leaves[static_cast<std::size_t>(w2)], false, true),
                              leaves[static_cast<std::size_t>(b2)]);
    }
};

template <typename S>
Var<S> projector_forward(Tape<S>& tape, Var<S> feat, const Projector<S>& proj,
                         const std::vector<Var<S>>& leaves) {
    return proj.forward(tape, feat, leaves);
}

// ---- squeeze-and-excitation fusion ------------------------------------------

struct SEConfig {
    int d_sup = 64;
    int d_chaos = 16;
    int ratio = 4;

    int fused_dim() const { return d_sup + d_chaos; }
    int bottleneck() const { return std::max(1, fused_dim() / ratio); }
};

// Channel attention over the concatenated feature vector: gates
// s = sigmoid(W2 relu(W1 U)) reweight U by Hadamard product. No bias terms.
template <typename S>
struct SEFusion {
    SEConfig cfg;
    int w1 = -1, w2 = -1;

    static SEFusion build(ParamStore<S>& store, const SEConfig& cfg, Rng& rng,
                          const std::string& prefix) {
        if (cfg.bottleneck() < 1) throw std::invalid_argument("SEFusion: bottleneck < 1");
        SEFusion se;
        se.cfg = cfg;
        const long d = cfg.fused_dim(), h = cfg.bottleneck();
        se.w1 = store.add(prefix + ".w1", Shape{h, d}, he_normal<S>(rng, h * d, d));
        se.w2 = store.add(prefix + ".w2", Shape{d, h}, xavier_normal<S>(rng, d * h, h));
        return se;
    }

    // u_sup: N x d_sup, u_chaos: N x d_chaos -> N x (d_sup + d_chaos)
    Var<S> forward(Tape<S>& tape, Var<S> u_sup, Var<S> u_chaos,
                   const std::vector<Var<S>>& leaves) const {
        (void)tape;
        if (u_sup.shape()[1] != cfg.d_sup || u_chaos.shape()[1] != cfg.d_chaos) {
            shape_fail("se_fuse", u_sup.shape(), u_chaos.shape());
        }
        Var<S> u = concat_cols(u_sup, u_chaos);
        Var<S> hidden = relu(matmul(u, leaves[static_cast<std::size_t>(w1)], false, true));
        Var<S> s = sigmoid(matmul(hidden, leaves[static_cast<std::size_t>(w2)], false, true));
        return mul(s, u);
    }
};

template <typename S>
Var<S> se_fuse(Tape<S>& tape, Var<S> u_sup, Var<S> u_chaos, const SEFusion<S>& se,
               const std::vector<Var<S>>& leaves) {
    return se.forward(tape, u_sup, u_chaos, leaves);
}

// ---- classifier --------------------------------------------------------------

// Single affine layer, zero-initialized so an untrained head scores exactly
// at chance.
template <typename S>
struct Classifier {
    int in_dim = 0;
    int n_classes = 0;
    int w = -1, b = -1;

    static Classifier build(ParamStore<S>& store, int in_dim, int n_classes,
                            const std::string& prefix) {
        Classifier c;
        c.in_dim = in_dim;
        c.n_classes = n_classes;
        c.w = store.add(prefix + ".weight", Shape{n_classes, in_dim},
                        ArrX<S>::Zero(static_cast<long>(n_classes) * in_dim));
        c.b = store.add(prefix + ".bias", Shape{n_classes}, ArrX<S>::Zero(n_classes));
        return c;
    }

    // fused: N x in_dim -> logits N x n_classes
    Var<S> forward(Tape<S>& tape, Var<S> fused, const std::vector<Var<S>>& leaves) const {
        (void)tape;
        return add_row_vector(matmul(fused, leaves[static_cast<std::size_t>(w)], false, true),
                              leaves[static_cast<std::size_t>(b)]);
    }
};

template <typename S>
Var<S> classifier_forward(Tape<S>& tape, Var<S> fused, const Classifier<S>& cls,
                          const std::vector<Var<S>>& leaves) {
    return cls.forward(tape, fused, leaves);
}

}  // namespace ctex
