#include "ctex/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctex/loss.hpp"
#include "ctex/optim.hpp"
#include "ctex/rng.hpp"

namespace ctex {

namespace {

// Fisher-Yates with our Rng, independent of std::shuffle internals.
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.below(i)]);
    }
}

int dataset_channels(const LabeledDataset& ds) {
    if (ds.items.empty()) throw std::invalid_argument("dataset is empty");
    return ds.items.front().first.channels;
}

void check_uniform_geometry(const LabeledDataset& ds) {
    const Image& first = ds.items.front().first;
    for (const auto& [img, label] : ds.items) {
        if (!img.same_shape(first)) {
            throw std::invalid_argument("dataset images must share one geometry");
        }
    }
}

// Copies encoder parameters from one store into another under a new name
// prefix, returning an Encoder wired to the destination ids.
Encoder<float> copy_encoder(ParamStore<float>& dst, const ParamStore<float>& src,
                            const Encoder<float>& enc, const std::string& prefix) {
    Encoder<float> out;
    out.cfg = enc.cfg;
    for (std::size_t s = 0; s < enc.cfg.stages.size(); ++s) {
        const auto& w = src[enc.weight_ids[s]];
        const auto& b = src[enc.bias_ids[s]];
        out.weight_ids.push_back(
            dst.add(prefix + ".stage" + std::to_string(s) + ".weight", w.shape, w.value));
        out.bias_ids.push_back(
            dst.add(prefix + ".stage" + std::to_string(s) + ".bias", b.shape, b.value));
    }
    return out;
}

Encoder<float> encoder_from_store(const ParamStore<float>& store, const EncoderConfig& cfg,
                                  const std::string& prefix) {
    Encoder<float> enc;
    enc.cfg = cfg;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const int w = store.find(prefix + ".stage" + std::to_string(s) + ".weight");
        const int b = store.find(prefix + ".stage" + std::to_string(s) + ".bias");
        if (w < 0 || b < 0) {
            throw std::runtime_error("encoder parameters missing for stage " + std::to_string(s));
        }
        enc.weight_ids.push_back(w);
        enc.bias_ids.push_back(b);
    }
    return enc;
}

std::vector<ArrX<float>> collect_grads(Tape<float>& tape, const std::vector<Var<float>>& leaves,
                                       int n_params) {
    std::vector<ArrX<float>> grads(static_cast<std::size_t>(n_params));
    for (int i = 0; i < n_params; ++i) {
        grads[static_cast<std::size_t>(i)] = tape.grad(leaves[static_cast<std::size_t>(i)]);
    }
    return grads;
}

std::vector<int> all_param_ids(const ParamStore<float>& store, const std::string& prefix) {
    std::vector<int> ids;
    for (int i = 0; i < store.size(); ++i) {
        if (store[i].name.rfind(prefix, 0) == 0) ids.push_back(i);
    }
    return ids;
}

[[noreturn]] void nan_abort(const std::string& where, int epoch, int batch,
                            const ArrX<float>& values) {
    throw std::runtime_error(where + ": non-finite loss or activations at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch) +
                             " (batch stats: min " + std::to_string(values.minCoeff()) +
                             ", max " + std::to_string(values.maxCoeff()) + ")");
}

}  // namespace

EncoderConfig default_chaos_encoder(int in_channels) {
    EncoderConfig cfg;
    cfg.in_channels = in_channels;
    cfg.stages = {{8, 3, 2, 1}, {16, 3, 2, 1}};
    return cfg;
}

EncoderConfig default_sup_encoder(int in_channels) {
    EncoderConfig cfg;
    cfg.in_channels = in_channels;
    cfg.stages = {{16, 3, 2, 1}, {32, 3, 2, 1}, {64, 3, 2, 1}};
    return cfg;
}

void PretrainConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("PretrainConfig: tau must be > 0");
    if (batch < 2) throw std::invalid_argument("PretrainConfig: batch must be >= 2");
    if (epochs < 0) throw std::invalid_argument("PretrainConfig: epochs must be >= 0");
    if (views_per_epoch < 1) {
        throw std::invalid_argument("PretrainConfig: views_per_epoch must be >= 1");
    }
    augment.validate();
}

Var<float> image_batch_leaf(Tape<float>& tape, const std::vector<const Image*>& images) {
    if (images.empty()) throw std::invalid_argument("image_batch_leaf: empty batch");
    const long N = static_cast<long>(images.size());
    const long C = images[0]->channels, H = images[0]->height, W = images[0]->width;
    ArrX<float> data(N * C * H * W);
    for (long n = 0; n < N; ++n) {
        const Image& img = *images[static_cast<std::size_t>(n)];
        if (img.channels != C || img.height != H || img.width != W) {
            throw std::invalid_argument("image_batch_leaf: mixed image geometry in batch");
        }
        // HWC -> CHW, double -> float
        for (long c = 0; c < C; ++c) {
            for (long y = 0; y < H; ++y) {
                for (long x = 0; x < W; ++x) {
                    data[((n * C + c) * H + y) * W + x] =
                        static_cast<float>(img.at(static_cast<int>(y), static_cast<int>(x),
                                                  static_cast<int>(c)));
                }
            }
        }
    }
    return tape.leaf(std::move(data), Shape{N, C, H, W}, false);
}

PretrainResult pretrain(const LabeledDataset& ds, const PretrainConfig& cfg) {
    cfg.validate();
    if (ds.items.empty()) throw std::invalid_argument("pretrain: dataset is empty");
    check_uniform_geometry(ds);
    const Image& probe_img = ds.items.front().first;
    const int crop = cfg.augment.crop_size == 0
                         ? std::min(probe_img.height, probe_img.width)
                         : cfg.augment.crop_size;
    if (crop > std::min(probe_img.height, probe_img.width)) {
        throw std::invalid_argument("pretrain: crop size exceeds image size");
    }

    EncoderConfig enc_cfg = cfg.encoder;
    enc_cfg.in_channels = dataset_channels(ds);

    ParamStore<float> store;
    Rng init_rng(derive_seed(cfg.seed, "pretrain/init"));
    Encoder<float> encoder = Encoder<float>::build(store, enc_cfg, init_rng, "encoder");
    ProjectorConfig proj_cfg{enc_cfg.feature_dim(), enc_cfg.feature_dim(), cfg.projector_out};
    Projector<float> projector = Projector<float>::build(store, proj_cfg, init_rng, "projector");

    AdamW<float> opt(store, cfg.lr_encoder);
    opt.weight_decay = cfg.weight_decay;
    opt.set_lr(all_param_ids(store, "projector."), cfg.lr_projector);

    // Every epoch repeats the same views_per_epoch passes: data order (one
    // shuffle per pass) and the per-(image, pass) view draws carry no epoch
    // dependence, so a zero-learning-rate run computes an identical loss
    // every epoch.
    const long n_images = static_cast<long>(ds.items.size());
    std::vector<EpochLoss> trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        long anchor_count = 0;
        for (int pass = 0; pass < cfg.views_per_epoch; ++pass) {
            std::vector<int> order(ds.items.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            Rng shuffle_rng(derive_seed(cfg.seed, "pretrain/shuffle",
                                        static_cast<std::uint64_t>(pass)));
            shuffle_indices(order, shuffle_rng);

            int batch_index = 0;
            for (std::size_t start = 0; start < order.size();
                 start += cfg.batch, ++batch_index) {
                const std::size_t end = std::min(order.size(), start + cfg.batch);
                if (end - start < 2) continue;  // NT-Xent needs at least two sources

                std::vector<ViewPair> pairs;
                pairs.reserve(end - start);
                for (std::size_t i = start; i < end; ++i) {
                    const int idx = order[i];
                    Rng aug_rng(derive_seed(cfg.seed, "pretrain/augment",
                                            static_cast<std::uint64_t>(pass) * n_images + idx));
                    pairs.push_back(
                        make_view_pair(ds.items[static_cast<std::size_t>(idx)].first, aug_rng,
                                       cfg.augment));
                }
                std::vector<const Image*> rows;
                rows.reserve(pairs.size() * 2);
                for (const auto& p : pairs) {
                    rows.push_back(&p.view_i);
                    rows.push_back(&p.view_j);
                }

                Tape<float> tape;
                std::vector<Var<float>> leaves = make_leaves(tape, store);
                Var<float> batch = image_batch_leaf(tape, rows);
                Var<float> feat = encoder.forward(tape, batch, leaves);
                Var<float> z = projector.forward(tape, feat, leaves);
                if (!z.value().isFinite().all()) nan_abort("pretrain", epoch, batch_index, feat.value());
                Var<float> loss = nt_xent(tape, z, cfg.tau);
                const double loss_val = static_cast<double>(loss.value()[0]);
                if (!std::isfinite(loss_val)) nan_abort("pretrain", epoch, batch_index, z.value());

                tape.backward(loss);
                opt.step(store, collect_grads(tape, leaves, store.size()), 1.0);

                loss_sum += loss_val * static_cast<double>(rows.size());
                anchor_count += static_cast<long>(rows.size());
            }
        }
        if (anchor_count == 0) throw std::runtime_error("pretrain: no usable batches");
        trace.push_back({epoch, loss_sum / static_cast<double>(anchor_count)});
    }

    PretrainResult result;
    result.encoder = copy_encoder(result.store, store, encoder, "encoder");
    result.trace = std::move(trace);
    return result;
}

SupervisedResult train_supervised(const LabeledDataset& ds, const SupervisedConfig& cfg) {
    if (ds.items.empty()) throw std::invalid_argument("train_supervised: dataset is empty");
    ds.validate();
    check_uniform_geometry(ds);

    EncoderConfig enc_cfg = cfg.encoder;
    enc_cfg.in_channels = dataset_channels(ds);

    ParamStore<float> store;
    Rng init_rng(derive_seed(cfg.seed, "supervised/init"));
    Encoder<float> encoder = Encoder<float>::build(store, enc_cfg, init_rng, "encoder");
    Classifier<float> head =
        Classifier<float>::build(store, enc_cfg.feature_dim(), ds.n_classes(), "head");

    AdamW<float> opt(store, cfg.lr);
    opt.weight_decay = cfg.weight_decay;

    const long n_images = static_cast<long>(ds.items.size());
    const long batches_per_epoch = (n_images + cfg.batch - 1) / cfg.batch;
    const long total_steps = std::max<long>(1, batches_per_epoch * cfg.epochs);

    AugmentConfig flip_only;
    flip_only.k_min = flip_only.k_max = 0;
    flip_only.crop_size = 0;
    flip_only.flip_prob = cfg.flip_prob;

    std::vector<EpochLoss> trace;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(ds.items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng shuffle_rng(derive_seed(cfg.seed, "supervised/shuffle",
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_indices(order, shuffle_rng);

        double loss_sum = 0.0;
        long sample_count = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            std::vector<Image> augmented;
            std::vector<const Image*> rows;
            std::vector<int> labels;
            augmented.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const int idx = order[i];
                Rng aug_rng(derive_seed(cfg.seed, "supervised/augment",
                                        static_cast<std::uint64_t>(epoch) * n_images + idx));
                augmented.push_back(standard_augment(
                    ds.items[static_cast<std::size_t>(idx)].first, aug_rng, flip_only));
                labels.push_back(ds.items[static_cast<std::size_t>(idx)].second);
            }
            for (const auto& img : augmented) rows.push_back(&img);

            Tape<float> tape;
            std::vector<Var<float>> leaves = make_leaves(tape, store);
            Var<float> batch = image_batch_leaf(tape, rows);
            Var<float> feat = encoder.forward(tape, batch, leaves);
            Var<float> logits = head.forward(tape, feat, leaves);
            if (!logits.value().isFinite().all()) {
                nan_abort("train_supervised", epoch, static_cast<int>(start / cfg.batch),
                          feat.value());
            }
            Var<float> loss = softmax_cross_entropy(tape, logits, labels);
            const double loss_val = static_cast<double>(loss.value()[0]);
            if (!std::isfinite(loss_val)) {
                nan_abort("train_supervised", epoch, static_cast<int>(start / cfg.batch),
                          logits.value());
            }
            tape.backward(loss);
            opt.step(store, collect_grads(tape, leaves, store.size()),
                     cosine_lr(step, total_steps, 1.0));
            ++step;

            loss_sum += loss_val * static_cast<double>(end - start);
            sample_count += static_cast<long>(end - start);
        }
        trace.push_back({epoch, loss_sum / static_cast<double>(sample_count)});
    }

    SupervisedResult result;
    result.encoder = copy_encoder(result.store, store, encoder, "encoder");
    result.trace = std::move(trace);
    return result;
}

std::string FinetuneConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("FinetuneConfig: epochs must be >= 0");
    if (folds < 2) throw std::invalid_argument("FinetuneConfig: folds must be >= 2");
    if (batch < 1) throw std::invalid_argument("FinetuneConfig: batch must be >= 1");
    if (se_ratio < 1) throw std::invalid_argument("FinetuneConfig: se_ratio must be >= 1");
    if (folds < 4 || folds > 10) {
        return "warning: folds=" + std::to_string(folds) +
               " is outside the usual 4..10 range";
    }
    return "";
}

namespace {

struct EnsembleModel {
    ParamStore<float> store;
    Encoder<float> sup;
    Encoder<float> chaos;
    SEFusion<float> se;
    Classifier<float> head;
    EnsembleBranch branch = EnsembleBranch::Ensemble;

    Var<float> forward(Tape<float>& tape, Var<float> batch,
                       const std::vector<Var<float>>& leaves) const {
        switch (branch) {
            case EnsembleBranch::SupOnly: {
                Var<float> u = sup.forward(tape, batch, leaves);
                return head.forward(tape, u, leaves);
            }
            case EnsembleBranch::ChaosOnly: {
                Var<float> u = chaos.forward(tape, batch, leaves);
                return head.forward(tape, u, leaves);
            }
            case EnsembleBranch::Ensemble:
            default: {
                Var<float> u_sup = sup.forward(tape, batch, leaves);
                Var<float> u_chaos = chaos.forward(tape, batch, leaves);
                Var<float> fused = se.forward(tape, u_sup, u_chaos, leaves);
                return head.forward(tape, fused, leaves);
            }
        }
    }
};

EnsembleModel build_ensemble(const ParamStore<float>& sup_store, const Encoder<float>& sup_enc,
                             const ParamStore<float>& chaos_store,
                             const Encoder<float>& chaos_enc, const FinetuneConfig& cfg,
                             int n_classes, std::uint64_t head_seed) {
    EnsembleModel model;
    model.branch = cfg.branch;
    model.sup = copy_encoder(model.store, sup_store, sup_enc, "sup");
    model.chaos = copy_encoder(model.store, chaos_store, chaos_enc, "chaos");
    Rng rng(head_seed);
    const int d_sup = sup_enc.cfg.feature_dim();
    const int d_chaos = chaos_enc.cfg.feature_dim();
    switch (cfg.branch) {
        case EnsembleBranch::SupOnly:
            model.head = Classifier<float>::build(model.store, d_sup, n_classes, "head");
            break;
        case EnsembleBranch::ChaosOnly:
            model.head = Classifier<float>::build(model.store, d_chaos, n_classes, "head");
            break;
        case EnsembleBranch::Ensemble:
        default:
            model.se = SEFusion<float>::build(model.store, {d_sup, d_chaos, cfg.se_ratio}, rng,
                                              "se");
            model.head =
                Classifier<float>::build(model.store, d_sup + d_chaos, n_classes, "head");
            break;
    }
    return model;
}

// Trains one ensemble model in place on the given sample indices.
std::vector<EpochLoss> train_ensemble(EnsembleModel& model, const LabeledDataset& ds,
                                      const std::vector<int>& train_idx,
                                      const FinetuneConfig& cfg, std::uint64_t seed) {
    AdamW<float> opt(model.store, cfg.lr_backbone);
    opt.weight_decay = cfg.weight_decay;
    opt.set_lr(all_param_ids(model.store, "se."), cfg.lr_head);
    opt.set_lr(all_param_ids(model.store, "head."), cfg.lr_head);

    AugmentConfig flip_only;
    flip_only.k_min = flip_only.k_max = 0;
    flip_only.crop_size = 0;
    flip_only.flip_prob = cfg.flip_prob;

    const long n_train = static_cast<long>(train_idx.size());
    const long batches_per_epoch = (n_train + cfg.batch - 1) / cfg.batch;
    const long total_steps = std::max<long>(1, batches_per_epoch * cfg.epochs);

    std::vector<EpochLoss> trace;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = train_idx;
        Rng shuffle_rng(derive_seed(seed, "finetune/shuffle",
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_indices(order, shuffle_rng);

        double loss_sum = 0.0;
        long sample_count = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            std::vector<Image> augmented;
            std::vector<const Image*> rows;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                const int idx = order[i];
                Rng aug_rng(derive_seed(seed, "finetune/augment",
                                        static_cast<std::uint64_t>(epoch) * ds.items.size() +
                                            static_cast<std::uint64_t>(idx)));
                augmented.push_back(standard_augment(
                    ds.items[static_cast<std::size_t>(idx)].first, aug_rng, flip_only));
                labels.push_back(ds.items[static_cast<std::size_t>(idx)].second);
            }
            for (const auto& img : augmented) rows.push_back(&img);

            Tape<float> tape;
            std::vector<Var<float>> leaves = make_leaves(tape, model.store);
            Var<float> batch = image_batch_leaf(tape, rows);
            Var<float> logits = model.forward(tape, batch, leaves);
            if (!logits.value().isFinite().all()) {
                nan_abort("finetune", epoch, static_cast<int>(start / cfg.batch),
                          logits.value());
            }
            Var<float> loss = softmax_cross_entropy(tape, logits, labels);
            const double loss_val = static_cast<double>(loss.value()[0]);
            if (!std::isfinite(loss_val)) {
                nan_abort("finetune", epoch, static_cast<int>(start / cfg.batch),
                          logits.value());
            }
            tape.backward(loss);
            opt.step(model.store, collect_grads(tape, leaves, model.store.size()),
                     cosine_lr(step, total_steps, 1.0));
            ++step;

            loss_sum += loss_val * static_cast<double>(end - start);
            sample_count += static_cast<long>(end - start);
        }
        if (sample_count > 0) {
            trace.push_back({epoch, loss_sum / static_cast<double>(sample_count)});
        }
    }
    return trace;
}

std::vector<int> predict_ensemble(const EnsembleModel& model, const LabeledDataset& ds,
                                  const std::vector<int>& idx) {
    std::vector<const Image*> rows;
    rows.reserve(idx.size());
    for (int i : idx) rows.push_back(&ds.items[static_cast<std::size_t>(i)].first);
    Tape<float> tape;
    std::vector<Var<float>> leaves = make_leaves(tape, model.store, false);
    Var<float> batch = image_batch_leaf(tape, rows);
    Var<float> logits = model.forward(tape, batch, leaves);
    const long K = logits.shape()[1];
    std::vector<int> preds;
    preds.reserve(idx.size());
    for (long r = 0; r < logits.shape()[0]; ++r) {
        long best = 0;
        for (long k = 1; k < K; ++k) {
            if (logits.value()[r * K + k] > logits.value()[r * K + best]) best = k;
        }
        preds.push_back(static_cast<int>(best));
    }
    return preds;
}

}  // namespace

FinetuneResult finetune(const LabeledDataset& ds, const ParamStore<float>& sup_store,
                        const EncoderConfig& sup_cfg, const ParamStore<float>& chaos_store,
                        const EncoderConfig& chaos_cfg, const FinetuneConfig& cfg) {
    ds.validate();
    check_uniform_geometry(ds);
    cfg.validate();
    const int channels = dataset_channels(ds);
    if (sup_cfg.in_channels != channels || chaos_cfg.in_channels != channels) {
        throw std::runtime_error(
            "finetune: checkpoint mismatch: dataset has " + std::to_string(channels) +
            " channels, sup expects " + std::to_string(sup_cfg.in_channels) +
            ", chaos expects " + std::to_string(chaos_cfg.in_channels));
    }

    const Encoder<float> sup_enc = encoder_from_store(sup_store, sup_cfg, "encoder");
    const Encoder<float> chaos_enc = encoder_from_store(chaos_store, chaos_cfg, "encoder");

    const auto labels = ds.labels();
    const auto splits = kfold_split(labels, cfg.folds, derive_seed(cfg.seed, "finetune/folds"));

    FinetuneResult result;
    result.combined.counts.setZero(ds.n_classes(), ds.n_classes());
    for (int f = 0; f < cfg.folds; ++f) {
        EnsembleModel model =
            build_ensemble(sup_store, sup_enc, chaos_store, chaos_enc, cfg, ds.n_classes(),
                           derive_seed(cfg.seed, "finetune/heads", static_cast<std::uint64_t>(f)));
        const auto& [train_idx, val_idx] = splits[static_cast<std::size_t>(f)];
        train_ensemble(model, ds, train_idx, cfg,
                       derive_seed(cfg.seed, "finetune/fold", static_cast<std::uint64_t>(f)));

        std::vector<int> val_labels;
        for (int i : val_idx) val_labels.push_back(labels[static_cast<std::size_t>(i)]);
        const auto preds = predict_ensemble(model, ds, val_idx);
        const ConfusionMatrix cm = confusion(preds, val_labels, ds.n_classes());
        result.combined.counts += cm.counts;
        result.folds.push_back({f, accuracy(cm), macro_f1(cm)});
    }

    auto agg = [&](auto getter) {
        double mean = 0.0;
        for (const auto& fm : result.folds) mean += getter(fm);
        mean /= static_cast<double>(result.folds.size());
        double var = 0.0;
        for (const auto& fm : result.folds) {
            const double d = getter(fm) - mean;
            var += d * d;
        }
        var /= static_cast<double>(result.folds.size());  // population std
        return std::make_pair(mean, std::sqrt(var));
    };
    std::tie(result.acc_mean, result.acc_std) = agg([](const FoldMetrics& m) { return m.accuracy; });
    std::tie(result.f1_mean, result.f1_std) = agg([](const FoldMetrics& m) { return m.f1; });

    // Final deliverable model: same protocol on the full dataset.
    EnsembleModel final_model =
        build_ensemble(sup_store, sup_enc, chaos_store, chaos_enc, cfg, ds.n_classes(),
                       derive_seed(cfg.seed, "finetune/heads", 0xffffu));
    std::vector<int> all_idx(ds.items.size());
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = static_cast<int>(i);
    result.final_trace = train_ensemble(final_model, ds, all_idx, cfg,
                                        derive_seed(cfg.seed, "finetune/final"));
    result.final_store = std::move(final_model.store);
    return result;
}

void save_encoder_checkpoint(const ParamStore<float>& store, const EncoderConfig& cfg,
                             const std::filesystem::path& path) {
    Checkpoint ckpt = to_checkpoint(store, "encoder.");
    ckpt.add_text("meta.encoder_arch", encoder_config_to_json(cfg));
    ckpt.save(path);
}

LoadedEncoder load_encoder_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ckpt = Checkpoint::load(path);
    LoadedEncoder out;
    out.cfg = encoder_config_from_json(ckpt.text("meta.encoder_arch"));
    int ci = out.cfg.in_channels;
    out.encoder.cfg = out.cfg;
    for (std::size_t s = 0; s < out.cfg.stages.size(); ++s) {
        const ConvStage& st = out.cfg.stages[s];
        const std::string base = "encoder.stage" + std::to_string(s);
        const Shape w_shape{st.out_channels, ci, st.kernel, st.kernel};
        const Shape b_shape{st.out_channels};
        out.encoder.weight_ids.push_back(
            out.store.add(base + ".weight", w_shape, ckpt.param<float>(base + ".weight", w_shape)));
        out.encoder.bias_ids.push_back(
            out.store.add(base + ".bias", b_shape, ckpt.param<float>(base + ".bias", b_shape)));
        ci = st.out_channels;
    }
    return out;
}

MatX<float> extract_features(const ParamStore<float>& store, const Encoder<float>& encoder,
                             const LabeledDataset& ds) {
    if (ds.items.empty()) throw std::invalid_argument("extract_features: dataset is empty");
    std::vector<const Image*> rows;
    rows.reserve(ds.items.size());
    for (const auto& [img, label] : ds.items) rows.push_back(&img);
    Tape<float> tape;
    std::vector<Var<float>> leaves = make_leaves(tape, store, false);
    Var<float> batch = image_batch_leaf(tape, rows);
    Var<float> feat = encoder.forward(tape, batch, leaves);
    const long N = feat.shape()[0], D = feat.shape()[1];
    MatX<float> out(N, D);
    for (long r = 0; r < N; ++r) {
        for (long c = 0; c < D; ++c) out(r, c) = feat.value()[r * D + c];
    }
    return out;
}

}  // namespace ctex
