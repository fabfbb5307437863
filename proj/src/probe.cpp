#include "ctex/probe.hpp"

#include <cmath>
#include <thread>

#include "ctex/loss.hpp"
#include "ctex/optim.hpp"
#include "ctex/rng.hpp"

namespace ctex {

namespace {

void aggregate(ProbeResult& r) {
    auto agg = [&](auto getter) {
        double mean = 0.0;
        for (const auto& fm : r.folds) mean += getter(fm);
        mean /= static_cast<double>(r.folds.size());
        double var = 0.0;
        for (const auto& fm : r.folds) {
            const double d = getter(fm) - mean;
            var += d * d;
        }
        var /= static_cast<double>(r.folds.size());
        return std::make_pair(mean, std::sqrt(var));
    };
    std::tie(r.acc_mean, r.acc_std) = agg([](const FoldMetrics& m) { return m.accuracy; });
    std::tie(r.f1_mean, r.f1_std) = agg([](const FoldMetrics& m) { return m.f1; });
}

}  // namespace

ProbeResult linear_probe(const ParamStore<float>& enc_store, const Encoder<float>& encoder,
                         const LabeledDataset& ds, const ProbeConfig& cfg) {
    ds.validate();
    if (cfg.epochs < 0) throw std::invalid_argument("linear_probe: epochs must be >= 0");
    const MatX<float> features = extract_features(enc_store, encoder, ds);
    const auto labels = ds.labels();
    const int n_classes = ds.n_classes();
    const long D = features.cols();

    const auto splits = kfold_split(labels, cfg.folds, derive_seed(cfg.seed, "probe/folds"));

    ProbeResult result;
    for (int f = 0; f < cfg.folds; ++f) {
        const auto& [train_idx, val_idx] = splits[static_cast<std::size_t>(f)];

        ParamStore<float> store;
        Classifier<float> head = Classifier<float>::build(store, static_cast<int>(D), n_classes,
                                                          "head");
        AdamW<float> opt(store, cfg.lr);
        opt.weight_decay = cfg.weight_decay;

        ArrX<float> train_x(static_cast<long>(train_idx.size()) * D);
        std::vector<int> train_y;
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            const long idx = train_idx[i];
            for (long c = 0; c < D; ++c) train_x[static_cast<long>(i) * D + c] = features(idx, c);
            train_y.push_back(labels[static_cast<std::size_t>(idx)]);
        }

        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            Tape<float> tape;
            std::vector<Var<float>> leaves = make_leaves(tape, store);
            Var<float> x = tape.leaf(train_x, Shape{static_cast<long>(train_idx.size()), D},
                                     false);
            Var<float> logits = head.forward(tape, x, leaves);
            Var<float> loss = softmax_cross_entropy(tape, logits, train_y);
            tape.backward(loss);
            std::vector<ArrX<float>> grads;
            for (const auto& leaf : leaves) grads.push_back(tape.grad(leaf));
            opt.step(store, grads, cosine_lr(epoch, cfg.epochs, 1.0));
        }

        // Held-out evaluation.
        std::vector<int> preds, val_y;
        {
            Tape<float> tape;
            std::vector<Var<float>> leaves = make_leaves(tape, store, false);
            ArrX<float> val_x(static_cast<long>(val_idx.size()) * D);
            for (std::size_t i = 0; i < val_idx.size(); ++i) {
                const long idx = val_idx[i];
                for (long c = 0; c < D; ++c) val_x[static_cast<long>(i) * D + c] = features(idx, c);
                val_y.push_back(labels[static_cast<std::size_t>(idx)]);
            }
            Var<float> x = tape.leaf(std::move(val_x),
                                     Shape{static_cast<long>(val_idx.size()), D}, false);
            Var<float> logits = head.forward(tape, x, leaves);
            const long K = logits.shape()[1];
            for (long r = 0; r < logits.shape()[0]; ++r) {
                long best = 0;
                for (long k = 1; k < K; ++k) {
                    if (logits.value()[r * K + k] > logits.value()[r * K + best]) best = k;
                }
                preds.push_back(static_cast<int>(best));
            }
        }
        const ConfusionMatrix cm = confusion(preds, val_y, n_classes);
        result.folds.push_back({f, accuracy(cm), macro_f1(cm)});
    }
    aggregate(result);
    return result;
}

AblationResult ablate_maps(const LabeledDataset& ds, const PretrainConfig& base,
                           const std::vector<MapKind>& maps, const std::vector<int>& epoch_grid,
                           const ProbeConfig& probe_cfg, int jobs) {
    if (maps.empty() || epoch_grid.empty()) {
        throw std::invalid_argument("ablate_maps: empty map or epoch grid");
    }
    if (jobs < 1) jobs = 1;

    AblationResult result;
    result.cells.resize(maps.size() * epoch_grid.size());

    // Every cell shares the base seed, so initialization and view draws are
    // matched across the grid and against the random-encoder baseline; the
    // cells differ only in (map, epochs). Cells stay independent runs, so
    // parallel execution cannot change any result.
    auto run_cell = [&](std::size_t cell) {
        const MapKind kind = maps[cell / epoch_grid.size()];
        const int epochs = epoch_grid[cell % epoch_grid.size()];
        PretrainConfig cfg = base;
        cfg.augment.map = ChaoticMapSpec::defaults(kind);
        cfg.epochs = epochs;
        const PretrainResult pre = pretrain(ds, cfg);
        AblationCell out;
        out.map = to_string(kind);
        out.epochs = epochs;
        out.probe = linear_probe(pre.store, pre.encoder, ds, probe_cfg);
        result.cells[cell] = std::move(out);
    };

    const std::size_t n_cells = result.cells.size();
    if (jobs == 1) {
        for (std::size_t c = 0; c < n_cells; ++c) run_cell(c);
    } else {
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs && w < static_cast<int>(n_cells); ++w) {
            workers.emplace_back([&, w]() {
                for (std::size_t c = static_cast<std::size_t>(w); c < n_cells;
                     c += static_cast<std::size_t>(jobs)) {
                    run_cell(c);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    // Untrained-encoder baseline with the base seed's initialization.
    PretrainConfig zero = base;
    zero.epochs = 0;
    const PretrainResult init_only = pretrain(ds, zero);
    result.baseline = linear_probe(init_only.store, init_only.encoder, ds, probe_cfg);
    return result;
}

}  // namespace ctex
