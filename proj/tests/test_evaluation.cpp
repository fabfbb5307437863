#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "ctex/metrics.hpp"
#include "ctex/probe.hpp"
#include "ctex/rng.hpp"

using namespace ctex;

TEST_CASE("confusion matrix basics") {
    const ConfusionMatrix diag = confusion({0, 1, 2}, {0, 1, 2}, 3);
    CHECK(diag.counts.trace() == 3);
    CHECK(diag.total() == 3);

    const ConfusionMatrix single = confusion({1}, {0}, 2);
    CHECK(single.counts(0, 1) == 1);
    CHECK(single.counts.sum() == 1);

    CHECK_THROWS_AS(confusion({0, 3}, {0, 1}, 3), std::out_of_range);
    CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), std::invalid_argument);
}

TEST_CASE("confusion matches a naive double loop on random data") {
    Rng rng(31);
    const int n_classes = 7;
    std::vector<int> preds, labels;
    for (int i = 0; i < 1000; ++i) {
        preds.push_back(static_cast<int>(rng.below(n_classes)));
        labels.push_back(static_cast<int>(rng.below(n_classes)));
    }
    const ConfusionMatrix cm = confusion(preds, labels, n_classes);
    for (int t = 0; t < n_classes; ++t) {
        for (int p = 0; p < n_classes; ++p) {
            long want = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                if (labels[i] == t && preds[i] == p) ++want;
            }
            CHECK(cm.counts(t, p) == want);
        }
    }
    CHECK(cm.total() == 1000);
}

TEST_CASE("accuracy and macro F1 on hand cases") {
    ConfusionMatrix perfect;
    perfect.counts.setZero(3, 3);
    perfect.counts.diagonal() << 4, 5, 6;
    CHECK(accuracy(perfect) == 1.0);
    CHECK(macro_f1(perfect) == 1.0);

    ConfusionMatrix half;
    half.counts.setZero(2, 2);
    half.counts << 1, 1, 1, 1;
    CHECK(accuracy(half) == 0.5);
    CHECK(macro_f1(half) == 0.5);

    // a never-predicted, never-true class contributes F1 = 0
    ConfusionMatrix with_empty;
    with_empty.counts.setZero(3, 3);
    with_empty.counts(0, 0) = 2;
    with_empty.counts(1, 1) = 2;
    CHECK(accuracy(with_empty) == 1.0);
    CHECK(macro_f1(with_empty) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    ConfusionMatrix empty;
    empty.counts.setZero(2, 2);
    CHECK_THROWS_AS(accuracy(empty), std::invalid_argument);
    CHECK_THROWS_AS(macro_f1(empty), std::invalid_argument);
}

TEST_CASE("metrics are invariant under simultaneous class permutation") {
    Rng rng(37);
    std::vector<int> preds, labels;
    for (int i = 0; i < 500; ++i) {
        preds.push_back(static_cast<int>(rng.below(4)));
        labels.push_back(static_cast<int>(rng.below(4)));
    }
    const int perm[4] = {2, 0, 3, 1};
    std::vector<int> preds_p, labels_p;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        preds_p.push_back(perm[preds[i]]);
        labels_p.push_back(perm[labels[i]]);
    }
    const ConfusionMatrix a = confusion(preds, labels, 4);
    const ConfusionMatrix b = confusion(preds_p, labels_p, 4);
    CHECK(accuracy(a) == accuracy(b));
    CHECK(macro_f1(a) == doctest::Approx(macro_f1(b)).epsilon(1e-15));
    CHECK(accuracy(a) >= 0.0);
    CHECK(accuracy(a) <= 1.0);
    CHECK(macro_f1(a) >= 0.0);
    CHECK(macro_f1(a) <= 1.0);
}

TEST_CASE("accuracy is one exactly when the matrix is diagonal") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        ConfusionMatrix cm;
        cm.counts.setZero(3, 3);
        for (int t = 0; t < 3; ++t) {
            for (int p = 0; p < 3; ++p) cm.counts(t, p) = static_cast<long>(rng.below(5));
        }
        cm.counts(0, 0) += 1;  // nonempty
        const bool diagonal = (cm.counts.sum() == cm.counts.trace());
        CHECK((accuracy(cm) == 1.0) == diagonal);
    }
}

namespace {

LabeledDataset four_sample_corpus() {
    SynthSpec spec;
    spec.n_classes = 2;
    spec.n_per_class = 2;
    spec.size = 16;
    spec.seed = 13;
    return gen_synthetic_textures(spec);
}

}  // namespace

TEST_CASE("linear probe smoke test: two folds on four samples") {
    const LabeledDataset ds = four_sample_corpus();
    PretrainConfig pcfg;
    pcfg.epochs = 0;
    pcfg.batch = 2;
    pcfg.augment.crop_size = 12;
    pcfg.seed = 3;
    const PretrainResult enc = pretrain(ds, pcfg);

    ProbeConfig cfg;
    cfg.folds = 2;
    cfg.epochs = 20;
    const ProbeResult r = linear_probe(enc.store, enc.encoder, ds, cfg);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.acc_mean >= 0.0);
    CHECK(r.acc_mean <= 1.0);
}

TEST_CASE("linear probe is deterministic") {
    const LabeledDataset ds = four_sample_corpus();
    PretrainConfig pcfg;
    pcfg.epochs = 1;
    pcfg.batch = 2;
    pcfg.augment.crop_size = 12;
    pcfg.seed = 3;
    const PretrainResult enc = pretrain(ds, pcfg);
    ProbeConfig cfg;
    cfg.folds = 2;
    cfg.epochs = 30;
    const ProbeResult a = linear_probe(enc.store, enc.encoder, ds, cfg);
    const ProbeResult b = linear_probe(enc.store, enc.encoder, ds, cfg);
    CHECK(a.acc_mean == b.acc_mean);
    CHECK(a.f1_mean == b.f1_mean);
    for (std::size_t i = 0; i < a.folds.size(); ++i) {
        CHECK(a.folds[i].accuracy == b.folds[i].accuracy);
    }
}

TEST_CASE("ablation grid has one cell per (map, epochs) combination") {
    SynthSpec sspec;
    sspec.n_classes = 2;
    sspec.n_per_class = 4;
    sspec.size = 16;
    sspec.seed = 19;
    const LabeledDataset ds = gen_synthetic_textures(sspec);

    PretrainConfig base;
    base.batch = 4;
    base.augment.crop_size = 12;
    base.seed = 5;
    ProbeConfig probe_cfg;
    probe_cfg.folds = 2;
    probe_cfg.epochs = 10;

    const AblationResult r = ablate_maps(ds, base,
                                         {MapKind::Logistic, MapKind::Tent, MapKind::Sine},
                                         {1, 2}, probe_cfg);
    REQUIRE(r.cells.size() == 6);
    CHECK(r.cells[0].map == "logistic");
    CHECK(r.cells[0].epochs == 1);
    CHECK(r.cells[1].epochs == 2);
    CHECK(r.cells[5].map == "sine");
    CHECK(r.baseline.folds.size() == 2);

    // cells are independent runs, so the worker count cannot change results
    const AblationResult r2 = ablate_maps(ds, base,
                                          {MapKind::Logistic, MapKind::Tent, MapKind::Sine},
                                          {1, 2}, probe_cfg, 3);
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        CHECK(r2.cells[i].probe.acc_mean == r.cells[i].probe.acc_mean);
        CHECK(r2.cells[i].probe.f1_mean == r.cells[i].probe.f1_mean);
    }
}
