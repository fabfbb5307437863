#pragma once

#include <string>
#include <vector>

#include "ctex/train.hpp"

namespace ctex {

struct ProbeConfig {
    int folds = 4;
    int epochs = 200;
    double lr = 0.05;
    double weight_decay = 1e-4;
    std::uint64_t seed = 7;
};

struct ProbeResult {
    double acc_mean = 0.0, acc_std = 0.0;
    double f1_mean = 0.0, f1_std = 0.0;
    std::vector<FoldMetrics> folds;
};

// Representation-quality measure: freezes the encoder, extracts pooled
// features once, and per stratified fold trains a single affine classifier
// (full-batch AdamW under cosine annealing, zero-initialized head) on the
// train split, reporting held-out accuracy and macro F1.
ProbeResult linear_probe(const ParamStore<float>& enc_store, const Encoder<float>& encoder,
                         const LabeledDataset& ds, const ProbeConfig& cfg);

struct AblationCell {
    std::string map;
    int epochs = 0;
    ProbeResult probe;
};

struct AblationResult {
    std::vector<AblationCell> cells;
    ProbeResult baseline;  // probe of the untrained (randomly initialized) encoder
};

// Grid of pretrain-then-probe runs over map kinds and epoch counts, plus a
// random-encoder baseline sharing the base seed. Each cell derives its own
// seed from (base seed, cell index); cells are independent, so jobs > 1
// distributes them over threads without changing any result.
AblationResult ablate_maps(const LabeledDataset& ds, const PretrainConfig& base,
                           const std::vector<MapKind>& maps, const std::vector<int>& epoch_grid,
                           const ProbeConfig& probe_cfg, int jobs = 1);

}  // namespace ctex
