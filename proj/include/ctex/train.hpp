#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctex/augment.hpp"
#include "ctex/checkpoint.hpp"
#include "ctex/data.hpp"
#include "ctex/metrics.hpp"
#include "ctex/network.hpp"

namespace ctex {

// Desk-scale defaults: a 2-stage chaotic-branch encoder (widths 8/16) and a
// 3-stage supervised-branch encoder (widths 16/32/64).
EncoderConfig default_chaos_encoder(int in_channels = 1);
EncoderConfig default_sup_encoder(int in_channels = 1);

struct EpochLoss {
    int epoch = 0;
    double loss = 0.0;
};

// ---- contrastive pretraining --------------------------------------------------

struct PretrainConfig {
    double tau = 0.5;
    int batch = 32;
    int epochs = 15;
    // One epoch makes this many passes over the data, each with its own
    // fixed per-image view draw; raises augmentation diversity without
    // changing the epoch-level contract.
    int views_per_epoch = 4;
    double lr_encoder = 3e-3;
    double lr_projector = 3e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 7;
    AugmentConfig augment{1, 5, 16, 0.5, ChaoticMapSpec::sine()};
    EncoderConfig encoder = default_chaos_encoder();
    int projector_out = 32;

    void validate() const;
};

struct PretrainResult {
    ParamStore<float> store;  // encoder parameters only; the projector is discarded
    Encoder<float> encoder;
    std::vector<EpochLoss> trace;
};

// SimCLR-style loop: per batch, interleave the two views of each image as
// rows (2t, 2t+1), push them through encoder + projector, apply the NT-Xent
// loss and one AdamW step with separate encoder/projector learning rates.
// Deterministic in (dataset, config). Each epoch runs views_per_epoch
// passes; data order and the per-(image, pass) augmentation streams
// ("pretrain/augment", pass * n_images + image_index) are identical across
// epochs, so a zero-learning-rate run produces a flat loss trace. Throws on
// an empty dataset and aborts with batch diagnostics if the loss goes
// non-finite.
PretrainResult pretrain(const LabeledDataset& ds, const PretrainConfig& cfg);

// ---- supervised training of the "sup" branch ----------------------------------

struct SupervisedConfig {
    int epochs = 30;
    int batch = 32;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double flip_prob = 0.5;
    std::uint64_t seed = 7;
    EncoderConfig encoder = default_sup_encoder();
};

struct SupervisedResult {
    ParamStore<float> store;  // encoder parameters only; the head is discarded
    Encoder<float> encoder;
    std::vector<EpochLoss> trace;
};

// Cross-entropy training of encoder + affine head on the full corpus with
// cosine annealing; stands in for an externally pretrained backbone.
SupervisedResult train_supervised(const LabeledDataset& ds, const SupervisedConfig& cfg);

// ---- ensemble fine-tuning ------------------------------------------------------

enum class EnsembleBranch { Ensemble, SupOnly, ChaosOnly };

struct FinetuneConfig {
    int epochs = 20;
    int batch = 32;
    int folds = 4;
    double lr_head = 1e-2;
    double lr_backbone = 1e-5;
    double weight_decay = 0.01;
    int se_ratio = 4;
    double flip_prob = 0.5;
    std::uint64_t seed = 7;
    EnsembleBranch branch = EnsembleBranch::Ensemble;

    // Warns (returns a non-empty message) when folds leave the 4..10 range.
    std::string validate() const;
};

struct FoldMetrics {
    int fold = 0;
    double accuracy = 0.0;
    double f1 = 0.0;
};

struct FinetuneResult {
    std::vector<FoldMetrics> folds;
    double acc_mean = 0.0, acc_std = 0.0;
    double f1_mean = 0.0, f1_std = 0.0;
    ConfusionMatrix combined;           // summed over validation folds
    ParamStore<float> final_store;      // model retrained on the full dataset
    std::vector<EpochLoss> final_trace;
};

// Per fold: attaches fresh SE + classifier heads to copies of the two
// frozen-start backbones, trains heads at lr_head and both backbones at
// lr_backbone under per-step cosine annealing, and evaluates on the held-out
// fold. Branch selection drops the SE block and the absent feature vector.
FinetuneResult finetune(const LabeledDataset& ds, const ParamStore<float>& sup_store,
                        const EncoderConfig& sup_cfg, const ParamStore<float>& chaos_store,
                        const EncoderConfig& chaos_cfg, const FinetuneConfig& cfg);

// ---- checkpoint helpers --------------------------------------------------------

void save_encoder_checkpoint(const ParamStore<float>& store, const EncoderConfig& cfg,
                             const std::filesystem::path& path);

struct LoadedEncoder {
    EncoderConfig cfg;
    ParamStore<float> store;
    Encoder<float> encoder;
};

// Throws a mismatch error listing expected vs found shapes when the file
// disagrees with its own architecture record.
LoadedEncoder load_encoder_checkpoint(const std::filesystem::path& path);

// ---- shared forward helpers ----------------------------------------------------

// Copies images (converted to 32-bit) into an N x C x H x W leaf.
Var<float> image_batch_leaf(Tape<float>& tape, const std::vector<const Image*>& images);

// Pooled features of every dataset item under the given encoder.
MatX<float> extract_features(const ParamStore<float>& store, const Encoder<float>& encoder,
                             const LabeledDataset& ds);

}  // namespace ctex
