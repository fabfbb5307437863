#pragma once

#include "ctex/dynamics.hpp"
#include "ctex/image.hpp"
#include "ctex/rng.hpp"

namespace ctex {

struct AugmentConfig {
    long k_min = 1;
    long k_max = 5;
    int crop_size = 0;            // 0 means "no crop" (full size)
    double flip_prob = 0.5;
    ChaoticMapSpec map = ChaoticMapSpec::sine();

    void validate() const;
};

// Two correlated views of one source image. Only view_j has passed through
// the chaotic transform; view_i is chaos-free.
struct ViewPair {
    Image view_i;
    Image view_j;
    long k = 0;  // iteration count applied to view_j
};

// Pixel-wise application of the chaotic map for k iterations. Shape is
// preserved; k = 0 is the identity.
Image chaotic_augment(const Image& img, const ChaoticMapSpec& spec, long k);

// Uniform draw from {k_min, ..., k_max}; throws on an inverted range.
long sample_k(Rng& rng, long k_min, long k_max);

Image flip_horizontal(const Image& img);

Image crop(const Image& img, int top, int left, int size);

// Horizontal flip with probability cfg.flip_prob followed by a uniformly
// positioned square crop of cfg.crop_size (full size when 0). Exactly three
// draws are consumed, in this order, regardless of outcome:
//   1. flip decision (one uniform real)
//   2. crop row offset  3. crop column offset
Image standard_augment(const Image& img, Rng& rng, const AugmentConfig& cfg);

// view_i = standard_augment(x); view_j = standard_augment(chaotic_augment(x)).
// Draw order: the three view_i draws, then k, then the three view_j draws;
// a run is reproducible from the rng seed alone.
ViewPair make_view_pair(const Image& x, Rng& rng, const AugmentConfig& cfg);

}  // namespace ctex
