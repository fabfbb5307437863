#include "ctex/augment.hpp"

#include <stdexcept>
#include <string>

namespace ctex {

void AugmentConfig::validate() const {
    if (k_min < 0 || k_min > k_max) {
        throw std::invalid_argument("AugmentConfig: need 0 <= k_min <= k_max, got [" +
                                    std::to_string(k_min) + ", " + std::to_string(k_max) + "]");
    }
    if (crop_size < 0) throw std::invalid_argument("AugmentConfig: crop_size must be >= 0");
    if (flip_prob < 0.0 || flip_prob > 1.0) {
        throw std::invalid_argument("AugmentConfig: flip_prob must lie in [0,1]");
    }
    map.validate();
}

Image chaotic_augment(const Image& img, const ChaoticMapSpec& spec, long k) {
    if (k < 0) throw std::invalid_argument("chaotic_augment: k must be >= 0");
    if (k == 0) return img;
    Image out = img;
    for (Eigen::Index i = 0; i < out.data.size(); ++i) {
        out.data[i] = iterate(spec, out.data[i], k);
    }
    return out;
}

long sample_k(Rng& rng, long k_min, long k_max) {
    if (k_min > k_max) {
        throw std::invalid_argument("sample_k: invalid range [" + std::to_string(k_min) + ", " +
                                    std::to_string(k_max) + "]");
    }
    return rng.uniform_int(k_min, k_max);
}

Image flip_horizontal(const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
            }
        }
    }
    return out;
}

Image crop(const Image& img, int top, int left, int size) {
    if (size <= 0 || top < 0 || left < 0 || top + size > img.height ||
        left + size > img.width) {
        throw std::invalid_argument("crop: " + std::to_string(size) + "x" +
                                    std::to_string(size) + " at (" + std::to_string(top) + "," +
                                    std::to_string(left) + ") does not fit in " +
                                    std::to_string(img.height) + "x" + std::to_string(img.width));
    }
    Image out(size, size, img.channels);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = img.at(top + y, left + x, c);
            }
        }
    }
    return out;
}

Image standard_augment(const Image& img, Rng& rng, const AugmentConfig& cfg) {
    cfg.validate();
    const int size = (cfg.crop_size == 0) ? std::min(img.height, img.width) : cfg.crop_size;
    if (size > img.height || size > img.width) {
        throw std::invalid_argument("standard_augment: crop size " + std::to_string(size) +
                                    " exceeds image " + std::to_string(img.height) + "x" +
                                    std::to_string(img.width));
    }
    // Fixed draw order (flip, row, col); draws happen even for no-op configs.
    const bool do_flip = rng.uniform01() < cfg.flip_prob;
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - size) + 1));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - size) + 1));

    const Image* src = &img;
    Image flipped;
    if (do_flip) {
        flipped = flip_horizontal(img);
        src = &flipped;
    }
    if (size == img.height && size == img.width) return *src;
    return crop(*src, top, left, size);
}

ViewPair make_view_pair(const Image& x, Rng& rng, const AugmentConfig& cfg) {
    cfg.validate();
    ViewPair pair;
    pair.view_i = standard_augment(x, rng, cfg);
    pair.k = sample_k(rng, cfg.k_min, cfg.k_max);
    pair.view_j = standard_augment(chaotic_augment(x, cfg.map, pair.k), rng, cfg);
    return pair;
}

}  // namespace ctex
