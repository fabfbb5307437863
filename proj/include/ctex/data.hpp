#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ctex/image.hpp"

namespace ctex {

struct LabeledDataset {
    std::vector<std::pair<Image, int>> items;
    std::vector<std::string> class_names;

    int n_classes() const { return static_cast<int>(class_names.size()); }
    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(items.size());
        for (const auto& it : items) out.push_back(it.second);
        return out;
    }
    // Dense ids, every class nonempty, intensities valid.
    void validate() const;
};

// Procedural texture families. Each class is one family instance; per-sample
// draws jitter phase, orientation, contrast, and noise so that classification
// needs more than a template match. Lines and Dots share orientation and
// period bands by default, so telling them apart requires phase structure
// rather than spectral energy.
struct ClassFamily {
    enum class Kind { Grating, Checker, Noise, Lines, Dots };
    Kind kind = Kind::Grating;
    // Grating/Lines/Dots: orientation band (radians).
    double angle_lo = 0.0, angle_hi = 0.0;
    // Grating: frequency band (cycles/image).
    double freq_lo = 3.0, freq_hi = 4.0;
    // Checker/Lines/Dots: period in pixels (jittered +-10% per sample).
    double period = 8.0;
    // Noise: power-law spectrum exponent (amplitude ~ f^-beta/2).
    double beta = 2.0;
};

struct SynthSpec {
    int n_classes = 5;
    int n_per_class = 40;
    int size = 32;
    std::uint64_t seed = 7;
    std::vector<ClassFamily> families;  // resized/filled with defaults if empty

    void validate() const;
};

// Default family assignment for n classes: a mix of gratings (distinct
// orientation/frequency bands), checkerboards (distinct periods), and
// spectrally filtered noise (distinct exponents).
std::vector<ClassFamily> default_families(int n_classes);

// Deterministic in spec.seed; intensities in [0,1].
LabeledDataset gen_synthetic_textures(const SynthSpec& spec);

// One subdirectory per class (sorted name order = class id); files are PNG
// or PPM. Throws on empty class directories and unreadable files.
LabeledDataset load_image_folder(const std::filesystem::path& root);

// Writes dataset as a PNG class-folder tree plus manifest.csv (path,label).
void save_image_folder(const LabeledDataset& ds, const std::filesystem::path& root);

// Stratified k-fold split over labels: returns k (train, val) index pairs.
// Validation folds are disjoint and exhaustive; deterministic in seed.
// Throws when any class has fewer than k items.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    const std::vector<int>& labels, int k, std::uint64_t seed);

}  // namespace ctex
