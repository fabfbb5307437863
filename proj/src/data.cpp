#include "ctex/data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ctex/image_io.hpp"
#include "ctex/rng.hpp"

namespace ctex {

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676656;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Zero-mean structural field for one grating sample.
Eigen::ArrayXXd grating_field(const ClassFamily& f, int size, Rng& rng) {
    const double angle = rng.uniform(f.angle_lo, f.angle_hi);
    const double freq = rng.uniform(f.freq_lo, f.freq_hi);
    const double phase = rng.uniform(0.0, kTwoPi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    Eigen::ArrayXXd field(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x * ca + y * sa) / size;
            field(y, x) = std::sin(kTwoPi * freq * u + phase);
        }
    }
    return field;
}

Eigen::ArrayXXd checker_field(const ClassFamily& f, int size, Rng& rng) {
    const double cell = f.period / 2.0;
    const double ox = rng.uniform(0.0, f.period);
    const double oy = rng.uniform(0.0, f.period);
    Eigen::ArrayXXd field(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const long cx = static_cast<long>(std::floor((x + ox) / cell));
            const long cy = static_cast<long>(std::floor((y + oy) / cell));
            field(y, x) = ((cx + cy) & 1) ? 1.0 : -1.0;
        }
    }
    return field;
}

// Thin bright ridges along one oriented axis: a soft periodic bump profile.
// With matched period and orientation this shares its coarse spectrum with
// the dot lattice below while differing in phase structure.
Eigen::ArrayXXd lines_field(const ClassFamily& f, int size, Rng& rng) {
    const double angle = rng.uniform(f.angle_lo, f.angle_hi);
    const double period = f.period * rng.uniform(0.9, 1.1);
    const double phase = rng.uniform(0.0, 1.0);
    const double sharp = rng.uniform(2.0, 3.0);
    const double ca = std::cos(angle), sa = std::sin(angle);
    Eigen::ArrayXXd field(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x * ca + y * sa) / period + phase;
            field(y, x) = std::exp(sharp * (std::cos(kTwoPi * u) - 1.0));
        }
    }
    return field;
}

// Dot lattice: the product of two orthogonal bump profiles with the same
// period family as lines_field.
Eigen::ArrayXXd dots_field(const ClassFamily& f, int size, Rng& rng) {
    const double angle = rng.uniform(f.angle_lo, f.angle_hi);
    const double period = f.period * rng.uniform(0.9, 1.1);
    const double phase_u = rng.uniform(0.0, 1.0);
    const double phase_v = rng.uniform(0.0, 1.0);
    const double sharp = rng.uniform(2.0, 3.0);
    const double ca = std::cos(angle), sa = std::sin(angle);
    Eigen::ArrayXXd field(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x * ca + y * sa) / period + phase_u;
            const double v = (-x * sa + y * ca) / period + phase_v;
            field(y, x) = std::exp(sharp * (std::cos(kTwoPi * u) - 1.0)) *
                          std::exp(sharp * (std::cos(kTwoPi * v) - 1.0));
        }
    }
    return field;
}

// Random-phase spectral synthesis: sum of plane waves over the half-plane
// integer frequency lattice with amplitude |f|^(-beta/2), standardized to
// unit variance.
Eigen::ArrayXXd noise_field(const ClassFamily& f, int size, Rng& rng) {
    using Cplx = std::complex<double>;
    const int kmax = size / 2;
    Eigen::ArrayXXd field = Eigen::ArrayXXd::Zero(size, size);
    std::vector<Cplx> col(static_cast<std::size_t>(size)), row(static_cast<std::size_t>(size));
    for (int kx = 0; kx <= kmax; ++kx) {
        const int ky_lo = (kx == 0) ? 1 : -kmax;
        for (int ky = ky_lo; ky <= kmax; ++ky) {
            const double f2 = static_cast<double>(kx) * kx + static_cast<double>(ky) * ky;
            const double amp = std::pow(f2, -f.beta / 4.0);  // |f|^(-beta/2)
            const double phase = rng.uniform(0.0, kTwoPi);
            const Cplx a = amp * Cplx(std::cos(phase), std::sin(phase));
            const Cplx wx(std::cos(kTwoPi * kx / size), std::sin(kTwoPi * kx / size));
            const Cplx wy(std::cos(kTwoPi * ky / size), std::sin(kTwoPi * ky / size));
            Cplx cx(1.0, 0.0), cy(1.0, 0.0);
            for (int x = 0; x < size; ++x) {
                col[static_cast<std::size_t>(x)] = cx;
                cx *= wx;
            }
            for (int y = 0; y < size; ++y) {
                row[static_cast<std::size_t>(y)] = cy;
                cy *= wy;
            }
            for (int y = 0; y < size; ++y) {
                const Cplx ay = a * row[static_cast<std::size_t>(y)];
                for (int x = 0; x < size; ++x) {
                    field(y, x) += (ay * col[static_cast<std::size_t>(x)]).real();
                }
            }
        }
    }
    const double mean = field.mean();
    const double sd = std::sqrt((field - mean).square().mean());
    return (field - mean) / (sd > 0 ? sd : 1.0);
}

// Class identity lives in the structural field; everything here is
// per-sample nuisance: contrast and polarity, brightness offset, a linear
// illumination ramp, a random monotone tone curve, and pixel noise. The
// heavy photometric variation keeps raw intensity statistics from giving
// classes away.
Image apply_photometric_nuisance(const Eigen::ArrayXXd& field, int size, Rng& rng) {
    const double contrast = 0.07 + 0.38 * std::pow(rng.uniform01(), 2.0);
    const double polarity = (rng.uniform01() < 0.5) ? -1.0 : 1.0;
    const double brightness = rng.uniform(-0.2, 0.2);
    const double ramp_amp = rng.uniform(0.0, 0.25);
    const double ramp_dir = rng.uniform(0.0, kTwoPi);
    const double rx = std::cos(ramp_dir), ry = std::sin(ramp_dir);
    const double noise_sd = 0.06;
    // tone curve: blend of a gamma curve and a tanh S-curve
    const double gamma = rng.uniform(0.45, 2.2);
    const double s_steep = rng.uniform(1.0, 6.0);
    const double s_center = rng.uniform(0.35, 0.65);
    const double s_mix = rng.uniform01();
    const double s_span = std::tanh(s_steep * std::max(s_center, 1.0 - s_center));
    auto tone = [&](double v) {
        const double g = std::pow(v, gamma);
        const double s = 0.5 + 0.5 * std::tanh(s_steep * (v - s_center)) / s_span;
        return (1.0 - s_mix) * g + s_mix * s;
    };
    Image img(size, size, 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double ramp =
                ramp_amp * ((x - size / 2.0) * rx + (y - size / 2.0) * ry) / size;
            double v = 0.5 + brightness + ramp + polarity * contrast * field(y, x);
            v = tone(clamp01(v));
            v += noise_sd * rng.normal();
            img.at(y, x, 0) = clamp01(v);
        }
    }
    return img;
}

bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".png" || ext == ".ppm";
}

}  // namespace

void LabeledDataset::validate() const {
    const int n = n_classes();
    if (n < 1) throw std::invalid_argument("LabeledDataset: no classes");
    std::vector<long> counts(static_cast<std::size_t>(n), 0);
    for (const auto& [img, label] : items) {
        if (label < 0 || label >= n) {
            throw std::invalid_argument("LabeledDataset: label " + std::to_string(label) +
                                        " out of range");
        }
        ++counts[static_cast<std::size_t>(label)];
        img.validate();
    }
    for (int c = 0; c < n; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            throw std::invalid_argument("LabeledDataset: class '" +
                                        class_names[static_cast<std::size_t>(c)] + "' is empty");
        }
    }
}

void SynthSpec::validate() const {
    if (n_classes < 2) throw std::invalid_argument("SynthSpec: n_classes must be >= 2");
    if (n_per_class < 1) throw std::invalid_argument("SynthSpec: n_per_class must be >= 1");
    if (size < 16) throw std::invalid_argument("SynthSpec: size must be >= 16");
    if (!families.empty() && static_cast<int>(families.size()) != n_classes) {
        throw std::invalid_argument("SynthSpec: families must be empty or one per class");
    }
}

std::vector<ClassFamily> default_families(int n_classes) {
    // Classes differ only structurally: the two grating classes share one
    // frequency band and differ by orientation, the two noise classes by
    // spectral slope.
    const double deg = kTwoPi / 360.0;
    std::vector<ClassFamily> fams;
    for (int c = 0; c < n_classes; ++c) {
        ClassFamily f;
        const int round = c / 5;
        switch (c % 5) {
            case 0:
                f.kind = ClassFamily::Kind::Grating;
                f.angle_lo = (10.0 + 36.0 * round) * deg;
                f.angle_hi = f.angle_lo + 26.0 * deg;
                f.freq_lo = 4.5;
                f.freq_hi = 7.5;
                break;
            case 1:
                f.kind = ClassFamily::Kind::Checker;
                f.period = 6.0 + 2.0 * round;
                break;
            case 2:
                f.kind = ClassFamily::Kind::Noise;
                f.beta = 1.2 + 0.4 * round;
                break;
            case 3:
                f.kind = ClassFamily::Kind::Grating;
                f.angle_lo = (72.0 + 36.0 * round) * deg;
                f.angle_hi = f.angle_lo + 26.0 * deg;
                f.freq_lo = 4.5;
                f.freq_hi = 7.5;
                break;
            default:
                f.kind = ClassFamily::Kind::Noise;
                f.beta = 2.8 + 0.4 * round;
                break;
        }
        fams.push_back(f);
    }
    return fams;
}

LabeledDataset gen_synthetic_textures(const SynthSpec& spec) {
    spec.validate();
    const std::vector<ClassFamily> fams =
        spec.families.empty() ? default_families(spec.n_classes) : spec.families;

    LabeledDataset ds;
    for (int c = 0; c < spec.n_classes; ++c) {
        ds.class_names.push_back("class_" + std::to_string(c));
    }
    for (int c = 0; c < spec.n_classes; ++c) {
        const ClassFamily& fam = fams[static_cast<std::size_t>(c)];
        for (int j = 0; j < spec.n_per_class; ++j) {
            Rng rng(derive_seed(spec.seed, "data/synth",
                                static_cast<std::uint64_t>(c) * spec.n_per_class + j));
            Eigen::ArrayXXd field;
            switch (fam.kind) {
                case ClassFamily::Kind::Grating: field = grating_field(fam, spec.size, rng); break;
                case ClassFamily::Kind::Checker: field = checker_field(fam, spec.size, rng); break;
                case ClassFamily::Kind::Noise: field = noise_field(fam, spec.size, rng); break;
                case ClassFamily::Kind::Lines: field = lines_field(fam, spec.size, rng); break;
                case ClassFamily::Kind::Dots: field = dots_field(fam, spec.size, rng); break;
            }
            // Equalize first- and second-moment intensity statistics across
            // families; labels should not be readable from them.
            const double mean = field.mean();
            const double sd = std::sqrt((field - mean).square().mean());
            field = (field - mean) / (sd > 0 ? sd : 1.0);
            ds.items.emplace_back(apply_photometric_nuisance(field, spec.size, rng), c);
        }
    }
    return ds;
}

LabeledDataset load_image_folder(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
        throw std::runtime_error("load_image_folder: " + root.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> class_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) {
        throw std::runtime_error("load_image_folder: no class subdirectories in " +
                                 root.string());
    }
    LabeledDataset ds;
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
        ds.class_names.push_back(class_dirs[c].filename().string());
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(class_dirs[c])) {
            if (entry.is_regular_file() && is_image_file(entry.path())) {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw std::runtime_error("load_image_folder: class directory " +
                                     class_dirs[c].string() + " contains no images");
        }
        for (const auto& f : files) {
            ds.items.emplace_back(load_image(f), static_cast<int>(c));
        }
    }
    return ds;
}

void save_image_folder(const LabeledDataset& ds, const std::filesystem::path& root) {
    ds.validate();
    std::filesystem::create_directories(root);
    std::vector<int> counters(static_cast<std::size_t>(ds.n_classes()), 0);
    std::ofstream manifest(root / "manifest.csv");
    if (!manifest) throw std::runtime_error("save_image_folder: cannot write manifest");
    manifest << "path,label\n";
    for (const auto& [img, label] : ds.items) {
        const auto dir = root / ds.class_names[static_cast<std::size_t>(label)];
        std::filesystem::create_directories(dir);
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04d.png",
                      counters[static_cast<std::size_t>(label)]++);
        save_png(img, dir / name);
        manifest << ds.class_names[static_cast<std::size_t>(label)] << "/" << name << ","
                 << label << "\n";
    }
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[labels[i]].push_back(static_cast<int>(i));
    }
    for (const auto& [cls, idx] : by_class) {
        if (static_cast<int>(idx.size()) < k) {
            throw std::invalid_argument("kfold_split: class " + std::to_string(cls) + " has " +
                                        std::to_string(idx.size()) + " items, fewer than k=" +
                                        std::to_string(k));
        }
    }
    // Shuffle within each class, then deal round-robin; rotating the first
    // fold per class keeps fold sizes balanced when class sizes are not
    // multiples of k.
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    for (auto& [cls, idx] : by_class) {
        Rng rng(derive_seed(seed, "data/kfold", static_cast<std::uint64_t>(cls)));
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        for (std::size_t pos = 0; pos < idx.size(); ++pos) {
            const int f = static_cast<int>((pos + static_cast<std::size_t>(cls)) % k);
            folds[static_cast<std::size_t>(f)].push_back(idx[pos]);
        }
    }
    std::vector<std::pair<std::vector<int>, std::vector<int>>> splits;
    for (int f = 0; f < k; ++f) {
        std::vector<int> val = folds[static_cast<std::size_t>(f)];
        std::sort(val.begin(), val.end());
        std::vector<int> train;
        for (int g = 0; g < k; ++g) {
            if (g == f) continue;
            train.insert(train.end(), folds[static_cast<std::size_t>(g)].begin(),
                         folds[static_cast<std::size_t>(g)].end());
        }
        std::sort(train.begin(), train.end());
        splits.emplace_back(std::move(train), std::move(val));
    }
    return splits;
}

}  // namespace ctex
