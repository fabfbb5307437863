#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace ctex {

// Dense H x W x C image with unit-interval intensities, stored row-major
// with interleaved channels: data[(y * width + x) * channels + c].
// Intensities are kept in 64-bit floats so that pixel-wise map iteration is
// exactly composable.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    Eigen::ArrayXd data;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c) {
        if (h <= 0 || w <= 0 || c <= 0) {
            throw std::invalid_argument("Image: dimensions must be positive");
        }
        data = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(h) * w * c);
    }

    static Image constant(int h, int w, int c, double value) {
        Image img(h, w, c);
        img.data.setConstant(value);
        return img;
    }

    Eigen::Index size() const { return data.size(); }

    double& at(int y, int x, int c) {
        return data[(static_cast<Eigen::Index>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<Eigen::Index>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }

    // Throws when the pixel buffer has the wrong length or any intensity
    // leaves [0,1].
    void validate() const {
        if (data.size() != static_cast<Eigen::Index>(height) * width * channels) {
            throw std::invalid_argument("Image: data length " + std::to_string(data.size()) +
                                        " does not match dimensions");
        }
        if (data.size() > 0 && (data.minCoeff() < 0.0 || data.maxCoeff() > 1.0)) {
            throw std::invalid_argument("Image: intensity outside [0,1]");
        }
    }
};

}  // namespace ctex
