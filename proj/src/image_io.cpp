#include "ctex/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ctex {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

Image from_bytes(const std::vector<std::uint8_t>& buf, int h, int w, int c) {
    Image img(h, w, c);
    for (Eigen::Index i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]) / 255.0;
    }
    return img;
}

}  // namespace

Image load_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        fail(path, std::string("cannot read PNG (") + png.message + ")");
    }
    const bool color = (PNG_IMAGE_PIXEL_CHANNELS(png.format) >= 3);
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        fail(path, std::string("PNG decode failed (") + png.message + ")");
    }
    return from_bytes(buf, static_cast<int>(png.height), static_cast<int>(png.width), channels);
}

void save_png(const Image& img, const std::filesystem::path& path) {
    img.validate();
    if (img.channels != 1 && img.channels != 3) {
        fail(path, "PNG writer supports 1 or 3 channels, got " + std::to_string(img.channels));
    }
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.data.size()));
    for (Eigen::Index i = 0; i < img.data.size(); ++i) {
        buf[static_cast<std::size_t>(i)] = quantize_u8(img.data[i]);
    }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = (img.channels == 3) ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
        fail(path, std::string("PNG encode failed (") + png.message + ")");
    }
}

namespace {

// Reads one PPM header token, skipping whitespace and '#' comments.
std::string ppm_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok;
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    if (ppm_token(in) != "P6") fail(path, "not a binary PPM (P6) file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ppm_token(in));
        h = std::stoi(ppm_token(in));
        maxval = std::stoi(ppm_token(in));
    } catch (const std::exception&) {
        fail(path, "malformed PPM header");
    }
    if (w <= 0 || h <= 0) fail(path, "bad PPM dimensions");
    if (maxval != 255) fail(path, "unsupported PPM maxval " + std::to_string(maxval));
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) fail(path, "truncated PPM data");
    return from_bytes(buf, h, w, 3);
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
    img.validate();
    if (img.channels != 1 && img.channels != 3) {
        fail(path, "PPM writer supports 1 or 3 channels, got " + std::to_string(img.channels));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open file for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int src = (img.channels == 3) ? c : 0;
                row[static_cast<std::size_t>(x) * 3 + c] = quantize_u8(img.at(y, x, src));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) fail(path, "write failed");
}

Image load_image(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return load_png(path);
    if (ext == ".ppm") return load_ppm(path);
    fail(path, "unsupported image extension '" + ext + "' (expected .png or .ppm)");
}

void save_image(const Image& img, const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return save_png(img, path);
    if (ext == ".ppm") return save_ppm(img, path);
    fail(path, "unsupported image extension '" + ext + "' (expected .png or .ppm)");
}

}  // namespace ctex
