// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/image_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lm::io {
namespace {

std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    return os;
}

std::ifstream open_in(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    return is;
}

// Reads a whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream &is) {
    std::string tok;
    char ch = 0;
    while (is.get(ch)) {
        if (ch == '#') {
            std::string dummy;
            std::getline(is, dummy);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

int header_int(std::istream &is, const std::filesystem::path &path) {
    const std::string tok = header_token(is);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) {
            throw std::invalid_argument(tok);
        }
        return v;
    } catch (const std::exception &) {
        throw Error(ErrorCode::FormatError, path.string() + ": bad header field '" + tok + "'");
    }
}

Image read_netpbm(const std::filesystem::path &path, const char *magic, int channels) {
    auto is = open_in(path);
    if (header_token(is) != magic) {
        throw Error(ErrorCode::FormatError, path.string() + ": expected " + magic);
    }
    const int w = header_int(is, path);
    const int h = header_int(is, path);
    const int maxval = header_int(is, path);
    if (maxval != 255) {
        throw Error(ErrorCode::FormatError, path.string() + ": only maxval 255 is supported");
    }
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * channels);
    is.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw Error(ErrorCode::FormatError, path.string() + ": truncated pixel data");
    }
    Image img(h, w, channels);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.data()[i] = bytes[i] / 255.0;
    }
    return img;
}

} // namespace

std::uint8_t quantize_unit(double v) noexcept {
    if (!(v > 0.0)) {
        return 0;
    }
    if (v >= 1.0) {
        return 255;
    }
    return static_cast<std::uint8_t>(std::nearbyint(v * 255.0));
}

void write_ppm(const std::filesystem::path &path, const Image &rgb) {
    if (rgb.channels() != 3) {
        throw Error(ErrorCode::ShapeMismatch, "PPM output needs 3 channels");
    }
    auto os = open_out(path);
    os << "P6\n" << rgb.width() << " " << rgb.height() << "\n255\n";
    std::vector<unsigned char> bytes(rgb.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = quantize_unit(rgb.data()[i]);
    }
    os.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw Error(ErrorCode::IoError, "write failed: " + path.string());
    }
}

Image read_ppm(const std::filesystem::path &path) { return read_netpbm(path, "P6", 3); }

void write_pgm(const std::filesystem::path &path, const Mask &mask) {
    Image gray(mask.height, mask.width, 1);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        gray.data()[i] = mask.values[i] ? 1.0 : 0.0;
    }
    write_pgm(path, gray);
}

void write_pgm(const std::filesystem::path &path, const Image &gray) {
    if (gray.channels() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "PGM output needs 1 channel");
    }
    auto os = open_out(path);
    os << "P5\n" << gray.width() << " " << gray.height() << "\n255\n";
    std::vector<unsigned char> bytes(gray.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = quantize_unit(gray.data()[i]);
    }
    os.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw Error(ErrorCode::IoError, "write failed: " + path.string());
    }
}

Image read_pgm(const std::filesystem::path &path) { return read_netpbm(path, "P5", 1); }

void write_pfm(const std::filesystem::path &path, const Image &img) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw Error(ErrorCode::ShapeMismatch, "PFM stores 1 or 3 channels");
    }
    auto os = open_out(path);
    os << (img.channels() == 3 ? "PF" : "Pf") << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
    const std::size_t row = static_cast<std::size_t>(img.width()) * img.channels();
    std::vector<unsigned char> bytes(row * 4);
    for (int y = img.height() - 1; y >= 0; --y) {
        const double *src = img.data().data() + img.index(y, 0);
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(src[i]));
            for (int b = 0; b < 4; ++b) {
                bytes[i * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
            }
        }
        os.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    if (!os) {
        throw Error(ErrorCode::IoError, "write failed: " + path.string());
    }
}

Image read_pfm(const std::filesystem::path &path) {
    auto is = open_in(path);
    const std::string magic = header_token(is);
    int channels = 0;
    if (magic == "PF") {
        channels = 3;
    } else if (magic == "Pf") {
        channels = 1;
    } else {
        throw Error(ErrorCode::FormatError, path.string() + ": not a PFM file");
    }
    const int w = header_int(is, path);
    const int h = header_int(is, path);
    const std::string scale_tok = header_token(is);
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception &) {
        throw Error(ErrorCode::FormatError, path.string() + ": bad scale '" + scale_tok + "'");
    }
    const bool little = scale < 0.0;
    Image img(h, w, channels);
    const std::size_t row = static_cast<std::size_t>(w) * channels;
    std::vector<unsigned char> bytes(row * 4);
    for (int y = h - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
            throw Error(ErrorCode::FormatError, path.string() + ": truncated pixel data");
        }
        double *dst = img.data().data() + img.index(y, 0);
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                const int shift = little ? 8 * b : 8 * (3 - b);
                bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << shift;
            }
            dst[i] = std::bit_cast<float>(bits);
        }
    }
    return img;
}

} // namespace lm::io
