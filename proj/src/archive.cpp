// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/archive.hpp"

#include "lm/image_io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace lm {
namespace {

using nlohmann::json;

std::vector<std::uint8_t> depth_bytes(const TexturedScene &scene) {
    const auto &m = scene.meshes;
    std::vector<std::uint8_t> out;
    out.reserve(m.layers.size() * m.vertex_count() * 4);
    for (const auto &layer : m.layers) {
        for (double d : layer.depths) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(d));
            for (int b = 0; b < 4; ++b) {
                out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> texture_bytes(const TexturedScene &scene) {
    std::vector<std::uint8_t> out;
    for (const auto &tex : scene.textures) {
        for (double v : tex.data()) {
            out.push_back(io::quantize_unit(v));
        }
    }
    return out;
}

std::string_view split_name(QuadSplit s) { return s == QuadSplit::MainDiagonal ? "main" : "anti"; }

json buffer_entry(std::string_view uri, std::string_view component, std::size_t count,
                  const std::vector<std::uint8_t> &bytes) {
    return json{{"uri", uri},
                {"component", component},
                {"count", count},
                {"byte_length", bytes.size()},
                {"sha256", sha256_hex(bytes)}};
}

std::string manifest_for(const TexturedScene &scene, const std::vector<std::uint8_t> &depths,
                         const std::vector<std::uint8_t> &textures) {
    const auto &m = scene.meshes;
    const auto &k = m.reference;
    const std::size_t layers = m.layers.size();
    json j;
    j["format"] = "lms";
    j["version"] = kArchiveVersion;
    j["layers"] = layers;
    j["grid"] = {{"height", m.grid_height}, {"width", m.grid_width}, {"split", split_name(m.split)}};
    j["texture"] = {{"height", k.height}, {"width", k.width}, {"alpha", "straight"}};
    j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width},
                       {"height", k.height}};
    j["depth_range"] = {{"near", scene.depth_near}, {"far", scene.depth_far}};
    j["buffers"] = {
        {"depths", buffer_entry("depths.bin", "float32", layers * m.vertex_count(), depths)},
        {"textures", buffer_entry("textures.bin", "uint8",
                                  layers * static_cast<std::size_t>(k.height) * k.width * 4, textures)}};
    return j.dump(2) + "\n";
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path &path, const void *data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(static_cast<const char *>(data), static_cast<std::streamsize>(size));
    if (!out) {
        throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
}

std::vector<std::uint8_t> load_buffer(const std::filesystem::path &dir, const json &desc, std::size_t expected) {
    const auto uri = desc.at("uri").get<std::string>();
    if (uri.find('/') != std::string::npos || uri.find('\\') != std::string::npos) {
        throw Error(ErrorCode::FormatError, "buffer uri must be a plain file name: " + uri);
    }
    auto bytes = read_bytes(dir / uri);
    if (desc.at("byte_length").get<std::size_t>() != expected || bytes.size() != expected) {
        throw Error(ErrorCode::FormatError, uri + ": expected " + std::to_string(expected) + " bytes, found " +
                                                std::to_string(bytes.size()));
    }
    if (sha256_hex(bytes) != desc.at("sha256").get<std::string>()) {
        throw Error(ErrorCode::FormatError, uri + ": sha256 does not match the manifest");
    }
    return bytes;
}

} // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::IoError, "SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t *>(bytes.data()), bytes.size()));
}

std::string manifest_json(const TexturedScene &scene) {
    scene.validate();
    return manifest_for(scene, depth_bytes(scene), texture_bytes(scene));
}

void export_scene(const TexturedScene &scene, const std::filesystem::path &dir) {
    scene.validate();
    const auto depths = depth_bytes(scene);
    const auto textures = texture_bytes(scene);
    const std::string manifest = manifest_for(scene, depths, textures);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    write_bytes(dir / "depths.bin", depths.data(), depths.size());
    write_bytes(dir / "textures.bin", textures.data(), textures.size());
    write_bytes(dir / "manifest.json", manifest.data(), manifest.size());
}

TexturedScene import_scene(const std::filesystem::path &dir) {
    const auto raw = read_bytes(dir / "manifest.json");
    json j;
    try {
        j = json::parse(raw.begin(), raw.end());
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, "manifest.json: " + std::string(e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != "lms" || j.at("version").get<int>() != kArchiveVersion) {
            throw Error(ErrorCode::FormatError, "unsupported archive format or version");
        }
        const int layers = j.at("layers").get<int>();
        const int gh = j.at("grid").at("height").get<int>();
        const int gw = j.at("grid").at("width").get<int>();
        const auto split = j.at("grid").at("split").get<std::string>();
        const auto &in = j.at("intrinsics");
        CameraIntrinsics k{in.at("fx").get<double>(), in.at("fy").get<double>(), in.at("cx").get<double>(),
                           in.at("cy").get<double>(),  in.at("width").get<int>(), in.at("height").get<int>()};
        if (j.at("texture").at("height").get<int>() != k.height || j.at("texture").at("width").get<int>() != k.width) {
            throw Error(ErrorCode::FormatError, "texture size differs from the intrinsics' sensor size");
        }
        if (layers < 1 || gh < 1 || gw < 1 || !k.is_valid() || (split != "main" && split != "anti")) {
            throw Error(ErrorCode::FormatError, "manifest describes an invalid scene");
        }
        const std::size_t grid = static_cast<std::size_t>(gh) * gw;
        const std::size_t texels = static_cast<std::size_t>(k.height) * k.width;
        const auto dbytes = load_buffer(dir, j.at("buffers").at("depths"), static_cast<std::size_t>(layers) * grid * 4);
        const auto tbytes =
            load_buffer(dir, j.at("buffers").at("textures"), static_cast<std::size_t>(layers) * texels * 4);

        DepthLayerSet depths(layers, gh, gw, DepthScheme::BI);
        for (std::size_t i = 0; i < depths.depths.size(); ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                bits |= static_cast<std::uint32_t>(dbytes[4 * i + b]) << (8 * b);
            }
            depths.depths[i] = static_cast<double>(std::bit_cast<float>(bits));
        }
        TexturedScene scene;
        scene.meshes = mesh_layers(depths, k, split == "main" ? QuadSplit::MainDiagonal : QuadSplit::AntiDiagonal);
        scene.depth_near = j.at("depth_range").at("near").get<double>();
        scene.depth_far = j.at("depth_range").at("far").get<double>();
        scene.textures.reserve(static_cast<std::size_t>(layers));
        for (int l = 0; l < layers; ++l) {
            Image tex(k.height, k.width, 4);
            const std::uint8_t *src = tbytes.data() + static_cast<std::size_t>(l) * texels * 4;
            for (std::size_t i = 0; i < texels * 4; ++i) {
                tex.data()[i] = src[i] / 255.0;
            }
            scene.textures.push_back(std::move(tex));
        }
        return scene;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, "manifest.json: " + std::string(e.what()));
    }
}

std::string manifest_hash(const TexturedScene &scene) { return sha256_hex(manifest_json(scene)); }

std::string manifest_hash(const std::filesystem::path &dir) {
    const auto bytes = read_bytes(dir / "manifest.json");
    return sha256_hex(bytes);
}

} // namespace lm
