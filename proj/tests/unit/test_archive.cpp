// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/archive.hpp"
#include "lm/meshing.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace lm;
namespace fs = std::filesystem;

namespace {

// Kept in sync with tests/oracles/lms_manifest.py, which produced the hashes below.
constexpr const char *kDepthsSha = "04cbce69c5a7e4cd335422479c331f683a74ed791ec69c3f53fc4deaaff88855";
constexpr const char *kTexturesSha = "5cb461788f82ec157faad9f06f802944eaa51d578522ba3db29e941092151548";
constexpr const char *kManifestSha = "a6cc9e7199359a604f112b4f7a534243d2b8a3ab3871a8b82ee4d02d9626525b";

TexturedScene golden_scene() {
    CameraIntrinsics k{4.0, 4.0, 1.0, 0.5, 3, 2};
    DepthLayerSet d(2, 2, 3, DepthScheme::BI);
    for (int i = 0; i < 6; ++i) {
        d.depths[i] = 1.5 + 0.5 * i;
        d.depths[6 + i] = 5.0 + 0.5 * i;
    }
    TexturedScene s;
    s.meshes = mesh_layers(d, k);
    s.depth_near = 1.0;
    s.depth_far = 8.0;
    for (int l = 0; l < 2; ++l) {
        Image t(2, 3, 4);
        for (int i = 0; i < 6; ++i) {
            for (int c = 0; c < 4; ++c) t.data()[i * 4 + c] = ((l * 97 + i * 31 + c * 13) % 256) / 255.0;
        }
        s.textures.push_back(t);
    }
    return s;
}

fs::path fresh_dir(const std::string &name) {
    const auto p = fs::temp_directory_path() / "lm_unit" / name;
    fs::remove_all(p);
    return p;
}

std::string file_bytes(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void expect_format_error(const fs::path &dir) {
    try {
        import_scene(dir);
        FAIL() << "import succeeded";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::FormatError) << e.what();
    }
}

} // namespace

TEST(Sha256, KnownDigests) {
    EXPECT_EQ(sha256_hex(std::string_view("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex(std::string_view("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Archive, GoldenHashes) {
    const auto s = golden_scene();
    const auto dir = fresh_dir("golden");
    export_scene(s, dir);
    EXPECT_EQ(sha256_hex(file_bytes(dir / "depths.bin")), kDepthsSha);
    EXPECT_EQ(sha256_hex(file_bytes(dir / "textures.bin")), kTexturesSha);
    EXPECT_EQ(manifest_hash(s), kManifestSha);
    EXPECT_EQ(manifest_hash(dir), kManifestSha);
    EXPECT_EQ(file_bytes(dir / "manifest.json"), manifest_json(s));
}

TEST(Archive, RoundTripIsByteIdentical) {
    const auto s = golden_scene();
    const auto a = fresh_dir("rt_a"), b = fresh_dir("rt_b");
    export_scene(s, a);
    const auto back = import_scene(a);
    export_scene(back, b);
    for (const char *f : {"manifest.json", "depths.bin", "textures.bin"}) {
        EXPECT_EQ(file_bytes(a / f), file_bytes(b / f)) << f;
    }
    ASSERT_EQ(back.layer_count(), 2);
    for (int l = 0; l < 2; ++l) {
        for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_EQ(static_cast<float>(back.meshes.layers[l].depths[i]),
                      static_cast<float>(s.meshes.layers[l].depths[i]));
        }
        EXPECT_EQ(back.textures[l].data(), s.textures[l].data());
    }
    EXPECT_EQ(back.meshes.reference.fx, 4.0);
    EXPECT_EQ(back.depth_far, 8.0);
}

TEST(Archive, ArbitraryDepthsSurviveAsFloat32) {
    auto s = golden_scene();
    s.meshes.layers[0].depths[2] = 2.123456789012345;
    s.meshes.layers[1].depths[4] = 7.000000123;
    const auto a = fresh_dir("f32");
    export_scene(s, a);
    const auto back = import_scene(a);
    EXPECT_EQ(back.meshes.layers[0].depths[2], static_cast<double>(static_cast<float>(2.123456789012345)));
    EXPECT_EQ(back.meshes.layers[1].depths[4], static_cast<double>(static_cast<float>(7.000000123)));
}

TEST(Archive, EmptySceneIsRejected) {
    auto s = golden_scene();
    s.meshes.layers.clear();
    s.textures.clear();
    try {
        export_scene(s, fresh_dir("empty"));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidScene);
    }
}

TEST(Archive, TruncatedBufferIsFormatError) {
    const auto dir = fresh_dir("trunc");
    export_scene(golden_scene(), dir);
    fs::resize_file(dir / "depths.bin", 20);
    expect_format_error(dir);
}

TEST(Archive, CorruptedBufferIsFormatError) {
    const auto dir = fresh_dir("corrupt");
    export_scene(golden_scene(), dir);
    auto bytes = file_bytes(dir / "textures.bin");
    bytes[5] ^= 0x01;
    std::ofstream(dir / "textures.bin", std::ios::binary) << bytes;
    expect_format_error(dir);
}

TEST(Archive, BadManifestIsFormatError) {
    const auto dir = fresh_dir("badmanifest");
    export_scene(golden_scene(), dir);
    std::ofstream(dir / "manifest.json") << "{\"format\": \"lms\"";
    expect_format_error(dir);
    std::ofstream(dir / "manifest.json") << "{\"format\": \"lms\", \"version\": 99}";
    expect_format_error(dir);
}

TEST(Archive, MissingDirectoryIsIoError) {
    try {
        import_scene(fresh_dir("absent"));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}
