// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

// lmtool: command-line front end. Exit status 0 on success, 2 for usage
// errors, 1 for everything the library rejects.

#include "lm/aggregate.hpp"
#include "lm/archive.hpp"
#include "lm/coalesce.hpp"
#include "lm/gradcheck.hpp"
#include "lm/image_io.hpp"
#include "lm/losses.hpp"
#include "lm/meshing.hpp"
#include "lm/occlusion.hpp"
#include "lm/predict.hpp"
#include "lm/psv.hpp"
#include "lm/render.hpp"
#include "lm/scenegen.hpp"
#include "lm/texture.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string numbered(const char *stem, int i, const char *ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, i, ext);
    return buf;
}

std::vector<lm::RigidPose> read_trajectory(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw lm::Error(lm::ErrorCode::IoError, "cannot open " + path.string());
    }
    std::vector<lm::RigidPose> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (v.empty()) continue;
        if (v.size() != 12 || !ss.eof()) {
            throw lm::Error(lm::ErrorCode::FormatError,
                            path.string() + ":" + std::to_string(lineno) + ": expected 12 numbers (3x4 row-major)");
        }
        lm::Mat3 r;
        lm::Vec3 t;
        for (int i = 0; i < 3; ++i) {
            r(i, 0) = v[4 * i];
            r(i, 1) = v[4 * i + 1];
            r(i, 2) = v[4 * i + 2];
            t(i) = v[4 * i + 3];
        }
        poses.emplace_back(r, t);
    }
    return poses;
}

lm::DepthLayerSet depths_of(const lm::TexturedScene &scene) {
    const auto &m = scene.meshes;
    lm::DepthLayerSet d(m.layer_count(), m.grid_height, m.grid_width, lm::DepthScheme::BI);
    for (int j = 0; j < m.layer_count(); ++j) {
        const auto &src = m.layers[static_cast<std::size_t>(j)].depths;
        std::copy(src.begin(), src.end(), d.depths.begin() + static_cast<std::ptrdiff_t>(d.index(j, 0, 0)));
    }
    return d;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Layered semitransparent mesh toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value file; command-line flags take precedence");
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

    // scenegen
    auto *sg = app.add_subcommand("scenegen", "Write a synthetic scene bundle");
    std::uint64_t sg_seed = 0;
    lm::SceneSpec spec;
    int sg_mpi = 0;
    std::string sg_out;
    sg->add_option("--seed", sg_seed, "Random seed");
    sg->add_option("--layers", spec.layers, "Ground-truth layers")->check(CLI::PositiveNumber);
    sg->add_option("--width", spec.width, "Image width");
    sg->add_option("--height", spec.height, "Image height");
    sg->add_option("--focal", spec.focal, "Focal length in pixels (0 = width)");
    sg->add_option("--baseline", spec.baseline, "Side camera offset");
    sg->add_option("--near", spec.depth_near, "Nearest scene depth");
    sg->add_option("--far", spec.depth_far, "Farthest scene depth");
    sg->add_option("--mpi-planes", sg_mpi, "Also write an MPI with this many planes");
    sg->add_option("--out", sg_out, "Bundle directory")->required();

    // psv
    auto *psv = app.add_subcommand("psv", "Dump the plane sweep volume of a bundle");
    std::string psv_bundle, psv_out;
    int psv_planes = 32;
    psv->add_option("--bundle", psv_bundle, "Scene bundle directory")->required();
    psv->add_option("--planes", psv_planes, "Plane count");
    psv->add_option("--out", psv_out, "Output directory")->required();

    // build
    auto *build = app.add_subcommand("build", "Build a layered mesh scene from a bundle");
    std::string b_bundle, b_out, b_scheme = "bi", b_geometry = "photo", b_coloring = "passthrough";
    int b_layers = 4, b_planes = 32;
    lm::PhotoConfig photo;
    double b_alpha_tau = 0.1;
    bool b_inverse = false;
    build->add_option("--bundle", b_bundle, "Scene bundle directory")->required();
    build->add_option("--scheme", b_scheme, "Depth scheme")->check(CLI::IsMember({"gc", "sa", "bi"}));
    build->add_option("--layers", b_layers, "Layer count")->check(CLI::PositiveNumber);
    build->add_option("--planes", b_planes, "Plane count");
    build->add_option("--geometry", b_geometry, "Geometry predictor")
        ->check(CLI::IsMember({"oracle", "photo", "constant"}));
    build->add_option("--coloring", b_coloring, "Colouring predictor")->check(CLI::IsMember({"oracle", "passthrough"}));
    build->add_option("--tau", photo.tau, "Matching-cost softmax temperature");
    build->add_option("--radius", photo.radius, "Matching-cost box radius");
    build->add_option("--alpha-tau", b_alpha_tau, "Passthrough opacity temperature");
    build->add_flag("--inverse-depth-average", b_inverse, "SA averages inverse depths");
    build->add_option("--out", b_out, "Output .lms directory")->required();

    // render
    auto *rd = app.add_subcommand("render", "Render a scene along a camera trajectory");
    std::string r_scene, r_traj, r_out;
    lm::RenderOptions ropts;
    rd->add_option("--scene", r_scene, "Scene .lms directory")->required();
    rd->add_option("--trajectory", r_traj, "One 3x4 pose per line")->required();
    rd->add_option("--tile", ropts.tile_size, "Tile size in pixels")->check(CLI::PositiveNumber);
    rd->add_option("--out", r_out, "Output directory")->required();

    // coalesce
    auto *co = app.add_subcommand("coalesce", "Merge an MPI into deformable layers");
    std::string c_mpi, c_out;
    lm::CoalesceConfig ccfg;
    co->add_option("--mpi", c_mpi, "MPI directory (mpi.json)")->required();
    co->add_option("--layers", ccfg.layers, "Merged layer count");
    co->add_option("--sigma", ccfg.sigma, "Ray jitter std in pixels");
    co->add_option("--samples", ccfg.samples, "Rays per texel");
    co->add_option("--seed", ccfg.seed, "Random seed");
    co->add_option("--eps-alpha", ccfg.eps_alpha, "Transmittance floor");
    co->add_flag("--center-rays", ccfg.through_camera_center, "Cast rays through the camera centre");
    co->add_option("--out", c_out, "Output .lms directory")->required();

    // occlusion
    auto *oc = app.add_subcommand("occlusion", "Occlusion mask from a backward flow pair");
    std::string o_rn, o_nr, o_out;
    double o_eps = 1.0;
    int o_crop = 16;
    oc->add_option("rn", o_rn, "Flow on reference pixels to novel positions (PFM)")->required();
    oc->add_option("nr", o_nr, "Flow on novel pixels to reference positions (PFM)")->required();
    oc->add_option("--epsilon", o_eps, "Residual threshold in pixels");
    oc->add_option("--crop", o_crop, "Central crop margin");
    oc->add_option("--out", o_out, "Mask PGM (255 = occluded)");

    // eval
    auto *ev = app.add_subcommand("eval", "PSNR and SSIM between two images");
    std::string e_a, e_b;
    int e_crop = 0;
    ev->add_option("a", e_a, "First image (PPM)")->required();
    ev->add_option("b", e_b, "Second image (PPM)")->required();
    ev->add_option("--crop", e_crop, "Central crop margin");

    // slice
    auto *sl = app.add_subcommand("slice", "Per-layer depth and opacity along one grid row");
    std::string s_scene, s_csv, s_svg;
    int s_row = 0;
    sl->add_option("--scene", s_scene, "Scene .lms directory")->required();
    sl->add_option("--row", s_row, "Grid row")->required();
    sl->add_option("--csv", s_csv, "CSV output (default stdout)");
    sl->add_option("--svg", s_svg, "SVG scatter output");

    // gradcheck
    auto *gc = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
    lm::GradcheckOptions gopts;
    gc->add_option("--configs", gopts.configs, "Configurations per suite")->check(CLI::PositiveNumber);
    gc->add_option("--seed", gopts.seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*sg) {
            const auto scene = lm::generate(sg_seed, spec);
            const auto views = lm::ground_truth_views(scene, threads);
            lm::write_bundle(sg_out, scene, views, sg_mpi);
            std::cout << "wrote " << sg_out << "\n";
        } else if (*psv) {
            const auto bundle = lm::read_bundle(psv_bundle);
            const auto planes = lm::place_planes(bundle.depth_near, bundle.depth_far, psv_planes);
            const auto vol = lm::build_psv(bundle.reference, bundle.side, bundle.rig, planes, threads);
            fs::create_directories(psv_out);
            std::ofstream manifest(fs::path(psv_out) / "psv.txt");
            manifest << "# plane depth slab valid\n";
            manifest.precision(17);
            for (std::size_t k = 0; k < vol.slabs.size(); ++k) {
                const auto slab = numbered("slab", static_cast<int>(k), "ppm");
                const auto valid = numbered("valid", static_cast<int>(k), "pgm");
                lm::io::write_ppm(fs::path(psv_out) / slab, vol.slabs[k]);
                lm::io::write_pgm(fs::path(psv_out) / valid, vol.valid[k]);
                manifest << k << ' ' << planes[k] << ' ' << slab << ' ' << valid << '\n';
            }
            lm::io::write_ppm(fs::path(psv_out) / "reference.ppm", vol.reference);
        } else if (*build) {
            const auto bundle = lm::read_bundle(b_bundle);
            const auto scheme = lm::parse_depth_scheme(b_scheme);
            const auto mode = b_inverse ? lm::SoftAverage::InverseDepth : lm::SoftAverage::Linear;
            const auto planes = lm::place_planes(bundle.depth_near, bundle.depth_far, b_planes);
            photo.threads = threads;
            const int h = bundle.rig.reference.height;
            const int w = bundle.rig.reference.width;
            lm::TexturedScene gt;
            const bool needs_gt = b_geometry == "oracle" || b_coloring == "oracle";
            if (needs_gt) {
                gt = lm::import_scene(bundle.gt_scene);
                if (gt.layer_count() != b_layers) {
                    throw lm::Error(lm::ErrorCode::InvalidConfig,
                                    "oracle predictors need --layers " + std::to_string(gt.layer_count()));
                }
            }
            lm::BetaVolume beta;
            switch (lm::parse_geometry_source(b_geometry)) {
            case lm::GeometrySource::Oracle: beta = lm::predict_geometry_oracle(depths_of(gt), planes, scheme, mode); break;
            case lm::GeometrySource::Constant: beta = lm::predict_geometry_constant(h, w, planes, scheme, b_layers); break;
            case lm::GeometrySource::Photo: {
                const auto vol = lm::build_psv(bundle.reference, bundle.side, bundle.rig, planes, threads);
                const auto pred = lm::predict_geometry_photoconsistency(vol, scheme, b_layers, photo);
                if (pred.all_invalid) {
                    std::cerr << "note: " << pred.all_invalid << " pixels had no valid samples\n";
                }
                beta = pred.beta;
                break;
            }
            }
            const auto depths = lm::aggregate(beta, planes, b_layers, mode);
            const auto meshes = lm::mesh_layers(depths, bundle.rig.reference);
            const auto side_layers = lm::unproject_side_onto_layers(bundle.side, bundle.rig, meshes, threads);
            const auto coloring = lm::parse_coloring_source(b_coloring) == lm::ColoringSource::Oracle
                                      ? lm::predict_coloring_oracle(gt.textures)
                                      : lm::predict_coloring_passthrough(bundle.reference, side_layers, b_alpha_tau);
            auto scene = lm::blend_textures(coloring, bundle.reference, side_layers, meshes);
            scene.depth_near = planes.nearest();
            scene.depth_far = planes.farthest();
            lm::export_scene(scene, b_out);
            const auto report = lm::zero_out_check(scene);
            for (std::size_t j = 0; j < report.mean_alpha.size(); ++j) {
                std::cout << "layer " << j << " mean_alpha=" << report.mean_alpha[j]
                          << (report.redundant[j] ? " redundant" : "") << "\n";
            }
            std::cout << "wrote " << b_out << "\n";
        } else if (*rd) {
            const auto scene = lm::import_scene(r_scene);
            const auto poses = read_trajectory(r_traj);
            ropts.threads = threads;
            fs::create_directories(r_out);
            const auto &k = scene.meshes.reference;
            for (std::size_t i = 0; i < poses.size(); ++i) {
                const auto out = lm::render(scene, lm::Camera{k, poses[i]}, k.height, k.width, ropts);
                lm::io::write_ppm(fs::path(r_out) / numbered("frame", static_cast<int>(i), "ppm"), out.color);
            }
            std::cout << "rendered " << poses.size() << " frames\n";
        } else if (*co) {
            ccfg.threads = threads;
            const auto mpi = lm::read_mpi(c_mpi);
            const auto result = lm::coalesce(mpi, ccfg);
            lm::export_scene(result.scene, c_out);
            std::cout << "degenerate_texels=" << result.degenerate_texels << "\n";
        } else if (*oc) {
            const auto rn = lm::read_flow_pfm(o_rn);
            const auto nr = lm::read_flow_pfm(o_nr);
            const auto mask = lm::occlusion_mask(rn, nr, o_eps, o_crop);
            if (!o_out.empty()) {
                lm::io::write_pgm(o_out, mask.mask);
            }
            std::printf("occluded_fraction=%.6f\n", mask.fraction());
        } else if (*ev) {
            auto a = lm::io::read_ppm(e_a);
            auto b = lm::io::read_ppm(e_b);
            if (e_crop > 0) {
                a = lm::central_crop(a, e_crop);
                b = lm::central_crop(b, e_crop);
            }
            std::printf("psnr=%.6f\nssim=%.6f\n", lm::psnr(a, b), lm::ssim(a, b));
        } else if (*sl) {
            const auto scene = lm::import_scene(s_scene);
            const auto rows = lm::slice(scene.meshes, scene.textures, s_row);
            if (s_csv.empty()) {
                lm::write_slice_csv(std::cout, rows);
            } else {
                std::ofstream out(s_csv);
                lm::write_slice_csv(out, rows);
            }
            if (!s_svg.empty()) {
                std::ofstream out(s_svg);
                lm::write_slice_svg(out, rows, scene.meshes.reference.width);
            }
        } else if (*gc) {
            bool ok = true;
            for (const auto &r : lm::run_gradcheck(gopts)) {
                std::printf("%-20s max_rel_error=%.3e tol=%.0e configs=%d probes=%d coverage_changed=%d %s\n",
                            r.name.c_str(), r.max_rel_error, r.tolerance, r.configs, r.probes, r.coverage_changed,
                            r.passed() ? "PASS" : "FAIL");
                ok = ok && r.passed();
            }
            return ok ? 0 : 1;
        }
    } catch (const lm::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
