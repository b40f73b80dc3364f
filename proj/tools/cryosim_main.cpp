#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cryosim/density.hpp"
#include "cryosim/digest.hpp"
#include "cryosim/error.hpp"
#include "cryosim/metrics.hpp"
#include "cryosim/mrc.hpp"
#include "cryosim/pipeline.hpp"
#include "cryosim/png_io.hpp"

namespace fs = std::filesystem;
using namespace cryosim;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "scene config (JSON)");
    if (needs_config) c->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--threads", opts.threads, "worker threads (scene-level)");
    cmd->add_flag("--verbose", opts.verbose, "progress notes on stderr");
}

SceneConfig load_config(const CommonOpts& opts, std::string* text_out = nullptr) {
    std::ifstream f(opts.config_path, std::ios::binary);
    if (!f) fail_config("cannot open config: " + opts.config_path);
    std::ostringstream ss;
    ss << f.rdbuf();
    std::string text = ss.str();
    SceneConfig cfg = parse_scene_config(text, fs::path(opts.config_path).parent_path(), true);
    if (opts.seed) cfg.seed = *opts.seed;
    if (text_out) *text_out = std::move(text);
    return cfg;
}

fs::path scene_dir(const CommonOpts& opts, int idx) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d", idx);
    return fs::path(opts.out_dir) / name;
}

void write_json_report(const std::string& path, const nlohmann::json& j) {
    if (path.empty()) {
        std::printf("%s\n", j.dump(2).c_str());
        return;
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot write report: " + path);
    f << j.dump(2) << '\n';
}

std::vector<ScoredPick> picks_from_star(const std::string& path) {
    std::vector<ScoredPick> out;
    for (const PickRecord& r : parse_pick_table_file(path))
        out.push_back({r.x, r.y, r.confidence});
    return out;
}

std::vector<std::array<double, 2>> gt_centers(const std::string& path, double pixel_size) {
    std::vector<std::array<double, 2>> out;
    if (fs::path(path).extension() == ".json") {
        Scene s = read_scene_file(path);
        double pix = pixel_size > 0 ? pixel_size : 1.0;
        for (const Placement& p : s.placements)
            out.push_back({(p.T.x + s.extents.x / 2.0) / pix, (p.T.y + s.extents.y / 2.0) / pix});
    } else {
        for (const PickRecord& r : parse_pick_table_file(path)) out.push_back({r.x, r.y});
    }
    return out;
}

int run_library_build(const CommonOpts& opts, bool export_obj) {
    SceneConfig cfg = load_config(opts);
    BuiltLibrary lib = build_library(cfg, 0);
    fs::path dir = fs::path(opts.out_dir) / "library";
    fs::create_directories(dir);
    for (const auto& [id, vol] : lib.volumes) {
        write_volume_file((dir / (id + ".mrc")).string(), vol);
        if (export_obj) {
            ScaleParams scale = derive_scale_params(lib.sizes.at(id),
                                                    static_cast<double>(vol.size()));
            TriangleMesh mesh = extract_isosurface(vol, 0.5 * vol.max_value(), scale);
            mesh = smooth_mesh(mesh, scale);
            write_obj(mesh, (dir / (id + ".obj")).string());
        }
        if (opts.verbose) std::fprintf(stderr, "library: %s done\n", id.c_str());
    }
    return 0;
}

int run_scene_place(const CommonOpts& opts) {
    SceneConfig cfg = load_config(opts);
    BuiltLibrary lib = build_library(cfg, 0);
    for (int i = 0; i < cfg.micrographs; ++i) {
        ContextMeshes ctx = build_context(cfg, static_cast<std::uint32_t>(i));
        BuiltLibrary scene_lib =
            cfg.conformer.enabled ? build_library(cfg, static_cast<std::uint32_t>(i)) : lib;
        Scene scene = build_scene(cfg, scene_lib, ctx, static_cast<std::uint32_t>(i));
        fs::create_directories(scene_dir(opts, i));
        write_scene_file((scene_dir(opts, i) / "scene.json").string(), scene);
    }
    return 0;
}

int run_volume_assemble(const CommonOpts& opts) {
    SceneConfig cfg = load_config(opts);
    for (int i = 0; i < cfg.micrographs; ++i) {
        BuiltLibrary lib = build_library(cfg, static_cast<std::uint32_t>(i));
        Scene scene = read_scene_file((scene_dir(opts, i) / "scene.json").string());
        IceSlab ice;
        bool have_ice = cfg.ice.enabled;
        if (have_ice) {
            IceParams ip;
            ip.mu_log = std::log(cfg.ice.mean_thickness_nm);
            ip.sigma_log = cfg.ice.sigma_log;
            ip.octaves = cfg.ice.octaves;
            ip.amplitude_nm = cfg.ice.amplitude_nm;
            ip.wavelength_px = cfg.ice.wavelength_px;
            ip.min_nm = cfg.ice.min_nm;
            ip.max_nm = cfg.ice.max_nm;
            ip.density = cfg.ice.density;
            ip.density_noise_frac = cfg.ice.density_noise_frac;
            ip.correlation_voxels = cfg.ice.correlation_voxels;
            ip.nz = std::max(1, static_cast<int>(std::lround(cfg.extents.z / cfg.pixel_size())));
            RandomStream rng(cfg.seed, rng_stage::ice, static_cast<std::uint32_t>(i));
            ice = generate_ice(cfg.image_nx(), cfg.image_ny(), cfg.pixel_size(), ip, rng);
        }
        DensityVolume pot = assemble_potential(scene, lib.volumes, have_ice ? &ice : nullptr,
                                               cfg.pixel_size(), cfg.ice.contrast);
        write_volume_file((scene_dir(opts, i) / "potential.mrc").string(), pot);
    }
    return 0;
}

int run_micrograph_project(const CommonOpts& opts) {
    SceneConfig cfg = load_config(opts);
    for (int i = 0; i < cfg.micrographs; ++i) {
        DensityVolume pot = read_volume_file((scene_dir(opts, i) / "potential.mrc").string());
        Micrograph m = project(pot, pot.origin.z,
                               pot.origin.z + (pot.nz - 1) * pot.voxel_size);
        write_micrograph_file((scene_dir(opts, i) / "micrograph_clean.mrc").string(), m);
    }
    return 0;
}

int run_ctf_apply(const CommonOpts& opts, bool png) {
    SceneConfig cfg = load_config(opts);
    CtfParams ctf{cfg.ctf.voltage_kv, cfg.ctf.defocus_A, cfg.ctf.cs_mm,
                  cfg.ctf.amplitude_contrast, cfg.ctf.b_factor, cfg.ctf.phase_shift};
    for (int i = 0; i < cfg.micrographs; ++i) {
        Micrograph m = read_micrograph_file((scene_dir(opts, i) / "micrograph_clean.mrc").string());
        Micrograph out = ctf_filter(m, ctf);
        write_micrograph_file((scene_dir(opts, i) / "micrograph_ctf.mrc").string(), out);
        if (png) write_png16((scene_dir(opts, i) / "micrograph_ctf.png").string(), out);
    }
    return 0;
}

int run_noise_apply(const CommonOpts& opts, bool png) {
    SceneConfig cfg = load_config(opts);
    NoiseSpec spec;
    if (cfg.noise.model == "poisson") spec.model = NoiseSpec::Model::poisson;
    else if (cfg.noise.model == "poisson_gaussian") spec.model = NoiseSpec::Model::poisson_gaussian;
    else spec.model = NoiseSpec::Model::gaussian;
    spec.target_snr = cfg.noise.snr;
    spec.dose = cfg.noise.dose;
    spec.sigma = cfg.noise.sigma;
    for (int i = 0; i < cfg.micrographs; ++i) {
        fs::path in = scene_dir(opts, i) / "micrograph_ctf.mrc";
        if (!fs::exists(in)) in = scene_dir(opts, i) / "micrograph_clean.mrc";
        Micrograph m = read_micrograph_file(in.string());
        RandomStream rng(cfg.seed, rng_stage::noise, static_cast<std::uint32_t>(i));
        Micrograph out = apply_noise(m, spec, rng);
        write_micrograph_file((scene_dir(opts, i) / "micrograph_noisy.mrc").string(), out);
        if (png) write_png16((scene_dir(opts, i) / "micrograph_noisy.png").string(), out);
    }
    return 0;
}

int run_mask_render(const CommonOpts& opts) {
    SceneConfig cfg = load_config(opts);
    for (int i = 0; i < cfg.micrographs; ++i) {
        Scene scene = read_scene_file((scene_dir(opts, i) / "scene.json").string());
        Micrograph mask = render_mask(scene, cfg.image_nx(), cfg.image_ny(), cfg.pixel_size());
        write_micrograph_file((scene_dir(opts, i) / "mask.mrc").string(), mask);
    }
    return 0;
}

int run_pipeline_cmd(const CommonOpts& opts) {
    std::string text;
    SceneConfig cfg = load_config(opts, &text);
    RunManifest manifest = run_pipeline(cfg, opts.out_dir, opts.threads, opts.verbose, text);
    std::printf("wrote %zu outputs under %s (manifest.json has the digests)\n",
                manifest.outputs.size(), opts.out_dir.c_str());
    return 0;
}

int run_metrics_fsc(const std::string& a_path, const std::string& b_path, double threshold,
                    const std::string& report, const std::string& csv) {
    DensityVolume a = read_volume_file(a_path);
    DensityVolume b = read_volume_file(b_path);
    FscCurve curve = fsc(a, b);
    ResolutionResult res = resolution_at(curve, threshold);
    ResolutionResult res143 = resolution_at(curve, 0.143);

    nlohmann::json j;
    j["threshold"] = threshold;
    j["resolution_shell"] = res.frequency;
    j["crossed"] = res.crossed;
    j["resolution_shell_0143"] = res143.frequency;
    j["crossed_0143"] = res143.crossed;
    if (a.voxel_size > 0 && res.frequency > 0) {
        // shell r corresponds to r / (n * voxel) cycles per Angstrom
        double cycles = res.frequency / (a.nx * a.voxel_size);
        j["resolution_A"] = cycles > 0 ? 1.0 / cycles : 0.0;
    }
    j["shells"] = nlohmann::json::array();
    for (const FscShell& s : curve.shells)
        j["shells"].push_back({{"shell", s.frequency},
                               {"fsc", s.correlation},
                               {"count", s.count},
                               {"zero_energy", s.zero_energy}});
    write_json_report(report, j);

    if (!csv.empty()) {
        std::ofstream f(csv, std::ios::trunc);
        if (!f) fail_data("cannot write CSV: " + csv);
        f << "shell,fsc,count\n";
        for (const FscShell& s : curve.shells)
            f << s.frequency << ',' << s.correlation << ',' << s.count << '\n';
    }
    return 0;
}

int run_metrics_pr(const std::string& picks_path, const std::string& gt_path, double d_match,
                   int n_levels, double pixel_size, const std::string& report,
                   const std::string& csv) {
    auto picks = picks_from_star(picks_path);
    auto gt = gt_centers(gt_path, pixel_size);
    if (!(d_match > 0)) {
        // default: particle radius in pixels from a scene-manifest ground truth
        if (fs::path(gt_path).extension() == ".json") {
            Scene s = read_scene_file(gt_path);
            double pix = pixel_size > 0 ? pixel_size : 1.0;
            double r = 0;
            for (const Placement& p : s.placements) r = std::max(r, p.radius);
            d_match = r / pix;
        }
        if (!(d_match > 0)) fail_config("--d-match is required for STAR ground truth");
    }

    MatchResult match = match_picks(picks, gt, d_match);
    PrCurve exact = pr_curve(match, 0);
    PrCurve table = pr_curve(match, n_levels > 0 ? n_levels : 100);
    double area = auprc(exact);

    nlohmann::json j;
    j["d_match_px"] = d_match;
    j["n_picks"] = picks.size();
    j["n_gt"] = gt.size();
    j["fn"] = match.fn;
    j["auprc"] = area;
    j["precision_at_0.5"] = precision_at(match, 0.5);
    j["levels"] = nlohmann::json::array();
    for (const PrLevel& lv : table.levels)
        j["levels"].push_back({{"threshold", lv.threshold},
                               {"precision", lv.precision},
                               {"recall", lv.recall},
                               {"tp", lv.tp},
                               {"fp", lv.fp},
                               {"fn", lv.fn}});
    write_json_report(report, j);

    if (!csv.empty()) {
        std::ofstream f(csv, std::ios::trunc);
        if (!f) fail_data("cannot write CSV: " + csv);
        f << "threshold,precision,recall,tp,fp,fn\n";
        for (const PrLevel& lv : table.levels)
            f << lv.threshold << ',' << lv.precision << ',' << lv.recall << ',' << lv.tp
              << ',' << lv.fp << ',' << lv.fn << '\n';
    }
    return 0;
}

PoseBatch pose_batch_from_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_data("cannot open pose file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_data(std::string("bad pose file: ") + e.what());
    }
    PoseBatch batch;
    try {
        for (const auto& p : j.at("pairs")) {
            PosePair pair;
            for (int i = 0; i < 9; ++i) {
                pair.r_gt[i] = p.at("r_gt")[i].get<double>();
                pair.r_pred[i] = p.at("r_pred")[i].get<double>();
            }
            for (int i = 0; i < 2; ++i) {
                pair.t_gt[i] = p.at("t_gt")[i].get<double>();
                pair.t_pred[i] = p.at("t_pred")[i].get<double>();
            }
            batch.pairs.push_back(pair);
        }
    } catch (const nlohmann::json::exception& e) {
        fail_data(std::string("bad pose file: ") + e.what());
    }
    batch.validate();
    return batch;
}

int run_metrics_pose(const std::string& path, const std::string& report) {
    PoseBatch batch = pose_batch_from_json(path);
    nlohmann::json j;
    j["pairs"] = batch.pairs.size();
    j["pose_loss"] = pose_loss(batch);
    j["rot_error_radians"] = angular_error_radians(batch);
    j["rot_error_scaled"] = angular_error_paper(batch); // printed 180/pi prefactor
    write_json_report(report, j);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cryosim: deterministic cryo-EM micrograph synthesis and evaluation"};
    app.require_subcommand(1);
    // every group needs one of its stage verbs
    auto group = [](CLI::App* g) { g->require_subcommand(1); return g; };

    CommonOpts opts;
    bool export_obj = false, png = false;

    auto* library = group(app.add_subcommand("library", "structure library stages"));
    auto* lib_build = library->add_subcommand("build", "parse, voxelize and smooth structures");
    add_common(lib_build, opts);
    lib_build->add_flag("--export-obj", export_obj, "also write isosurface OBJ meshes");

    auto* scene = group(app.add_subcommand("scene", "scene stages"));
    auto* scene_place = scene->add_subcommand("place", "place particles, write scene.json");
    add_common(scene_place, opts);

    auto* volume = group(app.add_subcommand("volume", "volume stages"));
    auto* vol_assemble = volume->add_subcommand("assemble", "assemble the scene potential");
    add_common(vol_assemble, opts);

    auto* micro = group(app.add_subcommand("micrograph", "micrograph stages"));
    auto* micro_project = micro->add_subcommand("project", "project the potential");
    add_common(micro_project, opts);

    auto* ctf = group(app.add_subcommand("ctf", "contrast transfer stages"));
    auto* ctf_apply = ctf->add_subcommand("apply", "filter micrographs with the CTF");
    add_common(ctf_apply, opts);
    ctf_apply->add_flag("--png", png, "write 16-bit PNG previews");

    auto* noise = group(app.add_subcommand("noise", "noise stages"));
    auto* noise_apply = noise->add_subcommand("apply", "apply the configured noise baseline");
    add_common(noise_apply, opts);
    noise_apply->add_flag("--png", png, "write 16-bit PNG previews");

    auto* mask = group(app.add_subcommand("mask", "annotation stages"));
    auto* mask_render = mask->add_subcommand("render", "render binary occupancy masks");
    add_common(mask_render, opts);

    auto* pipeline = group(app.add_subcommand("pipeline", "end-to-end runs"));
    auto* pipe_run = pipeline->add_subcommand("run", "run every stage and write a manifest");
    add_common(pipe_run, opts);

    auto* metrics = group(app.add_subcommand("metrics", "evaluation metrics"));
    std::string m_a, m_b, m_report, m_csv, m_picks, m_gt, m_pose;
    double m_threshold = 0.5, m_dmatch = 0, m_pixel = 0;
    int m_levels = 100;
    auto* mfsc = metrics->add_subcommand("fsc", "Fourier shell correlation of two volumes");
    mfsc->add_option("--a", m_a, "first volume (MRC)")->required();
    mfsc->add_option("--b", m_b, "second volume (MRC)")->required();
    mfsc->add_option("--threshold", m_threshold, "resolution threshold (default 0.5)");
    mfsc->add_option("--report", m_report, "JSON report path (default: stdout)");
    mfsc->add_option("--csv", m_csv, "also write shell CSV");
    auto* mpr = metrics->add_subcommand("pr", "precision/recall against ground truth");
    mpr->add_option("--picks", m_picks, "scored picks (STAR)")->required();
    mpr->add_option("--gt", m_gt, "ground truth (STAR or scene.json)")->required();
    mpr->add_option("--d-match", m_dmatch, "match radius in pixels");
    mpr->add_option("--n-levels", m_levels, "threshold levels for the report table");
    mpr->add_option("--pixel-size", m_pixel, "pixel size in Angstrom for scene.json ground truth");
    mpr->add_option("--report", m_report, "JSON report path (default: stdout)");
    mpr->add_option("--csv", m_csv, "also write PR CSV");
    auto* mpose = metrics->add_subcommand("pose", "pose loss and angular error");
    mpose->add_option("--pairs", m_pose, "pose pairs (JSON)")->required();
    mpose->add_option("--report", m_report, "JSON report path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (lib_build->parsed()) return run_library_build(opts, export_obj);
        if (scene_place->parsed()) return run_scene_place(opts);
        if (vol_assemble->parsed()) return run_volume_assemble(opts);
        if (micro_project->parsed()) return run_micrograph_project(opts);
        if (ctf_apply->parsed()) return run_ctf_apply(opts, png);
        if (noise_apply->parsed()) return run_noise_apply(opts, png);
        if (mask_render->parsed()) return run_mask_render(opts);
        if (pipe_run->parsed()) return run_pipeline_cmd(opts);
        if (mfsc->parsed()) return run_metrics_fsc(m_a, m_b, m_threshold, m_report, m_csv);
        if (mpr->parsed())
            return run_metrics_pr(m_picks, m_gt, m_dmatch, m_levels, m_pixel, m_report, m_csv);
        if (mpose->parsed()) return run_metrics_pose(m_pose, m_report);
        std::fprintf(stderr, "no stage selected; see --help\n");
        return 2;
    } catch (const error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.code()) {
        case errc::config: return 2;
        case errc::data: return 3;
        case errc::internal: return 4;
        }
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    }
}
