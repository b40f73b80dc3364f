#include "cryosim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cryosim/density.hpp"
#include "cryosim/digest.hpp"
#include "cryosim/error.hpp"
#include "cryosim/mrc.hpp"
#include "cryosim/png_io.hpp"

namespace cryosim {

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["tool"] = tool;
    j["version"] = version;
    j["digest_algorithm"] = digest_algorithm;
    j["config_sha256"] = config_sha256;
    j["seed"] = seed;
    j["outputs"] = nlohmann::json::array();
    for (const OutputRecord& o : outputs)
        j["outputs"].push_back({{"path", o.path}, {"sha256", o.sha256}});
    j["stages"] = nlohmann::json::array();
    for (const StageTime& s : stages)
        j["stages"].push_back({{"name", s.name}, {"seconds", s.seconds}});
    return j.dump(2);
}

BuiltLibrary build_library(const SceneConfig& cfg, std::uint32_t scene_index) {
    BuiltLibrary lib;
    for (std::size_t si = 0; si < cfg.structures.size(); ++si) {
        const StructureEntry& entry = cfg.structures[si];
        if (lib.volumes.count(entry.id)) continue;
        AtomicModel model = parse_atomic_model_file(entry.path, entry.id);
        if (cfg.conformer.enabled) {
            ConformerParams cp;
            cp.amp_static = cfg.conformer.amp_static;
            cp.amp_constrained = cfg.conformer.amp_constrained;
            cp.amp_enhanced = cfg.conformer.amp_enhanced;
            cp.amp_flexible = cfg.conformer.amp_flexible;
            cp.domains = cfg.conformer.domains;
            RandomStream rng(cfg.seed, rng_stage::conformer, scene_index,
                             static_cast<std::uint32_t>(si));
            model = perturb_conformer(model, cp, rng);
        }
        DensityVolume vol = voxelize(model, cfg.resolution);
        vol = smooth_and_threshold(vol, cfg.resolution);
        Box3 bb = model.bounding_box();
        lib.volumes.emplace(entry.id, std::move(vol));
        lib.radii[entry.id] = model.bounding_radius() + model.r_max;
        lib.sizes[entry.id] = bb.size().norm();
    }
    return lib;
}

ContextMeshes build_context(const SceneConfig& cfg, std::uint32_t scene_index) {
    ContextMeshes out;
    if (!cfg.context) return out;
    DensityVolume labels = read_volume_file(cfg.context->labels_path);
    RandomStream rng(cfg.seed, rng_stage::context, scene_index);
    std::vector<int> ids;
    out.meshes = embed_context(labels, cfg.context->perturb_amplitude, rng, &ids);
    for (int id : ids) out.labels.push_back(std::to_string(id));
    return out;
}

namespace {

const TriangleMesh* find_context_mesh(const ContextMeshes& ctx, const std::string& label,
                                      const char* what) {
    for (std::size_t i = 0; i < ctx.labels.size(); ++i)
        if (ctx.labels[i] == label) return &ctx.meshes[i];
    fail_data(std::string(what) + ": context label '" + label + "' not found");
}

} // namespace

Scene build_scene(const SceneConfig& cfg, const BuiltLibrary& lib,
                  const ContextMeshes& context, std::uint32_t scene_index) {
    Scene scene;
    scene.extents = cfg.extents;
    scene.seed = cfg.seed;
    scene.scene_index = scene_index;
    scene.context_meshes = context.meshes;
    scene.context_labels = context.labels;

    double volume_voxels = static_cast<double>(cfg.image_nx()) * cfg.image_ny() *
                           std::max(1.0, std::lround(cfg.extents.z / cfg.pixel_size()) * 1.0);

    // scene-level scale comes from the largest structure
    double max_size = 1.0;
    for (const auto& [id, size] : lib.sizes) max_size = std::max(max_size, size);
    scene.scale = derive_scale_params(max_size, volume_voxels);

    PlaceStrategy strategy;
    if (cfg.placement.strategy == "uniform") strategy.kind = PlaceStrategy::Kind::uniform;
    else if (cfg.placement.strategy == "cluster") strategy.kind = PlaceStrategy::Kind::cluster;
    else if (cfg.placement.strategy == "grid") strategy.kind = PlaceStrategy::Kind::grid;
    else strategy.kind = PlaceStrategy::Kind::interface;
    if (strategy.kind == PlaceStrategy::Kind::interface) {
        strategy.surface = find_context_mesh(context, cfg.placement.interface_label,
                                             "placement interface");
        strategy.tolerance = cfg.placement.interface_tolerance;
    }

    OrientationParams orient;
    if (cfg.orientation.mode == "uniform") orient.mode = OrientationParams::Mode::uniform;
    else if (cfg.orientation.mode == "preferred") orient.mode = OrientationParams::Mode::preferred;
    else orient.mode = OrientationParams::Mode::limited_tilt;
    orient.mu = cfg.orientation.mu;
    orient.kappa = cfg.orientation.kappa;
    orient.theta_max = cfg.orientation.theta_max;

    for (std::size_t si = 0; si < cfg.structures.size(); ++si) {
        const StructureEntry& entry = cfg.structures[si];
        double radius = lib.radii.at(entry.id);
        ScaleParams scale = derive_scale_params(lib.sizes.at(entry.id), volume_voxels);

        ClassRule rule;
        if (entry.class_rule == "cluster") {
            rule.kind = ClassRule::Kind::cluster;
            rule.cluster_spacing = entry.cluster_spacing;
        } else if (entry.class_rule == "separated") {
            rule.kind = ClassRule::Kind::separated;
            rule.min_separation = entry.min_separation;
        } else if (entry.class_rule == "confined") {
            rule.kind = ClassRule::Kind::confined;
            rule.confinement = find_context_mesh(context, entry.confinement_label,
                                                 "confined class");
        }

        RandomStream place_rng(cfg.seed, rng_stage::placement, scene_index,
                               static_cast<std::uint32_t>(si));
        std::vector<Placement> synthetic =
            place_particles(entry.count, radius, strategy, rule, scale, cfg.extents,
                            place_rng, scene.placements);

        RandomStream orient_rng(cfg.seed, rng_stage::orientation, scene_index,
                                static_cast<std::uint32_t>(si));
        for (Placement& p : synthetic) {
            p.structure_id = entry.id;
            p.q = sample_orientation(orient, orient_rng);
            p.class_rule = entry.class_rule;
            p.confidence = entry.confidence_weight;
        }

        std::vector<Placement> final_placements;
        if (!entry.picks_path.empty()) {
            auto picks = parse_pick_table_file(entry.picks_path);
            Vec3 pick_origin{-cfg.extents.x / 2.0, -cfg.extents.y / 2.0, 0.0};
            std::vector<Placement> experimental = import_experimental_poses(
                picks, cfg.pixel_size(), pick_origin, 0.0, entry.id, radius);
            for (Placement& p : experimental) p.class_rule = entry.class_rule;
            RandomStream blend_rng(cfg.seed, rng_stage::blend, scene_index,
                                   static_cast<std::uint32_t>(si));
            final_placements = blend_placements(experimental, synthetic, entry.blend_weight,
                                                blend_rng, static_cast<int>(synthetic.size()),
                                                scene.scale.overlap_threshold);
        } else {
            final_placements = std::move(synthetic);
        }
        for (Placement& p : final_placements) scene.placements.push_back(std::move(p));
    }
    return scene;
}

namespace {

using Clock = std::chrono::steady_clock;

class StageClock {
public:
    void add(const std::string& name, double seconds) {
        std::lock_guard<std::mutex> lock(mutex_);
        times_[name] += seconds;
    }
    std::vector<StageTime> ordered(const std::vector<std::string>& order) const {
        std::vector<StageTime> out;
        for (const std::string& name : order) {
            auto it = times_.find(name);
            if (it != times_.end()) out.push_back({name, it->second});
        }
        return out;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, double> times_;
};

struct OutputTracker {
    std::filesystem::path root;
    std::mutex mutex;
    std::vector<std::string> written; // relative paths

    void record(const std::string& rel) {
        std::lock_guard<std::mutex> lock(mutex);
        written.push_back(rel);
    }
    void cleanup() {
        std::lock_guard<std::mutex> lock(mutex);
        std::error_code ec;
        for (const std::string& rel : written)
            std::filesystem::remove(root / rel, ec);
        written.clear();
    }
};

template <typename F>
double timed(F&& fn) {
    auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// aborting stage errors carry the stage name
template <typename F>
void stage(StageClock& clock, const char* name, F&& fn) {
    try {
        clock.add(name, timed(fn));
    } catch (const error& e) {
        throw error(e.code(), std::string("stage ") + name + ": " + e.what());
    }
}

void run_one_scene(const SceneConfig& cfg, std::uint32_t scene_index,
                   OutputTracker& tracker, StageClock& clock, bool verbose) {
    char dirname[32];
    std::snprintf(dirname, sizeof dirname, "scene_%03u", scene_index);
    std::filesystem::path scene_dir = tracker.root / dirname;
    std::filesystem::create_directories(scene_dir);
    auto rel = [&](const char* name) { return std::string(dirname) + "/" + name; };
    auto note = [&](const char* what) {
        if (verbose)
            std::fprintf(stderr, "[%s] %s\n", dirname, what);
    };

    BuiltLibrary lib;
    stage(clock, "library", [&] { lib = build_library(cfg, scene_index); });
    note("library built");

    ContextMeshes context;
    stage(clock, "context", [&] { context = build_context(cfg, scene_index); });

    Scene scene;
    stage(clock, "placement", [&] { scene = build_scene(cfg, lib, context, scene_index); });
    note("particles placed");

    double spacing = cfg.pixel_size();
    int nz = std::max(1, static_cast<int>(std::lround(cfg.extents.z / spacing)));

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
        ip.nz = nz;
        RandomStream ice_rng(cfg.seed, rng_stage::ice, scene_index);
        stage(clock, "ice", [&] {
            ice = generate_ice(cfg.image_nx(), cfg.image_ny(), spacing, ip, ice_rng);
        });
        note("ice generated");
    }

    DensityVolume potential;
    stage(clock, "assemble", [&] {
        potential = assemble_potential(scene, lib.volumes, have_ice ? &ice : nullptr,
                                       spacing, cfg.ice.contrast);
    });
    note("potential assembled");

    Micrograph clean;
    stage(clock, "project", [&] {
        double z_lo = potential.origin.z;
        double z_hi = potential.origin.z + (potential.nz - 1) * potential.voxel_size;
        clean = project(potential, z_lo, z_hi);
    });

    Micrograph filtered;
    CtfParams ctf{cfg.ctf.voltage_kv, cfg.ctf.defocus_A, cfg.ctf.cs_mm,
                  cfg.ctf.amplitude_contrast, cfg.ctf.b_factor, cfg.ctf.phase_shift};
    stage(clock, "ctf", [&] { filtered = ctf_filter(clean, ctf); });

    Micrograph mask;
    stage(clock, "mask", [&] {
        mask = render_mask(scene, cfg.image_nx(), cfg.image_ny(), spacing);
    });

    Micrograph noisy;
    NoiseSpec nspec;
    if (cfg.noise.model == "poisson") nspec.model = NoiseSpec::Model::poisson;
    else if (cfg.noise.model == "poisson_gaussian") nspec.model = NoiseSpec::Model::poisson_gaussian;
    else nspec.model = NoiseSpec::Model::gaussian;
    nspec.target_snr = cfg.noise.snr;
    nspec.dose = cfg.noise.dose;
    nspec.sigma = cfg.noise.sigma;
    RandomStream noise_rng(cfg.seed, rng_stage::noise, scene_index);
    bool have_noise = cfg.noise.model != "none";
    if (have_noise)
        stage(clock, "noise", [&] { noisy = apply_noise(filtered, nspec, noise_rng); });
    note("imaging done");

    stage(clock, "write", [&] {
        auto put_micrograph = [&](const char* name, const Micrograph& m) {
            write_micrograph_file((scene_dir / name).string(), m);
            tracker.record(rel(name));
        };
        write_scene_file((scene_dir / "scene.json").string(), scene);
        tracker.record(rel("scene.json"));
        put_micrograph("micrograph_clean.mrc", clean);
        put_micrograph("micrograph_ctf.mrc", filtered);
        if (have_noise) put_micrograph("micrograph_noisy.mrc", noisy);
        put_micrograph("mask.mrc", mask);
        if (have_ice && cfg.outputs.ice_thickness)
            put_micrograph("ice_thickness.mrc", thickness_map(ice));
        if (cfg.outputs.volume) {
            write_volume_file((scene_dir / "potential.mrc").string(), potential);
            tracker.record(rel("potential.mrc"));
        }
        if (cfg.outputs.png) {
            write_png16((scene_dir / "micrograph_clean.png").string(), clean);
            tracker.record(rel("micrograph_clean.png"));
            const Micrograph& last = have_noise ? noisy : filtered;
            write_png16((scene_dir / "micrograph_noisy.png").string(), last);
            tracker.record(rel("micrograph_noisy.png"));
        }
    });
    note("outputs written");
}

} // namespace

RunManifest run_pipeline(const SceneConfig& cfg, const std::filesystem::path& out_dir,
                         int threads, bool verbose, const std::string& config_text) {
    if (threads < 1) fail_config("threads must be >= 1");
    std::filesystem::create_directories(out_dir);

    OutputTracker tracker;
    tracker.root = out_dir;
    StageClock clock;

    int n_scenes = cfg.micrographs;
    std::atomic<std::uint32_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            std::uint32_t idx = next.fetch_add(1);
            if (idx >= static_cast<std::uint32_t>(n_scenes)) return;
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error) return;
            }
            try {
                run_one_scene(cfg, idx, tracker, clock, verbose);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int n_workers = std::min(threads, n_scenes);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    if (first_error) {
        tracker.cleanup();
        std::rethrow_exception(first_error);
    }

    RunManifest manifest;
    manifest.seed = cfg.seed;
    manifest.config_sha256 = sha256_hex(config_text);
    std::sort(tracker.written.begin(), tracker.written.end());
    for (const std::string& relpath : tracker.written)
        manifest.outputs.push_back({relpath, sha256_file((out_dir / relpath).string())});
    manifest.stages = clock.ordered({"library", "context", "placement", "ice", "assemble",
                                     "project", "ctf", "mask", "noise", "write"});

    std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
    if (!mf) fail_data("cannot write manifest.json");
    mf << manifest.to_json() << '\n';
    return manifest;
}

} // namespace cryosim
