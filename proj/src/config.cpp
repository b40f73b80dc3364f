#include "cryosim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cryosim/error.hpp"

namespace cryosim {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            fail_config("unknown key '" + it.key() + "' in " + where);
}

double get_num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) fail_config(std::string("key '") + key + "' must be a number");
    return obj[key].get<double>();
}

std::string get_str(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) fail_config(std::string("key '") + key + "' must be a string");
    return obj[key].get<std::string>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) fail_config(std::string("key '") + key + "' must be a boolean");
    return obj[key].get<bool>();
}

Vec3 get_vec3(const json& obj, const char* key, Vec3 fallback) {
    if (!obj.contains(key)) return fallback;
    const json& a = obj[key];
    if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number())
        fail_config(std::string("key '") + key + "' must be an array of 3 numbers");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir,
                         bool verify, const std::string& what) {
    std::filesystem::path fp(p);
    if (fp.is_relative() && !base_dir.empty()) fp = base_dir / fp;
    if (verify && !std::filesystem::exists(fp))
        fail_config(what + " not found: " + fp.string());
    return fp.string();
}

} // namespace

SceneConfig parse_scene_config(const std::string& text,
                               const std::filesystem::path& base_dir,
                               bool verify_paths) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail_config(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) fail_config("config root must be a JSON object");

    require_keys(root, "config", {"seed", "extents", "resolution", "micrographs",
                                  "structures", "placement", "orientation", "ice",
                                  "ctf", "noise", "conformer", "context", "outputs"});

    SceneConfig cfg;
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
            fail_config("key 'seed' must be an integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }

    cfg.extents = get_vec3(root, "extents", {});
    if (!(cfg.extents.x > 0 && cfg.extents.y > 0 && cfg.extents.z > 0))
        fail_config("'extents' must be three positive lengths in Angstrom");

    cfg.resolution = get_num(root, "resolution", 0.0);
    if (!(cfg.resolution > 0)) fail_config("'resolution' must be > 0");

    cfg.micrographs = static_cast<int>(get_num(root, "micrographs", 1));
    if (cfg.micrographs < 1) fail_config("'micrographs' must be >= 1");

    if (!root.contains("structures") || !root["structures"].is_array())
        fail_config("'structures' must be an array");
    for (const json& s : root["structures"]) {
        if (!s.is_object()) fail_config("each structure entry must be an object");
        require_keys(s, "structure entry",
                     {"id", "path", "count", "class", "cluster_spacing", "min_separation",
                      "confinement_label", "confidence_weight", "picks", "blend_weight"});
        StructureEntry e;
        e.path = get_str(s, "path", "");
        if (e.path.empty()) fail_config("structure entry missing 'path'");
        e.path = resolve_path(e.path, base_dir, verify_paths, "structure file");
        e.id = get_str(s, "id", std::filesystem::path(e.path).stem().string());
        e.count = static_cast<int>(get_num(s, "count", 0));
        if (e.count < 0) fail_config("structure 'count' must be >= 0");
        e.class_rule = get_str(s, "class", "uniform");
        if (e.class_rule != "uniform" && e.class_rule != "cluster" &&
            e.class_rule != "confined" && e.class_rule != "separated")
            fail_config("unknown class rule '" + e.class_rule + "'");
        e.cluster_spacing = get_num(s, "cluster_spacing", 0.0);
        e.min_separation = get_num(s, "min_separation", 0.0);
        e.confinement_label = get_str(s, "confinement_label", "");
        if (e.class_rule == "cluster" && !(e.cluster_spacing > 0))
            fail_config("class 'cluster' requires positive 'cluster_spacing'");
        if (e.class_rule == "separated" && !(e.min_separation > 0))
            fail_config("class 'separated' requires positive 'min_separation'");
        if (e.class_rule == "confined" && e.confinement_label.empty())
            fail_config("class 'confined' requires 'confinement_label'");
        e.confidence_weight = get_num(s, "confidence_weight", 1.0);
        e.picks_path = get_str(s, "picks", "");
        if (!e.picks_path.empty())
            e.picks_path = resolve_path(e.picks_path, base_dir, verify_paths, "pick table");
        e.blend_weight = get_num(s, "blend_weight", 0.5);
        if (e.blend_weight < 0 || e.blend_weight > 1)
            fail_config("'blend_weight' must be in [0, 1]");
        cfg.structures.push_back(std::move(e));
    }

    if (root.contains("placement")) {
        const json& p = root["placement"];
        require_keys(p, "placement", {"strategy", "interface_tolerance", "interface_label"});
        cfg.placement.strategy = get_str(p, "strategy", "uniform");
        if (cfg.placement.strategy != "uniform" && cfg.placement.strategy != "cluster" &&
            cfg.placement.strategy != "grid" && cfg.placement.strategy != "interface")
            fail_config("unknown placement strategy '" + cfg.placement.strategy + "'");
        cfg.placement.interface_tolerance = get_num(p, "interface_tolerance", 20.0);
        cfg.placement.interface_label = get_str(p, "interface_label", "");
        if (cfg.placement.strategy == "interface" && cfg.placement.interface_label.empty())
            fail_config("strategy 'interface' requires 'interface_label'");
    }

    if (root.contains("orientation")) {
        const json& o = root["orientation"];
        require_keys(o, "orientation", {"mode", "kappa", "mu", "theta_max"});
        cfg.orientation.mode = get_str(o, "mode", "uniform");
        if (cfg.orientation.mode != "uniform" && cfg.orientation.mode != "preferred" &&
            cfg.orientation.mode != "limited_tilt")
            fail_config("unknown orientation mode '" + cfg.orientation.mode + "'");
        cfg.orientation.kappa = get_num(o, "kappa", 10.0);
        if (!(cfg.orientation.kappa > 0)) fail_config("'kappa' must be > 0");
        cfg.orientation.mu = get_vec3(o, "mu", {0, 0, 1}).normalized();
        cfg.orientation.theta_max = get_num(o, "theta_max", M_PI / 6.0);
        if (!(cfg.orientation.theta_max > 0 && cfg.orientation.theta_max <= M_PI))
            fail_config("'theta_max' must be in (0, pi]");
    }

    if (root.contains("ice")) {
        const json& i = root["ice"];
        require_keys(i, "ice", {"enabled", "mean_thickness_nm", "sigma_log", "octaves",
                                "amplitude_nm", "wavelength_px", "min_nm", "max_nm",
                                "density", "density_noise_frac", "correlation_voxels",
                                "contrast"});
        cfg.ice.enabled = get_bool(i, "enabled", true);
        cfg.ice.mean_thickness_nm = get_num(i, "mean_thickness_nm", 100.0);
        cfg.ice.sigma_log = get_num(i, "sigma_log", 0.2);
        cfg.ice.octaves = static_cast<int>(get_num(i, "octaves", 4));
        cfg.ice.amplitude_nm = get_num(i, "amplitude_nm", 5.0);
        cfg.ice.wavelength_px = get_num(i, "wavelength_px", 10.0);
        cfg.ice.min_nm = get_num(i, "min_nm", 30.0);
        cfg.ice.max_nm = get_num(i, "max_nm", 300.0);
        cfg.ice.density = get_num(i, "density", 0.92);
        cfg.ice.density_noise_frac = get_num(i, "density_noise_frac", 0.05);
        cfg.ice.correlation_voxels = get_num(i, "correlation_voxels", 2.0);
        cfg.ice.contrast = get_num(i, "contrast", 0.1);
        if (!(cfg.ice.mean_thickness_nm > 0) || !(cfg.ice.min_nm > 0) ||
            cfg.ice.max_nm < cfg.ice.min_nm || cfg.ice.octaves < 1)
            fail_config("invalid ice parameters");
    }

    if (root.contains("ctf")) {
        const json& c = root["ctf"];
        require_keys(c, "ctf", {"voltage_kv", "defocus_A", "cs_mm", "amplitude_contrast",
                                "b_factor", "phase_shift"});
        cfg.ctf.voltage_kv = get_num(c, "voltage_kv", 300.0);
        cfg.ctf.defocus_A = get_num(c, "defocus_A", 10000.0);
        cfg.ctf.cs_mm = get_num(c, "cs_mm", 2.7);
        cfg.ctf.amplitude_contrast = get_num(c, "amplitude_contrast", 0.07);
        cfg.ctf.b_factor = get_num(c, "b_factor", 0.0);
        cfg.ctf.phase_shift = get_num(c, "phase_shift", 0.0);
        if (!(cfg.ctf.voltage_kv > 0)) fail_config("'voltage_kv' must be > 0");
        if (cfg.ctf.amplitude_contrast < 0 || cfg.ctf.amplitude_contrast > 1)
            fail_config("'amplitude_contrast' must be in [0, 1]");
        if (cfg.ctf.b_factor < 0) fail_config("'b_factor' must be >= 0");
    }

    if (root.contains("noise")) {
        const json& n = root["noise"];
        require_keys(n, "noise", {"model", "snr", "dose", "sigma"});
        cfg.noise.model = get_str(n, "model", "gaussian");
        if (cfg.noise.model != "gaussian" && cfg.noise.model != "poisson" &&
            cfg.noise.model != "poisson_gaussian" && cfg.noise.model != "none")
            fail_config("unknown noise model '" + cfg.noise.model + "'");
        cfg.noise.snr = get_num(n, "snr", 0.1);
        if (cfg.noise.snr < 0) fail_config("'snr' must be >= 0 (0 = pure-noise mode)");
        cfg.noise.dose = get_num(n, "dose", 0.0);
        cfg.noise.sigma = get_num(n, "sigma", 1.0);
    }

    if (root.contains("conformer")) {
        const json& c = root["conformer"];
        require_keys(c, "conformer", {"enabled", "amp_static", "amp_constrained",
                                      "amp_enhanced", "amp_flexible", "domains"});
        cfg.conformer.enabled = get_bool(c, "enabled", true);
        cfg.conformer.amp_static = get_num(c, "amp_static", 0.0);
        cfg.conformer.amp_constrained = get_num(c, "amp_constrained", 0.5);
        cfg.conformer.amp_enhanced = get_num(c, "amp_enhanced", 1.5);
        cfg.conformer.amp_flexible = get_num(c, "amp_flexible", 3.0);
        if (cfg.conformer.amp_static < 0 ||
            cfg.conformer.amp_constrained < cfg.conformer.amp_static ||
            cfg.conformer.amp_enhanced < cfg.conformer.amp_constrained ||
            cfg.conformer.amp_flexible < cfg.conformer.amp_enhanced)
            fail_config("conformer amplitudes must be >= 0 and non-decreasing "
                        "from static to flexible");
        if (c.contains("domains")) {
            if (!c["domains"].is_array()) fail_config("'domains' must be an array of [begin, end)");
            for (const json& d : c["domains"]) {
                if (!d.is_array() || d.size() != 2) fail_config("each domain must be [begin, end)");
                cfg.conformer.domains.emplace_back(d[0].get<int>(), d[1].get<int>());
            }
        }
    }

    if (root.contains("context")) {
        const json& c = root["context"];
        require_keys(c, "context", {"labels_path", "perturb_amplitude"});
        ContextConfig ctx;
        ctx.labels_path = get_str(c, "labels_path", "");
        if (ctx.labels_path.empty()) fail_config("context requires 'labels_path'");
        ctx.labels_path = resolve_path(ctx.labels_path, base_dir, verify_paths, "context labels");
        ctx.perturb_amplitude = get_num(c, "perturb_amplitude", 2.0);
        if (ctx.perturb_amplitude < 0) fail_config("'perturb_amplitude' must be >= 0");
        cfg.context = std::move(ctx);
    }

    if (root.contains("outputs")) {
        const json& o = root["outputs"];
        require_keys(o, "outputs", {"volume", "png", "ice_thickness"});
        cfg.outputs.volume = get_bool(o, "volume", false);
        cfg.outputs.png = get_bool(o, "png", false);
        cfg.outputs.ice_thickness = get_bool(o, "ice_thickness", true);
    }

    if (cfg.placement.strategy == "interface" && !cfg.context)
        fail_config("strategy 'interface' requires a 'context' block");
    for (const StructureEntry& e : cfg.structures)
        if (e.class_rule == "confined" && !cfg.context)
            fail_config("class 'confined' requires a 'context' block");

    return cfg;
}

SceneConfig load_scene_config(const std::filesystem::path& path, bool verify_paths) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_config("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_scene_config(ss.str(), path.parent_path(), verify_paths);
}

} // namespace cryosim
