#pragma once
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cryosim/vec3.hpp"

namespace cryosim {

struct StructureEntry {
    std::string id;
    std::string path;                  // coordinate file (fixed-column ATOM/HETATM)
    int count = 0;                     // requested synthetic particles
    std::string class_rule = "uniform"; // uniform | cluster | confined | separated
    double cluster_spacing = 0;        // Angstrom, class_rule cluster
    double min_separation = 0;         // Angstrom, class_rule separated
    std::string confinement_label;     // context label, class_rule confined
    double confidence_weight = 1.0;
    std::string picks_path;            // optional STAR pick table
    double blend_weight = 0.5;         // experimental weight when picks present
};

struct PlacementConfig {
    std::string strategy = "uniform";  // uniform | cluster | grid | interface
    double interface_tolerance = 20.0; // Angstrom
    std::string interface_label;       // context label providing the surface
};

struct OrientationConfig {
    std::string mode = "uniform";      // uniform | preferred | limited_tilt
    double kappa = 10.0;
    Vec3 mu{0, 0, 1};
    double theta_max = M_PI / 6.0;     // radians
};

struct IceConfig {
    bool enabled = true;
    double mean_thickness_nm = 100.0;  // log-normal mu = ln(mean)
    double sigma_log = 0.2;
    int octaves = 4;
    double amplitude_nm = 5.0;         // octave i amplitude = amplitude / 2^i
    double wavelength_px = 10.0;       // fundamental wavelength
    double min_nm = 30.0, max_nm = 300.0;
    double density = 0.92;             // g/cm^3
    double density_noise_frac = 0.05;  // fluctuation sigma = frac * density
    double correlation_voxels = 2.0;
    double contrast = 0.1;             // ice density weight in the potential
};

struct CtfConfig {
    double voltage_kv = 300.0;
    double defocus_A = 10000.0;        // positive = underfocus
    double cs_mm = 2.7;
    double amplitude_contrast = 0.07;
    double b_factor = 0.0;             // Angstrom^2
    double phase_shift = 0.0;          // radians
};

struct NoiseConfig {
    std::string model = "gaussian";    // gaussian | poisson | poisson_gaussian
    double snr = 0.1;                  // var(signal)/var(noise); 0 = pure-noise mode
    double dose = 0.0;                 // electrons/pixel; 0 = calibrated from snr
    double sigma = 1.0;                // gaussian sigma in pure-noise mode
};

struct ConformerConfig {
    bool enabled = false;
    double amp_static = 0.0;           // Angstrom, confidence > 90
    double amp_constrained = 0.5;      // (70, 90]
    double amp_enhanced = 1.5;         // (50, 70]
    double amp_flexible = 3.0;         // <= 50
    std::vector<std::pair<int, int>> domains; // [begin, end) atom index ranges
};

struct ContextConfig {
    std::string labels_path;           // MRC of integer labels, 0 = background
    double perturb_amplitude = 2.0;    // Angstrom
};

struct OutputConfig {
    bool volume = false;               // write the assembled 3D potential
    bool png = false;                  // 16-bit preview images
    bool ice_thickness = true;         // thickness field as 2D MRC
};

struct SceneConfig {
    std::uint64_t seed = 0;
    Vec3 extents;                      // Angstrom
    double resolution = 0;             // Angstrom; voxel/pixel size = resolution/2
    int micrographs = 1;
    std::vector<StructureEntry> structures;
    PlacementConfig placement;
    OrientationConfig orientation;
    IceConfig ice;
    CtfConfig ctf;
    NoiseConfig noise;
    ConformerConfig conformer;
    std::optional<ContextConfig> context;
    OutputConfig outputs;

    double pixel_size() const { return resolution / 2.0; }
    int image_nx() const { return static_cast<int>(std::lround(extents.x / pixel_size())); }
    int image_ny() const { return static_cast<int>(std::lround(extents.y / pixel_size())); }
};

// Strict parse: unknown keys are rejected, defaults filled, values validated.
// Relative paths resolve against base_dir; existence is checked when
// verify_paths is set.
SceneConfig parse_scene_config(const std::string& text,
                               const std::filesystem::path& base_dir = {},
                               bool verify_paths = true);
SceneConfig load_scene_config(const std::filesystem::path& path, bool verify_paths = true);

} // namespace cryosim
