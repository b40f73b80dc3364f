#pragma once
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cryosim/config.hpp"
#include "cryosim/imaging.hpp"
#include "cryosim/scene.hpp"

namespace cryosim {

inline constexpr const char* kToolName = "cryosim";
inline constexpr const char* kToolVersion = "0.1.0";

struct StageTime {
    std::string name;
    double seconds = 0;
};

struct OutputRecord {
    std::string path; // relative to the output directory
    std::string sha256;
};

struct RunManifest {
    std::string tool = kToolName;
    std::string version = kToolVersion;
    std::string digest_algorithm = "SHA-256";
    std::string config_sha256;
    std::uint64_t seed = 0;
    std::vector<OutputRecord> outputs; // sorted by path
    std::vector<StageTime> stages;

    std::string to_json() const;
};

// Per-scene building blocks shared between the CLI stages and the
// end-to-end run.
struct BuiltLibrary {
    std::map<std::string, DensityVolume> volumes; // structure id -> density
    std::map<std::string, double> radii;          // bounding-sphere radius, A
    std::map<std::string, double> sizes;          // bounding-box diagonal, A
};

BuiltLibrary build_library(const SceneConfig& cfg, std::uint32_t scene_index);

struct ContextMeshes {
    std::vector<TriangleMesh> meshes;
    std::vector<std::string> labels; // label value as string
};

ContextMeshes build_context(const SceneConfig& cfg, std::uint32_t scene_index);

Scene build_scene(const SceneConfig& cfg, const BuiltLibrary& lib,
                  const ContextMeshes& context, std::uint32_t scene_index);

// library build -> placement -> ice -> assemble -> project -> ctf -> mask ->
// noise; writes the per-scene outputs and a digest manifest. On any stage
// error every file written so far is removed.
RunManifest run_pipeline(const SceneConfig& cfg, const std::filesystem::path& out_dir,
                         int threads = 1, bool verbose = false,
                         const std::string& config_text = {});

} // namespace cryosim
