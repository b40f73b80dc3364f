#pragma once
#include <array>
#include <string>
#include <vector>

#include "cryosim/scale.hpp"
#include "cryosim/vec3.hpp"
#include "cryosim/volume.hpp"

namespace cryosim {

struct TriangleMesh {
    std::vector<Vec3> vertices;           // Angstrom
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> normals;            // per-vertex, unit

    bool empty() const { return faces.empty(); }
    double face_area(int f) const;
    Vec3 face_normal(int f) const;        // unit, from winding
};

// Cube step for isosurface extraction: unit steps when s > 0.8, otherwise
// round(1/s) clamped to [1, 4].
int isosurface_step(const ScaleParams& scale);
// Laplacian smoothing iteration count: round(max(1, 5 s)).
int smoothing_iterations(const ScaleParams& scale);
// Edge-collapse target fraction removed: 0.6 (1 - s); below 0.05 decimation
// is skipped.
double decimation_reduction(const ScaleParams& scale);

// Isosurface at level iso over cells of `step` voxels. Vertices are in
// Angstrom, normals point along the negative density gradient (outward).
// An iso level outside the value range yields an empty mesh.
TriangleMesh extract_isosurface(const DensityVolume& vol, double iso,
                                const ScaleParams& scale);

// v <- v + 0.2 (ring mean - v); vertex/face counts unchanged, normals
// recomputed by area-weighted averaging.
TriangleMesh smooth_mesh(const TriangleMesh& mesh, const ScaleParams& scale);

// Topology-preserving shortest-edge collapse to the target face count.
TriangleMesh decimate_mesh(const TriangleMesh& mesh, const ScaleParams& scale);

void recompute_normals(TriangleMesh& mesh);

struct MeshQuality {
    double min_angle_deg = 180.0;
    double max_aspect = 0.0;      // longest edge over its altitude
    int zero_area_faces = 0;
};
MeshQuality mesh_quality(const TriangleMesh& mesh);

long euler_characteristic(const TriangleMesh& mesh); // V - E + F
// max faces sharing one edge; 2 for closed manifolds
int max_edge_valence(const TriangleMesh& mesh);

// Ray-parity inside test for closed meshes.
bool point_in_mesh(const TriangleMesh& mesh, const Vec3& p);
double distance_to_surface(const TriangleMesh& mesh, const Vec3& p);
// Area-weighted random surface point with its face normal.
struct SurfaceSample { Vec3 point; Vec3 normal; };

void write_obj(const TriangleMesh& mesh, const std::string& path);

} // namespace cryosim
