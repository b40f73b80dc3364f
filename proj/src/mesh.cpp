#include "cryosim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

#include "cryosim/error.hpp"

namespace cryosim {

double TriangleMesh::face_area(int f) const {
    const auto& t = faces[f];
    Vec3 e1 = vertices[t[1]] - vertices[t[0]];
    Vec3 e2 = vertices[t[2]] - vertices[t[0]];
    return 0.5 * e1.cross(e2).norm();
}

Vec3 TriangleMesh::face_normal(int f) const {
    const auto& t = faces[f];
    Vec3 e1 = vertices[t[1]] - vertices[t[0]];
    Vec3 e2 = vertices[t[2]] - vertices[t[0]];
    return e1.cross(e2).normalized();
}

int isosurface_step(const ScaleParams& scale) {
    if (scale.s > 0.8) return 1;
    return std::clamp(static_cast<int>(std::lround(1.0 / scale.s)), 1, 4);
}

int smoothing_iterations(const ScaleParams& scale) {
    return static_cast<int>(std::lround(std::max(1.0, 5.0 * scale.s)));
}

double decimation_reduction(const ScaleParams& scale) {
    return 0.6 * (1.0 - scale.s);
}

namespace {

// Freudenthal decomposition: six tetrahedra around the main diagonal 0-7.
// Cube corner bit layout: bit0 = +x, bit1 = +y, bit2 = +z. The decomposition
// is translation-invariant, so face diagonals agree between neighboring
// cells and the extracted surface is watertight.
constexpr int kTets[6][4] = {
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
    {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
};

struct EdgeKeyHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
        return std::hash<std::int64_t>()(k.first * 0x9E3779B97F4A7C15ll ^ k.second);
    }
};

} // namespace

TriangleMesh extract_isosurface(const DensityVolume& vol, double iso,
                                const ScaleParams& scale) {
    TriangleMesh mesh;
    if (vol.nx < 2 || vol.ny < 2 || vol.nz < 2) return mesh;

    int step = isosurface_step(scale);

    // coarse lattice indices, last cell clamped to the grid boundary
    auto axis_nodes = [&](int n) {
        std::vector<int> ids;
        for (int i = 0; i < n - 1; i += step) ids.push_back(i);
        ids.push_back(n - 1);
        return ids;
    };
    std::vector<int> xs = axis_nodes(vol.nx), ys = axis_nodes(vol.ny), zs = axis_nodes(vol.nz);

    std::unordered_map<std::pair<std::int64_t, std::int64_t>, int, EdgeKeyHash> edge_vertex;
    auto node_id = [&](int i, int j, int k) -> std::int64_t {
        return (static_cast<std::int64_t>(k) * vol.ny + j) * vol.nx + i;
    };

    auto edge_point = [&](std::int64_t na, std::int64_t nb, const Vec3& pa, const Vec3& pb,
                          double va, double vb) -> int {
        auto key = na < nb ? std::make_pair(na, nb) : std::make_pair(nb, na);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double t = (iso - va) / (vb - va);
        Vec3 p = pa + (pb - pa) * t;
        int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    std::int64_t nid[8];
    Vec3 pos[8];
    double val[8];

    for (std::size_t ck = 0; ck + 1 < zs.size(); ++ck)
        for (std::size_t cj = 0; cj + 1 < ys.size(); ++cj)
            for (std::size_t ci = 0; ci + 1 < xs.size(); ++ci) {
                int ii[2] = {xs[ci], xs[ci + 1]};
                int jj[2] = {ys[cj], ys[cj + 1]};
                int kk[2] = {zs[ck], zs[ck + 1]};
                for (int c = 0; c < 8; ++c) {
                    int i = ii[c & 1], j = jj[(c >> 1) & 1], k = kk[(c >> 2) & 1];
                    nid[c] = node_id(i, j, k);
                    pos[c] = vol.position(i, j, k);
                    val[c] = vol.at(i, j, k);
                }
                for (const auto& tet : kTets) {
                    int inside_mask = 0, n_in = 0;
                    for (int v = 0; v < 4; ++v)
                        if (val[tet[v]] > iso) { inside_mask |= 1 << v; ++n_in; }
                    if (n_in == 0 || n_in == 4) continue;

                    int in_v[4], out_v[4], ni = 0, no = 0;
                    for (int v = 0; v < 4; ++v)
                        (inside_mask >> v & 1 ? in_v[ni++] : out_v[no++]) = tet[v];

                    auto cut = [&](int a, int b) {
                        return edge_point(nid[a], nid[b], pos[a], pos[b], val[a], val[b]);
                    };
                    auto emit = [&](int a, int b, int c) {
                        if (a == b || b == c || a == c) return;
                        // orient so the winding normal points out of the inside set
                        Vec3 inc, outc;
                        for (int v = 0; v < ni; ++v) inc += pos[in_v[v]];
                        for (int v = 0; v < no; ++v) outc += pos[out_v[v]];
                        Vec3 ref = outc / no - inc / ni;
                        Vec3 n = (mesh.vertices[b] - mesh.vertices[a])
                                     .cross(mesh.vertices[c] - mesh.vertices[a]);
                        if (n.dot(ref) >= 0) mesh.faces.push_back({a, b, c});
                        else mesh.faces.push_back({a, c, b});
                    };

                    if (n_in == 1) {
                        int a = cut(in_v[0], out_v[0]);
                        int b = cut(in_v[0], out_v[1]);
                        int c = cut(in_v[0], out_v[2]);
                        emit(a, b, c);
                    } else if (n_in == 3) {
                        int a = cut(in_v[0], out_v[0]);
                        int b = cut(in_v[1], out_v[0]);
                        int c = cut(in_v[2], out_v[0]);
                        emit(a, b, c);
                    } else { // 2 in, 2 out: quad split into two triangles
                        int a = cut(in_v[0], out_v[0]);
                        int b = cut(in_v[0], out_v[1]);
                        int c = cut(in_v[1], out_v[1]);
                        int d = cut(in_v[1], out_v[0]);
                        emit(a, b, c);
                        emit(a, c, d);
                    }
                }
            }

    // drop exact zero-area faces (iso hitting grid nodes)
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        if (mesh.face_area(static_cast<int>(f)) > 0.0) kept.push_back(mesh.faces[f]);
    mesh.faces = std::move(kept);

    // gradient normals: outward = downhill in density
    mesh.normals.resize(mesh.vertices.size());
    double h = vol.voxel_size * step;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const Vec3& p = mesh.vertices[v];
        Vec3 g{vol.sample_trilinear({p.x + h, p.y, p.z}) - vol.sample_trilinear({p.x - h, p.y, p.z}),
               vol.sample_trilinear({p.x, p.y + h, p.z}) - vol.sample_trilinear({p.x, p.y - h, p.z}),
               vol.sample_trilinear({p.x, p.y, p.z + h}) - vol.sample_trilinear({p.x, p.y, p.z - h})};
        if (g.norm2() > 0) {
            mesh.normals[v] = (-g).normalized();
        } else {
            mesh.normals[v] = {0, 0, 1};
        }
    }
    return mesh;
}

namespace {

std::vector<std::vector<int>> vertex_rings(const TriangleMesh& mesh) {
    std::vector<std::set<int>> ring(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        ring[f[0]].insert(f[1]); ring[f[0]].insert(f[2]);
        ring[f[1]].insert(f[0]); ring[f[1]].insert(f[2]);
        ring[f[2]].insert(f[0]); ring[f[2]].insert(f[1]);
    }
    std::vector<std::vector<int>> out(ring.size());
    for (std::size_t i = 0; i < ring.size(); ++i)
        out[i].assign(ring[i].begin(), ring[i].end());
    return out;
}

} // namespace

void recompute_normals(TriangleMesh& mesh) {
    mesh.normals.assign(mesh.vertices.size(), Vec3{});
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        Vec3 an = e1.cross(e2) * 0.5; // area-weighted
        mesh.normals[t[0]] += an;
        mesh.normals[t[1]] += an;
        mesh.normals[t[2]] += an;
    }
    for (auto& n : mesh.normals) {
        double len = n.norm();
        n = len > 0 ? n / len : Vec3{0, 0, 1};
    }
}

TriangleMesh smooth_mesh(const TriangleMesh& mesh, const ScaleParams& scale) {
    TriangleMesh out = mesh;
    auto rings = vertex_rings(out);
    int iters = smoothing_iterations(scale);
    const double relax = 0.2;
    std::vector<Vec3> next(out.vertices.size());
    for (int it = 0; it < iters; ++it) {
        for (std::size_t v = 0; v < out.vertices.size(); ++v) {
            if (rings[v].empty()) { next[v] = out.vertices[v]; continue; }
            Vec3 mean;
            for (int nb : rings[v]) mean += out.vertices[nb];
            mean = mean / static_cast<double>(rings[v].size());
            next[v] = out.vertices[v] + (mean - out.vertices[v]) * relax;
        }
        out.vertices.swap(next);
    }
    recompute_normals(out);
    return out;
}

long euler_characteristic(const TriangleMesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        edges.insert(std::minmax(f[0], f[1]));
        edges.insert(std::minmax(f[1], f[2]));
        edges.insert(std::minmax(f[0], f[2]));
    }
    std::set<int> used;
    for (const auto& f : mesh.faces) used.insert(f.begin(), f.end());
    return static_cast<long>(used.size()) - static_cast<long>(edges.size()) +
           static_cast<long>(mesh.faces.size());
}

int max_edge_valence(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& f : mesh.faces) {
        ++count[std::minmax(f[0], f[1])];
        ++count[std::minmax(f[1], f[2])];
        ++count[std::minmax(f[0], f[2])];
    }
    int m = 0;
    for (const auto& [e, c] : count) m = std::max(m, c);
    return m;
}

MeshQuality mesh_quality(const TriangleMesh& mesh) {
    MeshQuality q;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        Vec3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        double area = mesh.face_area(static_cast<int>(f));
        if (area <= 0) { ++q.zero_area_faces; continue; }
        double lab = (b - a).norm(), lbc = (c - b).norm(), lca = (a - c).norm();
        double lmax = std::max({lab, lbc, lca});
        q.max_aspect = std::max(q.max_aspect, lmax * lmax / (2.0 * area));
        auto angle = [](const Vec3& u, const Vec3& v) {
            return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
        };
        double a0 = angle(b - a, c - a), a1 = angle(a - b, c - b);
        double a2 = M_PI - a0 - a1;
        q.min_angle_deg = std::min({q.min_angle_deg, a0 * 180 / M_PI, a1 * 180 / M_PI, a2 * 180 / M_PI});
    }
    return q;
}

TriangleMesh decimate_mesh(const TriangleMesh& mesh, const ScaleParams& scale) {
    double reduction = decimation_reduction(scale);
    if (reduction < 0.05 || mesh.faces.empty()) return mesh;
    if (max_edge_valence(mesh) > 2) fail_data("decimation requires a manifold mesh");

    long target = std::lround(mesh.faces.size() * (1.0 - reduction));

    std::vector<Vec3> verts = mesh.vertices;
    std::vector<std::array<int, 3>> faces = mesh.faces;
    std::vector<bool> face_alive(faces.size(), true);
    std::vector<std::set<int>> vfaces(verts.size()); // vertex -> alive face ids
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (int v : faces[f]) vfaces[v].insert(static_cast<int>(f));
    long alive = static_cast<long>(faces.size());

    auto ring_of = [&](int v) {
        std::set<int> r;
        for (int f : vfaces[v])
            for (int w : faces[f])
                if (w != v) r.insert(w);
        return r;
    };

    struct QEdge { double len; int a, b; };
    auto cmp = [](const QEdge& x, const QEdge& y) { return x.len > y.len; };
    std::priority_queue<QEdge, std::vector<QEdge>, decltype(cmp)> queue(cmp);
    auto push_edges_of = [&](int v) {
        for (int f : vfaces[v]) {
            const auto& t = faces[f];
            for (int e = 0; e < 3; ++e) {
                int a = t[e], b = t[(e + 1) % 3];
                if (a > b) std::swap(a, b);
                queue.push({(verts[a] - verts[b]).norm(), a, b});
            }
        }
    };
    for (std::size_t v = 0; v < verts.size(); ++v) push_edges_of(static_cast<int>(v));

    std::vector<bool> vert_alive(verts.size(), true);
    while (alive > target && !queue.empty()) {
        QEdge e = queue.top();
        queue.pop();
        if (!vert_alive[e.a] || !vert_alive[e.b]) continue;
        if ((verts[e.a] - verts[e.b]).norm() != e.len) continue; // stale entry
        // shared faces of the edge
        std::vector<int> shared;
        for (int f : vfaces[e.a])
            if (vfaces[e.b].count(f)) shared.push_back(f);
        if (shared.empty() || shared.size() > 2) continue;
        // link condition: common ring = exactly the apex vertices of shared faces
        std::set<int> ra = ring_of(e.a), rb = ring_of(e.b), common;
        std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(),
                              std::inserter(common, common.begin()));
        if (common.size() != shared.size()) continue;
        if (static_cast<long>(shared.size()) * 2 > alive) continue;

        // collapse b into a at the midpoint
        verts[e.a] = (verts[e.a] + verts[e.b]) * 0.5;
        vert_alive[e.b] = false;
        for (int f : shared) {
            if (!face_alive[f]) continue;
            face_alive[f] = false;
            --alive;
            for (int v : faces[f]) vfaces[v].erase(f);
        }
        std::vector<int> bfaces(vfaces[e.b].begin(), vfaces[e.b].end());
        for (int f : bfaces) {
            vfaces[e.b].erase(f);
            for (int& v : faces[f])
                if (v == e.b) v = e.a;
            // degenerate after remap (shouldn't happen under the link condition)
            if (faces[f][0] == faces[f][1] || faces[f][1] == faces[f][2] ||
                faces[f][0] == faces[f][2]) {
                if (face_alive[f]) { face_alive[f] = false; --alive; }
                for (int v : faces[f]) vfaces[v].erase(f);
                continue;
            }
            vfaces[e.a].insert(f);
        }
        push_edges_of(e.a);
    }

    // compact
    TriangleMesh out;
    std::vector<int> remap(verts.size(), -1);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!face_alive[f]) continue;
        std::array<int, 3> t{};
        for (int e = 0; e < 3; ++e) {
            int v = faces[f][e];
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(verts[v]);
            }
            t[e] = remap[v];
        }
        out.faces.push_back(t);
    }
    recompute_normals(out);
    return out;
}

bool point_in_mesh(const TriangleMesh& mesh, const Vec3& p) {
    // parity of crossings along a fixed irrational-ish direction
    const Vec3 dir = Vec3{0.57735026919, 0.7018787243, 0.4181212757}.normalized();
    int crossings = 0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        Vec3 e1 = b - a, e2 = c - a;
        Vec3 h = dir.cross(e2);
        double det = e1.dot(h);
        if (std::abs(det) < 1e-12) continue;
        double inv = 1.0 / det;
        Vec3 s = p - a;
        double u = s.dot(h) * inv;
        if (u < 0 || u > 1) continue;
        Vec3 q = s.cross(e1);
        double v = dir.dot(q) * inv;
        if (v < 0 || u + v > 1) continue;
        double dist = e2.dot(q) * inv;
        if (dist > 0) ++crossings;
    }
    return crossings % 2 == 1;
}

double distance_to_surface(const TriangleMesh& mesh, const Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        // closest point on triangle (Ericson)
        Vec3 ab = b - a, ac = c - a, ap = p - a;
        double d1 = ab.dot(ap), d2 = ac.dot(ap);
        Vec3 q;
        if (d1 <= 0 && d2 <= 0) q = a;
        else {
            Vec3 bp = p - b;
            double d3 = ab.dot(bp), d4 = ac.dot(bp);
            if (d3 >= 0 && d4 <= d3) q = b;
            else {
                double vc = d1 * d4 - d3 * d2;
                if (vc <= 0 && d1 >= 0 && d3 <= 0) q = a + ab * (d1 / (d1 - d3));
                else {
                    Vec3 cp = p - c;
                    double d5 = ab.dot(cp), d6 = ac.dot(cp);
                    if (d6 >= 0 && d5 <= d6) q = c;
                    else {
                        double vb = d5 * d2 - d1 * d6;
                        if (vb <= 0 && d2 >= 0 && d6 <= 0) q = a + ac * (d2 / (d2 - d6));
                        else {
                            double va = d3 * d6 - d5 * d4;
                            if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
                                q = b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
                            else {
                                double denom = 1.0 / (va + vb + vc);
                                q = a + ab * (vb * denom) + ac * (vc * denom);
                            }
                        }
                    }
                }
            }
        }
        best = std::min(best, (p - q).norm());
    }
    return best;
}

void write_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot create OBJ file: " + path);
    f << "# cryosim mesh: " << mesh.vertices.size() << " vertices, "
      << mesh.faces.size() << " faces\n";
    for (const Vec3& v : mesh.vertices)
        f << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const Vec3& n : mesh.normals)
        f << "vn " << n.x << ' ' << n.y << ' ' << n.z << '\n';
    for (const auto& t : mesh.faces)
        f << "f " << t[0] + 1 << "//" << t[0] + 1 << ' ' << t[1] + 1 << "//" << t[1] + 1
          << ' ' << t[2] + 1 << "//" << t[2] + 1 << '\n';
    if (!f) fail_data("short write: " + path);
}

} // namespace cryosim
