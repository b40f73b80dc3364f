#pragma once
#include <array>
#include <memory>
#include <vector>

#include "cryosim/scale.hpp"
#include "cryosim/vec3.hpp"

namespace cryosim {

struct SphereItem {
    int id = 0;
    Vec3 center;
    double radius = 0;
};

// Loose octree over bounding spheres: items live in the leaf containing
// their center; every node tracks the largest radius below it so queries
// can prune cells conservatively. Immutable once built.
class Octree {
public:
    // depth = 4 + round(4 s), leaf capacity = round(16 - 8 s)
    static int depth_for(const ScaleParams& scale);
    static int capacity_for(const ScaleParams& scale);

    Octree(std::vector<SphereItem> items, const Box3& bounds, int max_depth,
           int leaf_capacity);
    Octree(std::vector<SphereItem> items, const Box3& bounds, const ScaleParams& scale);

    // ids of items whose sphere intersects the query sphere
    std::vector<int> query_near(const Vec3& center, double radius) const;

    std::size_t size() const { return n_items_; }

private:
    struct Node {
        Box3 bounds;
        double max_item_radius = 0;
        std::vector<SphereItem> items;        // leaves only
        std::array<std::unique_ptr<Node>, 8> children;
        bool leaf() const { return !children[0]; }
    };

    void insert(Node& node, SphereItem item, int depth);
    void split(Node& node, int depth);
    void query(const Node& node, const Vec3& center, double radius,
               std::vector<int>& out) const;

    std::unique_ptr<Node> root_;
    int max_depth_;
    int leaf_capacity_;
    std::size_t n_items_ = 0;
};

} // namespace cryosim
