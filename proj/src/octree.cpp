#include "cryosim/octree.hpp"

#include <algorithm>
#include <cmath>

#include "cryosim/error.hpp"

namespace cryosim {

int Octree::depth_for(const ScaleParams& scale) {
    return 4 + static_cast<int>(std::lround(4.0 * scale.s));
}

int Octree::capacity_for(const ScaleParams& scale) {
    return std::max(1, static_cast<int>(std::lround(16.0 - 8.0 * scale.s)));
}

Octree::Octree(std::vector<SphereItem> items, const Box3& bounds, int max_depth,
               int leaf_capacity)
    : max_depth_(std::max(0, max_depth)), leaf_capacity_(std::max(1, leaf_capacity)) {
    root_ = std::make_unique<Node>();
    root_->bounds = bounds;
    for (SphereItem& it : items) {
        if (!bounds.contains(it.center))
            fail_data("octree item center outside bounds");
        insert(*root_, std::move(it), 0);
        ++n_items_;
    }
}

Octree::Octree(std::vector<SphereItem> items, const Box3& bounds, const ScaleParams& scale)
    : Octree(std::move(items), bounds, depth_for(scale), capacity_for(scale)) {}

void Octree::insert(Node& node, SphereItem item, int depth) {
    node.max_item_radius = std::max(node.max_item_radius, item.radius);
    if (node.leaf()) {
        node.items.push_back(std::move(item));
        if (static_cast<int>(node.items.size()) > leaf_capacity_ && depth < max_depth_)
            split(node, depth);
        return;
    }
    Vec3 c = node.bounds.center();
    const Vec3& p = item.center;
    int child = (p.x >= c.x ? 1 : 0) | (p.y >= c.y ? 2 : 0) | (p.z >= c.z ? 4 : 0);
    insert(*node.children[child], std::move(item), depth + 1);
}

void Octree::split(Node& node, int depth) {
    Vec3 c = node.bounds.center();
    for (int i = 0; i < 8; ++i) {
        auto child = std::make_unique<Node>();
        child->bounds.lo = {i & 1 ? c.x : node.bounds.lo.x,
                            i & 2 ? c.y : node.bounds.lo.y,
                            i & 4 ? c.z : node.bounds.lo.z};
        child->bounds.hi = {i & 1 ? node.bounds.hi.x : c.x,
                            i & 2 ? node.bounds.hi.y : c.y,
                            i & 4 ? node.bounds.hi.z : c.z};
        node.children[i] = std::move(child);
    }
    std::vector<SphereItem> items = std::move(node.items);
    node.items.clear();
    for (SphereItem& it : items) {
        const Vec3& p = it.center;
        int child = (p.x >= c.x ? 1 : 0) | (p.y >= c.y ? 2 : 0) | (p.z >= c.z ? 4 : 0);
        insert(*node.children[child], std::move(it), depth + 1);
    }
}

namespace {

double box_point_dist2(const Box3& b, const Vec3& p) {
    double d2 = 0;
    for (int a = 0; a < 3; ++a) {
        double v = p[a], lo = b.lo[a], hi = b.hi[a];
        if (v < lo) d2 += (lo - v) * (lo - v);
        else if (v > hi) d2 += (v - hi) * (v - hi);
    }
    return d2;
}

} // namespace

void Octree::query(const Node& node, const Vec3& center, double radius,
                   std::vector<int>& out) const {
    double reach = radius + node.max_item_radius;
    if (box_point_dist2(node.bounds, center) > reach * reach) return;
    if (node.leaf()) {
        for (const SphereItem& it : node.items) {
            double rr = radius + it.radius;
            if ((it.center - center).norm2() <= rr * rr) out.push_back(it.id);
        }
        return;
    }
    for (const auto& child : node.children) query(*child, center, radius, out);
}

std::vector<int> Octree::query_near(const Vec3& center, double radius) const {
    std::vector<int> out;
    query(*root_, center, radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace cryosim
