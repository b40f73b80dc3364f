#pragma once
#include <cmath>

#include "cryosim/vec3.hpp"

namespace cryosim {

// Unit quaternion (w, x, y, z). Kept normalized within 1e-9; renormalize()
// is applied after composition when drift exceeds that tolerance.
struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Quaternion() = default;
    Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    static Quaternion identity() { return {}; }

    static Quaternion from_axis_angle(const Vec3& axis, double angle_rad) {
        Vec3 a = axis.normalized();
        double h = 0.5 * angle_rad;
        double s = std::sin(h);
        return Quaternion{std::cos(h), a.x * s, a.y * s, a.z * s};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quaternion normalized() const {
        double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    void renormalize(double tol = 1e-9) {
        double n = norm();
        if (std::abs(n - 1.0) > tol) {
            w /= n; x /= n; y /= n; z /= n;
        }
    }

    Quaternion conjugate() const { return {w, -x, -y, -z}; }

    Quaternion operator*(const Quaternion& q) const {
        return {w * q.w - x * q.x - y * q.y - z * q.z,
                w * q.x + x * q.w + y * q.z - z * q.y,
                w * q.y - x * q.z + y * q.w + z * q.x,
                w * q.z + x * q.y - y * q.x + z * q.w};
    }

    // Sign convention: w >= 0; on the w == 0 great circle the first nonzero
    // component of (x, y, z) is made positive.
    Quaternion canonicalized() const {
        const Quaternion& q = *this;
        bool flip = q.w < 0.0;
        if (q.w == 0.0) {
            if (q.x != 0.0) flip = q.x < 0.0;
            else if (q.y != 0.0) flip = q.y < 0.0;
            else flip = q.z < 0.0;
        }
        return flip ? Quaternion{-q.w, -q.x, -q.y, -q.z} : q;
    }

    Vec3 rotate(const Vec3& v) const {
        // q v q*
        Vec3 u{x, y, z};
        Vec3 t = u.cross(v) * 2.0;
        return v + t * w + u.cross(t);
    }

    Mat3 to_matrix() const {
        double xx = x * x, yy = y * y, zz = z * z;
        double wx = w * x, wy = w * y, wz = w * z;
        double xy = x * y, xz = x * z, yz = y * z;
        Mat3 r;
        r.m = {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
               2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
               2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
        return r;
    }
};

} // namespace cryosim
