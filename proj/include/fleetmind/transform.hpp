#pragma once

#include <array>
#include <cmath>

namespace fleetmind {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

/// Rigid transform: row-major 3x3 rotation plus translation (meters).
struct RigidTransform {
    std::array<double, 9> r = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 t;

    static RigidTransform identity() { return {}; }

    Vec3 rotate(const Vec3& p) const {
        return {r[0] * p.x + r[1] * p.y + r[2] * p.z,
                r[3] * p.x + r[4] * p.y + r[5] * p.z,
                r[6] * p.x + r[7] * p.y + r[8] * p.z};
    }

    Vec3 apply(const Vec3& p) const { return rotate(p) + t; }

    /// this ∘ other: apply `other` first, then this.
    RigidTransform compose(const RigidTransform& other) const {
        RigidTransform out;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += r[i * 3 + k] * other.r[k * 3 + j];
                out.r[i * 3 + j] = s;
            }
        }
        out.t = rotate(other.t) + t;
        return out;
    }

    RigidTransform inverse() const {
        RigidTransform out;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out.r[i * 3 + j] = r[j * 3 + i];
        Vec3 rt = out.rotate(t);
        out.t = {-rt.x, -rt.y, -rt.z};
        return out;
    }

    double orthonormality_error() const {
        // max |R^T R - I| entry, plus |det - 1|
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += r[k * 3 + i] * r[k * 3 + j];
                worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
            }
        }
        double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                     r[2] * (r[3] * r[7] - r[4] * r[6]);
        return std::max(worst, std::fabs(det - 1.0));
    }

    bool is_orthonormal(double tol = 1e-9) const { return orthonormality_error() <= tol; }

    /// Gram-Schmidt on rows; deterministic, used to keep long composition
    /// chains within rotation-group tolerance.
    RigidTransform orthonormalized() const {
        Vec3 a{r[0], r[1], r[2]};
        Vec3 b{r[3], r[4], r[5]};
        double an = a.norm();
        a = a * (1.0 / an);
        b = b - a * a.dot(b);
        b = b * (1.0 / b.norm());
        Vec3 c = a.cross(b);
        RigidTransform out;
        out.r = {a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z};
        out.t = t;
        return out;
    }
};

/// Rotation about z by `yaw` radians.
inline RigidTransform yaw_transform(double yaw, const Vec3& t = {}) {
    double c = std::cos(yaw), s = std::sin(yaw);
    RigidTransform out;
    out.r = {c, -s, 0, s, c, 0, 0, 0, 1};
    out.t = t;
    return out;
}

/// Angle of the relative rotation between two transforms, in radians.
inline double rotation_angle_between(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform rel = a.compose(b.inverse());
    double tr = rel.r[0] + rel.r[4] + rel.r[8];
    double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

}  // namespace fleetmind
