#pragma once

#include <cmath>
#include <numbers>

namespace ioda {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double planar_norm() const { return std::sqrt(x * x + y * y); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Reduce an angle to (-pi, pi].
inline double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

// Unit quaternion representing a rotation (sensor -> navigation when used as
// an attitude). Normalized on construction and after every integration step.
struct UnitQuaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    UnitQuaternion() = default;
    UnitQuaternion(double w_, double x_, double y_, double z_)
        : w(w_), x(x_), y(y_), z(z_) {
        normalize();
    }

    static UnitQuaternion identity() { return {}; }

    static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
        double n = axis.norm();
        if (n == 0.0) return identity();
        double half = 0.5 * angle;
        double s = std::sin(half) / n;
        return {std::cos(half), axis.x * s, axis.y * s, axis.z * s};
    }

    // Exponential map: rotation vector (axis * angle) -> quaternion.
    static UnitQuaternion from_rotvec(const Vec3& rv) {
        double angle = rv.norm();
        if (angle < 1e-12) {
            // First-order series keeps the map smooth at zero.
            return {1.0, 0.5 * rv.x, 0.5 * rv.y, 0.5 * rv.z};
        }
        return from_axis_angle(rv, angle);
    }

    static UnitQuaternion yaw_rotation(double psi) {
        return from_axis_angle({0.0, 0.0, 1.0}, psi);
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    void normalize() {
        double n = norm();
        if (n > 0.0) {
            w /= n;
            x /= n;
            y /= n;
            z /= n;
        } else {
            w = 1.0;
            x = y = z = 0.0;
        }
    }

    UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }

    // Hamilton product; composes rotations (this applied after o in the body
    // convention q' = q * dq).
    UnitQuaternion operator*(const UnitQuaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    // Rotate a vector by this quaternion (body -> reference frame).
    Vec3 rotate(const Vec3& v) const {
        // v' = v + 2 q_v x (q_v x v + w v)
        Vec3 qv{x, y, z};
        Vec3 t = qv.cross(v) * 2.0;
        return v + t * w + qv.cross(t);
    }

    Vec3 rotate_inverse(const Vec3& v) const { return conjugate().rotate(v); }

    // Logarithmic map: rotation vector of this quaternion.
    Vec3 to_rotvec() const {
        double qw = w;
        Vec3 qv{x, y, z};
        double sin_half = qv.norm();
        if (qw < 0.0) {  // take the short arc
            qw = -qw;
            qv = qv * -1.0;
        }
        if (sin_half < 1e-12) return qv * 2.0;
        double angle = 2.0 * std::atan2(sin_half, qw);
        return qv * (angle / sin_half);
    }

    // Heading of the body x-axis projected onto the navigation x-y plane.
    double yaw() const {
        Vec3 bx = rotate({1.0, 0.0, 0.0});
        return std::atan2(bx.y, bx.x);
    }
};

}  // namespace ioda
