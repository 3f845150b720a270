#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ioda/errors.hpp"
#include "ioda/geometry.hpp"

// Strapdown inertial physical model: orientation integration from gyroscope
// rates, sensor-to-navigation frame transformation, gravity removal, and
// double integration of linear accelerations. All functions are pure.

namespace ioda {

constexpr double kStandardGravity = 9.80665;  // m/s^2

inline Vec3 standard_gravity() { return {0.0, 0.0, kStandardGravity}; }

// One timestamped IMU reading in the sensor frame. The accelerometer measures
// specific force, so a stationary device reads +g rotated into its own frame.
struct ImuSample {
    double t = 0.0;  // seconds
    Vec3 w;          // angular rate, rad/s
    Vec3 a;          // acceleration, m/s^2

    bool finite() const { return std::isfinite(t) && w.finite() && a.finite(); }
};

struct ImuSequence {
    std::vector<ImuSample> samples;
    double rate_hz = 100.0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double dt() const { return 1.0 / rate_hz; }
};

struct NavState {
    UnitQuaternion q;  // sensor -> navigation
    Vec3 v;            // m/s
    Vec3 p;            // m
};

// (dl, dpsi): planar displacement magnitude and wrapped heading change over
// one window.
struct PolarVector {
    double dl = 0.0;    // m, >= 0
    double dpsi = 0.0;  // rad, in (-pi, pi]
};

// Integrate body angular rates into orientation. First-order exponential-map
// update, renormalized every step; rates are held constant over each interval.
// out[i] is the attitude after sample i has been applied, so out[0] is q0
// advanced by one step.
inline std::vector<UnitQuaternion> integrate_orientation(
    const std::vector<Vec3>& w_seq, double dt, const UnitQuaternion& q0) {
    if (!(dt > 0.0)) throw UsageError("integrate_orientation: dt must be > 0");
    std::vector<UnitQuaternion> out;
    out.reserve(w_seq.size());
    UnitQuaternion q = q0;
    for (std::size_t i = 0; i < w_seq.size(); ++i) {
        const Vec3& w = w_seq[i];
        if (!w.finite())
            throw DataError("integrate_orientation: non-finite rate at sample " +
                            std::to_string(i));
        q = q * UnitQuaternion::from_rotvec(w * dt);
        q.normalize();
        out.push_back(q);
    }
    return out;
}

// Rotate each sensor-frame vector into the navigation frame by the paired
// attitude.
inline std::vector<Vec3> transform_to_nav(const std::vector<Vec3>& a_seq,
                                          const std::vector<UnitQuaternion>& q_seq) {
    if (a_seq.size() != q_seq.size())
        throw UsageError("transform_to_nav: sequence lengths differ (" +
                         std::to_string(a_seq.size()) + " vs " +
                         std::to_string(q_seq.size()) + ")");
    std::vector<Vec3> out;
    out.reserve(a_seq.size());
    for (std::size_t i = 0; i < a_seq.size(); ++i)
        out.push_back(q_seq[i].rotate(a_seq[i]));
    return out;
}

inline std::vector<Vec3> remove_gravity(const std::vector<Vec3>& a_nav_seq,
                                        const Vec3& g) {
    if (!g.finite()) throw UsageError("remove_gravity: non-finite gravity vector");
    std::vector<Vec3> out;
    out.reserve(a_nav_seq.size());
    for (const Vec3& a : a_nav_seq) out.push_back(a - g);
    return out;
}

// Trapezoidal double integration. Sample i is the acceleration at t_i; the
// outputs are the states at the sample times, with out[0] = (v0, p0).
inline std::pair<std::vector<Vec3>, std::vector<Vec3>> double_integrate(
    const std::vector<Vec3>& lin_acc_seq, double dt, const Vec3& v0,
    const Vec3& p0) {
    if (!(dt > 0.0)) throw UsageError("double_integrate: dt must be > 0");
    std::vector<Vec3> v_seq, p_seq;
    v_seq.reserve(lin_acc_seq.size());
    p_seq.reserve(lin_acc_seq.size());
    Vec3 v = v0, p = p0;
    for (std::size_t i = 0; i < lin_acc_seq.size(); ++i) {
        if (i > 0) {
            Vec3 v_next = v + (lin_acc_seq[i - 1] + lin_acc_seq[i]) * (0.5 * dt);
            p = p + (v + v_next) * (0.5 * dt);
            v = v_next;
        }
        v_seq.push_back(v);
        p_seq.push_back(p);
    }
    return {std::move(v_seq), std::move(p_seq)};
}

// Full physical-model pipeline over one window: integrate attitude, rotate
// accelerations into the navigation frame, subtract gravity, doubly integrate,
// and reduce to the polar vector. Each window restarts the integration, which
// is what keeps the (well known) error blowup of long strapdown runs bounded.
inline PolarVector strapdown_displacement(const ImuSequence& window,
                                          const UnitQuaternion& q0,
                                          const Vec3& v0,
                                          const Vec3& g = standard_gravity()) {
    if (window.empty()) throw UsageError("strapdown_displacement: empty window");
    const double dt = window.dt();

    std::vector<Vec3> rates, accs;
    rates.reserve(window.size());
    accs.reserve(window.size());
    for (std::size_t i = 0; i < window.samples.size(); ++i) {
        const ImuSample& s = window.samples[i];
        if (!s.finite())
            throw DataError("strapdown_displacement: non-finite sample at index " +
                            std::to_string(i));
        rates.push_back(s.w);
        accs.push_back(s.a);
    }

    std::vector<UnitQuaternion> q_steps = integrate_orientation(rates, dt, q0);

    // Attitude paired with sample i is the state at t_i: q0 for the first
    // sample, then the integrated history shifted by one.
    std::vector<UnitQuaternion> q_at_sample(window.size());
    q_at_sample[0] = q0;
    for (std::size_t i = 1; i < window.size(); ++i) q_at_sample[i] = q_steps[i - 1];

    std::vector<Vec3> a_nav = transform_to_nav(accs, q_at_sample);
    std::vector<Vec3> lin = remove_gravity(a_nav, g);
    auto [v_seq, p_seq] = double_integrate(lin, dt, v0, {0.0, 0.0, 0.0});

    // Advance the final velocity/position through the last sample interval so
    // the window covers n * dt seconds.
    Vec3 v_end = v_seq.back() + lin.back() * dt;
    Vec3 p_end = p_seq.back() + (v_seq.back() + v_end) * (0.5 * dt);

    PolarVector out;
    out.dl = p_end.planar_norm();
    out.dpsi = wrap_angle(q_steps.back().yaw() - q0.yaw());
    return out;
}

}  // namespace ioda
