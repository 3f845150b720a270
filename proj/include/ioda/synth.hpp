#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ioda/dataio.hpp"
#include "ioda/errors.hpp"
#include "ioda/geometry.hpp"
#include "ioda/imu_core.hpp"

// Synthetic pedestrian-walk and sensor-placement simulator. Replaces a motion
// capture rig at desk scale: every generated stream comes with exact poses.
//
// The walk is built from smooth band-limited random processes (sums of
// sinusoids with seeded phases), so heading, speed and their integrals are
// analytic. IMU samples are emitted as discrete increments consistent with the
// strapdown integrator: the gyro carries the exact per-interval rotation rate
// of the device attitude, and nav-frame accelerations are the exact second
// differences of the pose track. Replaying the physical model on a noise-free
// identity-mount stream therefore reproduces the poses to numerical rounding.

namespace ioda {

struct WalkParams {
    double duration = 60.0;       // s
    double speed_mean = 1.4;      // m/s
    double speed_jitter = 0.2;    // m/s, bound on smooth speed variation
    double turn_rate_std = 0.1;   // rad/s
    double step_freq = 2.0;       // Hz, in [1, 3]
    double step_amp = 1.5;        // m/s^2 vertical bounce amplitude
    double rate_hz = 100.0;       // sample rate
    std::uint64_t seed = 1;

    void validate() const {
        if (!(duration > 0.0)) throw UsageError("WalkParams: duration must be > 0");
        if (!(speed_mean > 0.0)) throw UsageError("WalkParams: speed_mean must be > 0");
        if (step_freq < 1.0 || step_freq > 3.0)
            throw UsageError("WalkParams: step_freq must be in [1, 3]");
        if (speed_jitter < 0.0 || turn_rate_std < 0.0 || step_amp < 0.0)
            throw UsageError("WalkParams: noise amplitudes must be >= 0");
        if (!(rate_hz > 0.0)) throw UsageError("WalkParams: rate_hz must be > 0");
    }
};

// Sensor placement: mounting rotation with optional slow sway, constant
// biases, and white measurement noise.
struct DomainTransform {
    UnitQuaternion rot;       // device mounting, applied on top of walk heading
    double sway_amp = 0.0;    // rad
    double sway_freq = 0.0;   // Hz
    Vec3 gyro_bias;           // rad/s
    Vec3 acc_bias;            // m/s^2
    double noise_gyro = 0.0;  // rad/s std
    double noise_acc = 0.0;   // m/s^2 std

    void validate() const {
        if (noise_gyro < 0.0 || noise_acc < 0.0 || sway_amp < 0.0)
            throw UsageError("DomainTransform: noise parameters must be >= 0");
    }

    // Mounting attitude at time t. Sway wobbles about two body axes at
    // incommensurate rates so the motion never phase-locks to the gait.
    UnitQuaternion mount_at(double t) const {
        if (sway_amp == 0.0) return rot;
        double a = sway_amp * std::sin(2.0 * std::numbers::pi * sway_freq * t);
        double b = sway_amp * std::sin(2.0 * std::numbers::pi * sway_freq * 0.731 * t + 0.9);
        return rot * UnitQuaternion::from_rotvec({a, b, 0.0});
    }
};

struct GroundTruthBundle {
    ImuSequence imu;
    std::vector<PoseSample> poses;  // one more entry than imu, shared time axis
    DomainTag domain;
};

namespace synth_detail {

// Smooth stationary random process: a sum of seeded sinusoids. Lorentzian
// amplitude envelope gives mean-reverting (finite correlation time)
// statistics.
struct SinusoidProcess {
    std::vector<double> amp, omega, phase;

    static SinusoidProcess mean_reverting(double target_std, double corr_time,
                                          double max_freq_hz, int n_components,
                                          std::mt19937_64& rng) {
        SinusoidProcess p;
        if (target_std == 0.0 || n_components <= 0) return p;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double theta = 1.0 / corr_time;
        double sumsq = 0.0;
        for (int k = 0; k < n_components; ++k) {
            double f = max_freq_hz * (k + unif(rng)) / n_components;
            double w = 2.0 * std::numbers::pi * f;
            double a = 1.0 / (theta * theta + w * w);  // Lorentzian envelope
            p.amp.push_back(a);
            p.omega.push_back(w);
            p.phase.push_back(2.0 * std::numbers::pi * unif(rng));
            sumsq += 0.5 * a * a;
        }
        double scale = target_std / std::sqrt(sumsq);
        for (double& a : p.amp) a *= scale;
        return p;
    }

    // Same construction, rescaled so |value| <= bound everywhere.
    static SinusoidProcess bounded(double bound, double corr_time,
                                   double max_freq_hz, int n_components,
                                   std::mt19937_64& rng) {
        SinusoidProcess p = mean_reverting(1.0, corr_time, max_freq_hz,
                                           n_components, rng);
        double total = 0.0;
        for (double a : p.amp) total += std::abs(a);
        if (total > 0.0)
            for (double& a : p.amp) a *= bound / total;
        return p;
    }

    double value(double t) const {
        double v = 0.0;
        for (std::size_t k = 0; k < amp.size(); ++k)
            v += amp[k] * std::cos(omega[k] * t + phase[k]);
        return v;
    }

    // Integral from 0 to t.
    double integral(double t) const {
        double v = 0.0;
        for (std::size_t k = 0; k < amp.size(); ++k)
            v += amp[k] / omega[k] * (std::sin(omega[k] * t + phase[k]) - std::sin(phase[k]));
        return v;
    }
};

}  // namespace synth_detail

struct WalkTruth {
    std::vector<PoseSample> poses;  // N + 1 entries at t = 0 .. N*dt
    std::vector<Vec3> nav_acc;      // gravity-free navigation-frame acceleration
    std::vector<Vec3> nav_gyro;     // navigation-frame angular rate (yaw only)
};

// Generate a smooth planar walk. Heading integrates a mean-reverting
// band-limited turn-rate process; speed is the mean plus a bounded smooth
// jitter; the vertical channel bounces at the step frequency. Poses carry the
// exact (quadrature-resolved) track, and nav_acc is the exact second
// difference of the extended track so that pose and acceleration streams are
// discretely consistent.
inline WalkTruth simulate_walk(const WalkParams& params) {
    params.validate();
    const double dt = 1.0 / params.rate_hz;
    const std::int64_t n = static_cast<std::int64_t>(std::llround(params.duration * params.rate_hz));
    if (n < 1) throw UsageError("simulate_walk: duration shorter than one sample");

    std::mt19937_64 rng(params.seed);
    auto turn = synth_detail::SinusoidProcess::mean_reverting(
        params.turn_rate_std, 2.0, 0.5, 24, rng);
    auto jitter = synth_detail::SinusoidProcess::bounded(1.0, 3.0, 0.8, 16, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double bounce_phase = 2.0 * std::numbers::pi * unif(rng);
    const double bounce_omega = 2.0 * std::numbers::pi * params.step_freq;

    auto heading = [&](double t) { return turn.integral(t); };
    auto speed = [&](double t) { return params.speed_mean + params.speed_jitter * jitter.value(t); };
    auto vel_xy = [&](double t) -> std::array<double, 2> {
        double s = speed(t), psi = heading(t);
        return {s * std::cos(psi), s * std::sin(psi)};
    };
    auto z_pos = [&](double t) {
        if (params.step_amp == 0.0) return 0.0;
        // Double integral of step_amp*sin(w t + phi) with the zero-mean
        // velocity branch.
        return -params.step_amp / (bounce_omega * bounce_omega) *
               (std::sin(bounce_omega * t + bounce_phase) - std::sin(bounce_phase));
    };

    // Extended grid i = -1 .. n+1 so central second differences exist at the
    // emitted endpoints.
    const std::int64_t lo = -1, hi = n + 1;
    std::vector<double> px(hi - lo + 1), py(hi - lo + 1), pz(hi - lo + 1);
    auto idx = [&](std::int64_t i) { return static_cast<std::size_t>(i - lo); };

    // Simpson quadrature per interval, marched outward from t = 0.
    px[idx(0)] = 0.0;
    py[idx(0)] = 0.0;
    for (std::int64_t i = 0; i < hi; ++i) {
        double t = i * dt;
        auto v0 = vel_xy(t), vm = vel_xy(t + 0.5 * dt), v1 = vel_xy(t + dt);
        px[idx(i + 1)] = px[idx(i)] + dt / 6.0 * (v0[0] + 4.0 * vm[0] + v1[0]);
        py[idx(i + 1)] = py[idx(i)] + dt / 6.0 * (v0[1] + 4.0 * vm[1] + v1[1]);
    }
    {
        double t = -dt;
        auto v0 = vel_xy(t), vm = vel_xy(t + 0.5 * dt), v1 = vel_xy(0.0);
        px[idx(-1)] = px[idx(0)] - dt / 6.0 * (v0[0] + 4.0 * vm[0] + v1[0]);
        py[idx(-1)] = py[idx(0)] - dt / 6.0 * (v0[1] + 4.0 * vm[1] + v1[1]);
    }
    for (std::int64_t i = lo; i <= hi; ++i) pz[idx(i)] = z_pos(i * dt);

    WalkTruth out;
    out.poses.reserve(n + 1);
    out.nav_acc.reserve(n + 1);
    out.nav_gyro.reserve(n + 1);
    const double inv_dt2 = 1.0 / (dt * dt);
    for (std::int64_t i = 0; i <= n; ++i) {
        double t = i * dt;
        PoseSample p;
        p.t = t;
        p.x = px[idx(i)];
        p.y = py[idx(i)];
        p.psi = wrap_angle(heading(t));
        out.poses.push_back(p);
        out.nav_acc.push_back({(px[idx(i + 1)] - 2.0 * px[idx(i)] + px[idx(i - 1)]) * inv_dt2,
                               (py[idx(i + 1)] - 2.0 * py[idx(i)] + py[idx(i - 1)]) * inv_dt2,
                               (pz[idx(i + 1)] - 2.0 * pz[idx(i)] + pz[idx(i - 1)]) * inv_dt2});
        out.nav_gyro.push_back({0.0, 0.0, turn.value(t)});
    }
    return out;
}

// Project the walk into a sensor frame. The device attitude is the walk
// heading composed with the (possibly swaying) mounting rotation; each gyro
// sample is the exact rotation increment over its interval and each
// accelerometer sample is the device-frame specific force, then bias and
// seeded white noise are applied. Emits one IMU sample per pose interval.
inline ImuSequence render_imu(const std::vector<PoseSample>& poses,
                              const std::vector<Vec3>& nav_acc,
                              const std::vector<Vec3>& nav_gyro,
                              const DomainTransform& transform,
                              const Vec3& g = standard_gravity(),
                              std::uint64_t seed = 0, double rate_hz = 100.0) {
    transform.validate();
    if (poses.size() < 2) throw UsageError("render_imu: need at least 2 poses");
    if (nav_acc.size() != poses.size() || nav_gyro.size() != poses.size())
        throw UsageError("render_imu: nav streams must align with poses");

    const double dt = 1.0 / rate_hz;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto noise3 = [&](double std) -> Vec3 {
        if (std == 0.0) return {0.0, 0.0, 0.0};
        return {std * gauss(rng), std * gauss(rng), std * gauss(rng)};
    };

    ImuSequence seq;
    seq.rate_hz = rate_hz;
    seq.samples.reserve(poses.size() - 1);
    UnitQuaternion q_i = UnitQuaternion::yaw_rotation(poses[0].psi) * transform.mount_at(poses[0].t);
    for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
        UnitQuaternion q_next = UnitQuaternion::yaw_rotation(poses[i + 1].psi) *
                                transform.mount_at(poses[i + 1].t);
        Vec3 rate = (q_i.conjugate() * q_next).to_rotvec() / dt;

        ImuSample s;
        s.t = poses[i].t;
        s.w = rate + transform.gyro_bias + noise3(transform.noise_gyro);
        s.a = q_i.rotate_inverse(nav_acc[i] + g) + transform.acc_bias +
              noise3(transform.noise_acc);
        seq.samples.push_back(s);
        q_i = q_next;
    }
    return seq;
}

inline GroundTruthBundle generate_bundle(const WalkParams& walk,
                                         const DomainTransform& transform,
                                         const DomainTag& domain,
                                         std::uint64_t noise_seed) {
    WalkTruth truth = simulate_walk(walk);
    GroundTruthBundle bundle;
    bundle.imu = render_imu(truth.poses, truth.nav_acc, truth.nav_gyro, transform,
                            standard_gravity(), noise_seed, walk.rate_hz);
    bundle.poses = std::move(truth.poses);
    bundle.domain = domain;
    return bundle;
}

struct DomainPair {
    std::vector<LabelledWindow> source;      // labelled training windows
    std::vector<Window> target_train;        // unlabelled
    std::vector<LabelledWindow> target_eval; // held-out, labelled
    GroundTruthBundle source_bundle;
    GroundTruthBundle target_bundle;
};

// Build the unpaired two-domain dataset: independently seeded walks rendered
// through the two placements. Target labels are only attached to the held-out
// time-contiguous evaluation tail.
inline DomainPair make_domain_pair(const WalkParams& walk,
                                   const DomainTransform& source_transform,
                                   const DomainTransform& target_transform,
                                   int n, int stride,
                                   std::uint64_t source_seed,
                                   std::uint64_t target_seed,
                                   double eval_fraction = 0.2) {
    if (source_seed == target_seed)
        throw UsageError("make_domain_pair: source and target seeds must differ "
                         "(equal seeds would create paired trajectories)");
    if (eval_fraction <= 0.0 || eval_fraction >= 1.0)
        throw UsageError("make_domain_pair: eval_fraction must be in (0, 1)");

    WalkParams source_walk = walk;
    source_walk.seed = source_seed;
    WalkParams target_walk = walk;
    target_walk.seed = target_seed;

    DomainPair pair;
    pair.source_bundle = generate_bundle(source_walk, source_transform,
                                         {"source"}, source_seed + 101);
    pair.target_bundle = generate_bundle(target_walk, target_transform,
                                         {"target"}, target_seed + 101);

    std::vector<Window> source_windows =
        make_windows(pair.source_bundle.imu, n, stride, pair.source_bundle.domain);
    for (Window& w : source_windows)
        pair.source.push_back({w, label_window(w, pair.source_bundle.poses)});

    std::vector<Window> target_windows =
        make_windows(pair.target_bundle.imu, n, stride, pair.target_bundle.domain);
    std::size_t n_eval = static_cast<std::size_t>(
        std::llround(eval_fraction * target_windows.size()));
    std::size_t n_train = target_windows.size() - n_eval;
    for (std::size_t i = 0; i < target_windows.size(); ++i) {
        if (i < n_train) {
            pair.target_train.push_back(target_windows[i]);
        } else {
            pair.target_eval.push_back(
                {target_windows[i], label_window(target_windows[i], pair.target_bundle.poses)});
        }
    }
    return pair;
}

struct DomainPreset {
    DomainTag tag;
    DomainTransform transform;
    double step_amp_scale = 1.0;  // trolley kills the gait bounce
};

// Desk-scale placement presets. Handheld: near-level with gentle arm sway.
// Pocket: large fixed tilt, gait-locked sway, larger bias and noise. Trolley:
// flat mount, no step bounce, low noise.
inline DomainPreset domain_preset(const std::string& name) {
    DomainPreset p;
    p.tag.name = name;
    if (name == "synthetic-handheld") {
        p.transform.rot = UnitQuaternion::from_rotvec({0.12, 0.05, 0.0});
        p.transform.sway_amp = 0.04;
        p.transform.sway_freq = 0.8;
        p.transform.gyro_bias = {0.002, -0.001, 0.0015};
        p.transform.acc_bias = {0.02, -0.015, 0.025};
        p.transform.noise_gyro = 0.004;
        p.transform.noise_acc = 0.06;
    } else if (name == "synthetic-pocket") {
        p.transform.rot = UnitQuaternion::from_rotvec({1.25, 0.3, 0.0}) *
                          UnitQuaternion::yaw_rotation(0.7);
        p.transform.sway_amp = 0.10;
        p.transform.sway_freq = 1.9;
        p.transform.gyro_bias = {0.012, -0.008, 0.01};
        p.transform.acc_bias = {0.12, 0.08, -0.1};
        p.transform.noise_gyro = 0.008;
        p.transform.noise_acc = 0.12;
    } else if (name == "synthetic-trolley") {
        p.transform.rot = UnitQuaternion::from_rotvec({0.02, -0.02, 0.0});
        p.transform.sway_amp = 0.01;
        p.transform.sway_freq = 0.4;
        p.transform.gyro_bias = {0.001, 0.0005, -0.001};
        p.transform.acc_bias = {0.01, 0.01, -0.02};
        p.transform.noise_gyro = 0.002;
        p.transform.noise_acc = 0.03;
        p.step_amp_scale = 0.0;
    } else {
        throw UsageError("unknown domain preset: " + name);
    }
    return p;
}

inline std::vector<std::string> domain_preset_names() {
    return {"synthetic-handheld", "synthetic-pocket", "synthetic-trolley"};
}

}  // namespace ioda
