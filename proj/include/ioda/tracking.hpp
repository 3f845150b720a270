#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ioda/dataio.hpp"
#include "ioda/errors.hpp"
#include "ioda/geometry.hpp"
#include "ioda/imu_core.hpp"

// Dead-reckoning path integration from polar-vector sequences, plus
// trajectory-level error metrics and exports.

namespace ioda {

struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0;  // rad, wrapped to (-pi, pi]
};

struct Trajectory {
    std::vector<Pose2D> poses;  // starts at the provided initial pose
    double dt_window = 2.0;     // seconds per step
};

// Chain polar vectors from an initial pose: the heading is updated first, then
// the displacement is projected along the new heading.
inline Trajectory dead_reckon(const Pose2D& p0,
                              const std::vector<PolarVector>& polars,
                              double dt_window = 2.0) {
    Trajectory traj;
    traj.dt_window = dt_window;
    traj.poses.reserve(polars.size() + 1);
    Pose2D p = p0;
    p.psi = wrap_angle(p.psi);
    traj.poses.push_back(p);
    for (std::size_t k = 0; k < polars.size(); ++k) {
        const PolarVector& pv = polars[k];
        if (pv.dl < 0.0)
            throw UsageError("dead_reckon: negative displacement at step " +
                             std::to_string(k));
        p.psi = wrap_angle(p.psi + pv.dpsi);
        p.x += pv.dl * std::cos(p.psi);
        p.y += pv.dl * std::sin(p.psi);
        traj.poses.push_back(p);
    }
    return traj;
}

// Root-mean-square pointwise planar error after aligning the start positions
// only; dead reckoning stays anchored at its initial pose.
inline double ate(const Trajectory& traj, const Trajectory& gt) {
    if (traj.poses.size() != gt.poses.size())
        throw UsageError("ate: trajectories differ in length (" +
                         std::to_string(traj.poses.size()) + " vs " +
                         std::to_string(gt.poses.size()) + ")");
    if (traj.poses.empty()) throw UsageError("ate: empty trajectory");
    double ox = gt.poses[0].x - traj.poses[0].x;
    double oy = gt.poses[0].y - traj.poses[0].y;
    double se = 0.0;
    for (std::size_t i = 0; i < traj.poses.size(); ++i) {
        double ex = traj.poses[i].x + ox - gt.poses[i].x;
        double ey = traj.poses[i].y + oy - gt.poses[i].y;
        se += ex * ex + ey * ey;
    }
    return std::sqrt(se / traj.poses.size());
}

// Ground-truth pose at each window boundary time.
inline Trajectory resample_gt(const std::vector<PoseSample>& poses,
                              const std::vector<double>& boundary_times,
                              double dt_window = 2.0) {
    Trajectory traj;
    traj.dt_window = dt_window;
    traj.poses.reserve(boundary_times.size());
    for (double t : boundary_times) {
        PoseSample p = interpolate_pose(poses, t);
        traj.poses.push_back({p.x, p.y, p.psi});
    }
    return traj;
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                                 double t0 = 0.0) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trajectory file: " + path);
    out << "k,t,x,y,psi\n";
    char buf[200];
    for (std::size_t k = 0; k < traj.poses.size(); ++k) {
        const Pose2D& p = traj.poses[k];
        std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.12g,%.12g,%.12g\n", k,
                      t0 + static_cast<double>(k) * traj.dt_window, p.x, p.y, p.psi);
        out << buf;
    }
}

// Self-contained SVG plot: estimated trajectory in blue (#1f77b4), optional
// ground truth in orange (#ff7f0e), start marked with a filled circle. Axes
// are meters, uniformly scaled to fit a 800x800 canvas with a 40 px margin.
inline void write_trajectory_svg(const std::string& path, const Trajectory& traj,
                                 const Trajectory* ground_truth = nullptr) {
    if (traj.poses.empty()) throw UsageError("write_trajectory_svg: empty trajectory");
    double min_x = traj.poses[0].x, max_x = min_x;
    double min_y = traj.poses[0].y, max_y = min_y;
    auto grow = [&](const Trajectory& t) {
        for (const Pose2D& p : t.poses) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    };
    grow(traj);
    if (ground_truth) grow(*ground_truth);

    const double size = 800.0, margin = 40.0;
    double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
    double s = (size - 2.0 * margin) / span;
    auto sx = [&](double x) { return margin + (x - min_x) * s; };
    auto sy = [&](double y) { return size - margin - (y - min_y) * s; };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write plot file: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
        << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << " " << size
        << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto polyline = [&](const Trajectory& t, const char* color) {
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        char buf[64];
        for (const Pose2D& p : t.poses) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(p.x), sy(p.y));
            out << buf;
        }
        out << "\"/>\n";
    };
    if (ground_truth) polyline(*ground_truth, "#ff7f0e");
    polyline(traj, "#1f77b4");
    out << "<circle cx=\"" << sx(traj.poses[0].x) << "\" cy=\"" << sy(traj.poses[0].y)
        << "\" r=\"5\" fill=\"#1f77b4\"/>\n";
    out << "<text x=\"" << margin << "\" y=\"" << margin / 2.0
        << "\" font-family=\"sans-serif\" font-size=\"14\">trajectory (blue)"
        << (ground_truth ? " vs ground truth (orange)" : "") << "</text>\n";
    out << "</svg>\n";
}

}  // namespace ioda
