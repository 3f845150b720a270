#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ioda/errors.hpp"
#include "ioda/imu_core.hpp"

// Ingestion of IMU and ground-truth pose files, windowing, polar-vector
// labelling, normalization statistics, and dataset splitting.
//
// File formats:
//   IMU CSV:  header "t,wx,wy,wz,ax,ay,az"; seconds, rad/s, m/s^2.
//   Pose CSV: header "t,x,y,psi"; seconds, meters, radians.
//   Dataset manifest: "key = value" lines with keys imu, poses (optional),
//   domain, rate.

namespace ioda {

struct PoseSample {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0;  // rad, wrapped to (-pi, pi]
};

struct DomainTag {
    std::string name;

    bool operator==(const DomainTag& o) const { return name == o.name; }
    bool operator<(const DomainTag& o) const { return name < o.name; }
};

// Fixed-length window of raw IMU frames. Channel order per frame:
// ax, ay, az, wx, wy, wz.
struct Window {
    std::vector<double> frames;  // row-major, n x 6
    int n = 0;
    DomainTag domain;
    double t_start = 0.0;
    double rate_hz = 100.0;

    double at(int frame, int channel) const { return frames[frame * 6 + channel]; }
    double& at(int frame, int channel) { return frames[frame * 6 + channel]; }
    double duration() const { return n / rate_hz; }
};

struct LabelledWindow {
    Window window;
    PolarVector label;
};

struct NormStats {
    std::array<double, 6> mean{};
    std::array<double, 6> std{};
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& field, const std::string& file,
                           std::size_t row, const std::string& col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(field, &pos);
        if (pos != field.size() && !trim(field.substr(pos)).empty())
            throw std::invalid_argument("trailing");
        if (!std::isfinite(v))
            throw DataError(file + ": non-finite value in column '" + col +
                            "' at row " + std::to_string(row));
        return v;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception&) {
        throw DataError(file + ": cannot parse column '" + col + "' at row " +
                        std::to_string(row));
    }
}

}  // namespace detail

inline ImuSequence load_imu_csv(const std::string& path, double rate_hz = 100.0) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open IMU file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (detail::trim(line) != "t,wx,wy,wz,ax,ay,az")
        throw DataError(path + ": bad IMU CSV header, expected t,wx,wy,wz,ax,ay,az");

    ImuSequence seq;
    seq.rate_hz = rate_hz;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 7)
            throw DataError(path + ": expected 7 columns at row " + std::to_string(row));
        ImuSample s;
        s.t = detail::parse_double(f[0], path, row, "t");
        s.w = {detail::parse_double(f[1], path, row, "wx"),
               detail::parse_double(f[2], path, row, "wy"),
               detail::parse_double(f[3], path, row, "wz")};
        s.a = {detail::parse_double(f[4], path, row, "ax"),
               detail::parse_double(f[5], path, row, "ay"),
               detail::parse_double(f[6], path, row, "az")};
        if (s.t < 0.0)
            throw DataError(path + ": negative timestamp at row " + std::to_string(row));
        if (!seq.samples.empty() && s.t <= seq.samples.back().t)
            throw DataError(path + ": non-increasing timestamp at row " +
                            std::to_string(row));
        seq.samples.push_back(s);
    }
    if (seq.samples.empty()) throw DataError(path + ": no samples");

    if (seq.samples.size() >= 2) {
        std::vector<double> dts;
        dts.reserve(seq.samples.size() - 1);
        for (std::size_t i = 1; i < seq.samples.size(); ++i)
            dts.push_back(seq.samples[i].t - seq.samples[i - 1].t);
        std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
        double median_dt = dts[dts.size() / 2];
        if (std::abs(median_dt - 1.0 / rate_hz) > 0.1 / rate_hz)
            throw DataError(path + ": median sample interval " +
                            std::to_string(median_dt) +
                            " inconsistent with rate " + std::to_string(rate_hz));
    }
    return seq;
}

inline std::vector<PoseSample> load_pose_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pose file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (detail::trim(line) != "t,x,y,psi")
        throw DataError(path + ": bad pose CSV header, expected t,x,y,psi");

    std::vector<PoseSample> poses;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 4)
            throw DataError(path + ": expected 4 columns at row " + std::to_string(row));
        PoseSample p;
        p.t = detail::parse_double(f[0], path, row, "t");
        p.x = detail::parse_double(f[1], path, row, "x");
        p.y = detail::parse_double(f[2], path, row, "y");
        p.psi = wrap_angle(detail::parse_double(f[3], path, row, "psi"));
        if (!poses.empty() && p.t <= poses.back().t)
            throw DataError(path + ": non-increasing timestamp at row " +
                            std::to_string(row));
        poses.push_back(p);
    }
    if (poses.empty()) throw DataError(path + ": no pose samples");
    return poses;
}

inline void write_imu_csv(const std::string& path, const ImuSequence& seq) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write IMU file: " + path);
    out << "t,wx,wy,wz,ax,ay,az\n";
    char buf[256];
    for (const ImuSample& s : seq.samples) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      s.t, s.w.x, s.w.y, s.w.z, s.a.x, s.a.y, s.a.z);
        out << buf;
    }
}

inline void write_pose_csv(const std::string& path,
                           const std::vector<PoseSample>& poses) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write pose file: " + path);
    out << "t,x,y,psi\n";
    char buf[160];
    for (const PoseSample& p : poses) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.12g,%.12g,%.12g\n", p.t, p.x, p.y,
                      p.psi);
        out << buf;
    }
}

// Segment an IMU sequence into fixed-length windows. For len >= n the count is
// floor((len - n) / stride) + 1; shorter sequences yield none.
inline std::vector<Window> make_windows(const ImuSequence& seq, int n, int stride,
                                        const DomainTag& domain) {
    if (n < 1) throw UsageError("make_windows: n must be >= 1");
    if (stride < 1) throw UsageError("make_windows: stride must be >= 1");
    std::vector<Window> out;
    const std::int64_t len = static_cast<std::int64_t>(seq.size());
    if (len < n) return out;
    out.reserve(static_cast<std::size_t>((len - n) / stride) + 1);
    for (std::int64_t start = 0; start + n <= len; start += stride) {
        Window w;
        w.n = n;
        w.domain = domain;
        w.rate_hz = seq.rate_hz;
        w.t_start = seq.samples[start].t;
        w.frames.resize(static_cast<std::size_t>(n) * 6);
        for (int i = 0; i < n; ++i) {
            const ImuSample& s = seq.samples[start + i];
            w.at(i, 0) = s.a.x;
            w.at(i, 1) = s.a.y;
            w.at(i, 2) = s.a.z;
            w.at(i, 3) = s.w.x;
            w.at(i, 4) = s.w.y;
            w.at(i, 5) = s.w.z;
        }
        out.push_back(std::move(w));
    }
    return out;
}

// Polar vector between two poses: planar chord length and wrapped heading
// change.
inline PolarVector polar_from_poses(const PoseSample& a, const PoseSample& b) {
    PolarVector pv;
    pv.dl = std::hypot(b.x - a.x, b.y - a.y);
    pv.dpsi = wrap_angle(b.psi - a.psi);
    return pv;
}

// Interpolated pose at time t. Linear in x, y; shortest-arc in psi.
inline PoseSample interpolate_pose(const std::vector<PoseSample>& poses, double t) {
    if (poses.empty()) throw DataError("interpolate_pose: no poses");
    if (t < poses.front().t || t > poses.back().t)
        throw DataError("interpolate_pose: time " + std::to_string(t) +
                        " outside pose range [" + std::to_string(poses.front().t) +
                        ", " + std::to_string(poses.back().t) + "]");
    auto it = std::lower_bound(
        poses.begin(), poses.end(), t,
        [](const PoseSample& p, double tt) { return p.t < tt; });
    if (it == poses.begin()) return poses.front();
    const PoseSample& hi = *it;
    const PoseSample& lo = *(it - 1);
    if (hi.t == lo.t) return hi;
    double u = (t - lo.t) / (hi.t - lo.t);
    PoseSample p;
    p.t = t;
    p.x = lo.x + u * (hi.x - lo.x);
    p.y = lo.y + u * (hi.y - lo.y);
    p.psi = wrap_angle(lo.psi + u * wrap_angle(hi.psi - lo.psi));
    return p;
}

// Ground-truth label for a window: pose change between the window start and
// end times.
inline PolarVector label_window(const Window& window,
                                const std::vector<PoseSample>& poses) {
    double t0 = window.t_start;
    double t1 = window.t_start + window.duration();
    PoseSample a = interpolate_pose(poses, t0);
    PoseSample b = interpolate_pose(poses, t1);
    return polar_from_poses(a, b);
}

inline NormStats fit_norm_stats(const std::vector<Window>& windows) {
    if (windows.size() < 2)
        throw UsageError("fit_norm_stats: need at least 2 windows");
    NormStats stats;
    std::array<double, 6> sum{}, sumsq{};
    std::size_t count = 0;
    for (const Window& w : windows) {
        for (int i = 0; i < w.n; ++i)
            for (int c = 0; c < 6; ++c) {
                double v = w.at(i, c);
                sum[c] += v;
                sumsq[c] += v * v;
            }
        count += w.n;
    }
    for (int c = 0; c < 6; ++c) {
        stats.mean[c] = sum[c] / count;
        double var = sumsq[c] / count - stats.mean[c] * stats.mean[c];
        stats.std[c] = std::sqrt(std::max(var, 0.0));
        if (stats.std[c] < 1e-6) stats.std[c] = 1e-6;  // constant-channel floor
    }
    return stats;
}

inline Window apply_norm(const Window& window, const NormStats& stats) {
    Window out = window;
    for (int i = 0; i < out.n; ++i)
        for (int c = 0; c < 6; ++c)
            out.at(i, c) = (window.at(i, c) - stats.mean[c]) / stats.std[c];
    return out;
}

inline Window invert_norm(const Window& window, const NormStats& stats) {
    Window out = window;
    for (int i = 0; i < out.n; ++i)
        for (int c = 0; c < 6; ++c)
            out.at(i, c) = window.at(i, c) * stats.std[c] + stats.mean[c];
    return out;
}

inline double t_start_of(const Window& w) { return w.t_start; }
inline double t_start_of(const LabelledWindow& w) { return w.window.t_start; }

// Deterministic train/validation/test split. The test partition is the
// time-contiguous tail (held-out trajectory segment); train and validation are
// a seeded shuffle of the remainder.
template <typename W>
inline std::tuple<std::vector<W>, std::vector<W>, std::vector<W>> split_dataset(
    const std::vector<W>& windows, std::array<double, 3> ratios,
    std::uint64_t seed) {
    double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw UsageError("split_dataset: ratios must sum to 1");

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return t_start_of(windows[a]) < t_start_of(windows[b]);
    });

    std::size_t n = windows.size();
    std::size_t n_test = static_cast<std::size_t>(std::llround(ratios[2] * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios[1] * n));
    if (n_test + n_val > n) throw UsageError("split_dataset: ratios too large");

    std::vector<std::size_t> head(order.begin(), order.end() - n_test);
    std::mt19937_64 rng(seed);
    std::shuffle(head.begin(), head.end(), rng);

    std::tuple<std::vector<W>, std::vector<W>, std::vector<W>> result;
    auto& [train, val, test] = result;
    for (std::size_t i = 0; i < head.size(); ++i)
        (i < head.size() - n_val ? train : val).push_back(windows[head[i]]);
    for (std::size_t i = n - n_test; i < n; ++i)
        test.push_back(windows[order[i]]);
    return result;
}

struct DatasetManifest {
    std::string imu_path;
    std::optional<std::string> pose_path;
    std::string domain;
    double rate_hz = 100.0;
};

inline DatasetManifest parse_dataset_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    DatasetManifest m;
    bool have_imu = false, have_domain = false;
    std::string line;
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    while (std::getline(in, line)) {
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ": manifest line without '=': " + s);
        std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (key == "imu") {
            m.imu_path = (base / value).string();
            have_imu = true;
        } else if (key == "poses") {
            m.pose_path = (base / value).string();
        } else if (key == "domain") {
            m.domain = value;
            have_domain = true;
        } else if (key == "rate") {
            m.rate_hz = detail::parse_double(value, path, 0, "rate");
        } else {
            throw DataError(path + ": unknown manifest key '" + key + "'");
        }
    }
    if (!have_imu) throw DataError(path + ": manifest missing 'imu' key");
    if (!have_domain) throw DataError(path + ": manifest missing 'domain' key");
    return m;
}

inline void write_dataset_manifest(const std::string& path,
                                   const std::string& imu_rel,
                                   const std::optional<std::string>& pose_rel,
                                   const std::string& domain, double rate_hz) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << "imu = " << imu_rel << "\n";
    if (pose_rel) out << "poses = " << *pose_rel << "\n";
    out << "domain = " << domain << "\n";
    out << "rate = " << rate_hz << "\n";
}

}  // namespace ioda
