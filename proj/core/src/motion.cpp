#include "molang/motion.hpp"

#include <cmath>

namespace molang {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}

// Facing direction from the shoulder line: with z up and the left shoulder on
// the body's +Y side, facing = (s_y, -s_x) for s = left - right.
double heading_from_frame(const Tensor& pos, long t, int lsh, int rsh) {
    const double sx = pos.at(t, lsh, 0) - pos.at(t, rsh, 0);
    const double sy = pos.at(t, lsh, 1) - pos.at(t, rsh, 1);
    if (sx == 0.0 && sy == 0.0) return 0.0;
    return std::atan2(-sx, sy);
}

}  // namespace

long feature_width(int joint_count) { return 6L * (joint_count - 1) + 4L; }

MotionFeatures features_from_positions(const MotionSequence& motion) {
    const long m = motion.frame_count();
    const int j = motion.joint_count();
    if (m < 2) throw InsufficientFramesError("feature encoding needs at least 2 frames, got " + std::to_string(m));
    if (motion.positions.rank() != 3 || motion.positions.dim(1) != j || motion.positions.dim(2) != 3)
        throw ShapeError("positions must be [M, J, 3], got " + shape_str(motion.positions.shape()));

    const Tensor& p = motion.positions;
    const long d = feature_width(j);
    const long rel_end = 3L * (j - 1);
    const int lsh = motion.skeleton.index_of("left_shoulder");
    const int rsh = motion.skeleton.index_of("right_shoulder");

    MotionFeatures f;
    f.fps = motion.fps;
    f.frames = Tensor({m, d});
    f.root_init[0] = p.at(0, 0, 0);
    f.root_init[1] = p.at(0, 0, 1);

    double prev_heading = heading_from_frame(p, 0, lsh, rsh);
    for (long t = 0; t < m; ++t) {
        double* row = f.frames.data() + t * d;
        for (int q = 1; q < j; ++q)
            for (int c = 0; c < 3; ++c) row[3 * (q - 1) + c] = p.at(t, q, c) - p.at(t, 0, c);
        if (t == 0) {
            row[rel_end] = 0.0;
            row[rel_end + 1] = 0.0;
            row[rel_end + 2] = 0.0;
        } else {
            row[rel_end] = motion.fps * (p.at(t, 0, 0) - p.at(t - 1, 0, 0));
            row[rel_end + 1] = motion.fps * (p.at(t, 0, 1) - p.at(t - 1, 0, 1));
            const double h = heading_from_frame(p, t, lsh, rsh);
            row[rel_end + 2] = motion.fps * wrap_angle(h - prev_heading);
            prev_heading = h;
        }
        row[rel_end + 3] = p.at(t, 0, 2);
        for (int q = 1; q < j; ++q)
            for (int c = 0; c < 3; ++c)
                row[rel_end + 4 + 3 * (q - 1) + c] =
                    t == 0 ? 0.0 : motion.fps * (p.at(t, q, c) - p.at(t - 1, q, c));
    }
    return f;
}

MotionSequence positions_from_features(const Skeleton& skeleton, const MotionFeatures& features) {
    const int j = skeleton.joint_count();
    const long d = feature_width(j);
    if (features.width() != d)
        throw ShapeError("feature width " + std::to_string(features.width()) + " does not match J=" +
                         std::to_string(j) + " (expected " + std::to_string(d) + ")");
    if (features.fps <= 0.0) throw ContractError("fps must be positive");
    const long m = features.frame_count();
    const long rel_end = 3L * (j - 1);

    MotionSequence out;
    out.skeleton = skeleton;
    out.fps = features.fps;
    out.positions = Tensor({m, j, 3});

    double rx = features.root_init[0];
    double ry = features.root_init[1];
    for (long t = 0; t < m; ++t) {
        const double* row = features.frames.data() + t * d;
        if (t > 0) {
            rx += row[rel_end] / features.fps;
            ry += row[rel_end + 1] / features.fps;
        }
        out.positions.at(t, 0, 0) = rx;
        out.positions.at(t, 0, 1) = ry;
        out.positions.at(t, 0, 2) = row[rel_end + 3];
        for (int q = 1; q < j; ++q) {
            out.positions.at(t, q, 0) = rx + row[3 * (q - 1)];
            out.positions.at(t, q, 1) = ry + row[3 * (q - 1) + 1];
            out.positions.at(t, q, 2) = row[rel_end + 3] + row[3 * (q - 1) + 2];
        }
    }
    return out;
}

double motion_amplitude(const MotionSequence& motion) {
    const Tensor& p = motion.positions;
    if (p.empty()) return 0.0;
    double amp = 0.0;
    const long m = p.dim(0), j = p.dim(1);
    for (long q = 0; q < j; ++q) {
        for (int c = 0; c < 3; ++c) {
            double lo = p.at(0, q, c), hi = lo;
            for (long t = 1; t < m; ++t) {
                const double v = p.at(t, q, c);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            amp = std::max(amp, hi - lo);
        }
    }
    return amp;
}

}  // namespace molang
