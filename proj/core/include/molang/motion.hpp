#pragma once

#include <string>
#include <vector>

#include "molang/skeleton.hpp"
#include "molang/tensor.hpp"

namespace molang {

// Frame-wise world-space poses: positions is [M, J, 3], meters, z up.
struct MotionSequence {
    Skeleton skeleton;
    double fps = 20.0;
    Tensor positions;

    long frame_count() const { return positions.empty() ? 0 : positions.dim(0); }
    int joint_count() const { return skeleton.joint_count(); }
};

// Invertible per-frame encoding. Layout per frame, for J joints
// (D = 6(J-1) + 4 = 76 at J = 13):
//   [0, 3(J-1))          pelvis-relative xyz of joints 1..J-1
//   [3(J-1), 3(J-1)+2)   pelvis XY velocity, fps * delta, v_0 = 0
//   [3(J-1)+2]           yaw rate from the shoulder line, rad/s, 0 at t=0
//   [3(J-1)+3]           pelvis height (world z)
//   [3(J-1)+4, D)        world xyz velocity of joints 1..J-1, v_0 = 0
// Pelvis XY itself is carried only as root_init plus the integrated velocity,
// which is what makes the codec translation-equivariant in XY.
struct MotionFeatures {
    double fps = 20.0;
    Tensor frames;  // [M, D]
    double root_init[2] = {0.0, 0.0};

    long frame_count() const { return frames.empty() ? 0 : frames.dim(0); }
    long width() const { return frames.empty() ? 0 : frames.dim(1); }
};

struct CaptionedMotion {
    std::string id;
    MotionSequence motion;
    std::vector<std::string> captions;
};

long feature_width(int joint_count);

// Requires M >= 2 (velocities need a previous frame); throws
// InsufficientFramesError otherwise.
MotionFeatures features_from_positions(const MotionSequence& motion);

// Exact inverse up to root_init and float tolerance; throws ShapeError if the
// feature width does not match the skeleton's joint count.
MotionSequence positions_from_features(const Skeleton& skeleton, const MotionFeatures& features);

// Largest per-coordinate range over all frames and joints; the motion's
// characteristic scale, used to normalize reconstruction error.
double motion_amplitude(const MotionSequence& motion);

}  // namespace molang
