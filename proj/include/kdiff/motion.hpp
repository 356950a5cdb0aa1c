#pragma once

#include <array>
#include <vector>

#include "kdiff/mat.hpp"

namespace kdiff {

inline constexpr std::size_t kNumKeypoints = 21;
inline constexpr std::size_t kLatentDim = 70; // 1 scale + 3 euler + 3 translation + 63 deformation

/// Identity-specific base keypoints of a reference face, 21x3, in
/// normalized face-space coordinates.
struct CanonicalKeypoints {
    Mat points; // 21x3

    CanonicalKeypoints() : points(kNumKeypoints, 3) {}
    explicit CanonicalKeypoints(Mat p);
};

/// Head orientation as three Euler angles in degrees.
struct EulerAngles {
    double pitch = 0.0;
    double yaw = 0.0;
    double roll = 0.0;
};

/// Wraps an angle into [-180, 180). Idempotent.
double wrap_degrees(double angle);
EulerAngles normalized(const EulerAngles& a);

/// One frame's motion parameters: uniform scale, head rotation,
/// translation and per-keypoint deformation offsets.
struct MotionFrame {
    double scale = 1.0;
    EulerAngles rot;
    std::array<double, 3> translation{0.0, 0.0, 0.0};
    Mat delta; // 21x3

    MotionFrame() : delta(kNumKeypoints, 3) {}
    void validate() const;
};

using MotionSequence = std::vector<MotionFrame>;

/// A frame flattened to the 70-wide latent layout
/// [s | pitch yaw roll | tx ty tz | delta row-major].
struct LatentFrame {
    std::vector<double> values; // length 70
};

/// Flat index of deformation entry (point, coord) in a LatentFrame.
inline std::size_t delta_index(std::size_t point, std::size_t coord) {
    return 7 + 3 * point + coord;
}

/// Rotation matrix for intrinsic yaw->pitch->roll, acting on row
/// vectors (x * R): R = R_roll * R_pitch * R_yaw.
Mat rotation_from_euler(const EulerAngles& rot);

/// Deformed keypoints x_d = s * (x_c * R + delta) + t, row-wise.
Mat apply_motion(const CanonicalKeypoints& xc, const MotionFrame& frame);

LatentFrame flatten_frame(const MotionFrame& frame);
MotionFrame unflatten_frame(const LatentFrame& latent);

/// Keypoints flattened row-major to 63 values and back.
std::vector<double> flatten_keypoints(const Mat& points);
Mat unflatten_keypoints(const std::vector<double>& values);

/// Sequence <-> row matrix (one 70-wide latent row per frame).
Mat sequence_to_latents(const MotionSequence& seq);
MotionSequence latents_to_sequence(const Mat& latents);

} // namespace kdiff
