#include "kdiff/motion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kdiff {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

CanonicalKeypoints::CanonicalKeypoints(Mat p) : points(std::move(p)) {
    require(points.rows() == kNumKeypoints && points.cols() == 3,
            "CanonicalKeypoints: expected 21x3, got " + std::to_string(points.rows()) + "x" +
                std::to_string(points.cols()));
    require(points.all_finite(), "CanonicalKeypoints: non-finite value");
}

double wrap_degrees(double angle) {
    double w = angle - 360.0 * std::floor((angle + 180.0) / 360.0);
    // floor rounding can land exactly on +180; fold it back.
    if (w >= 180.0) w -= 360.0;
    return w;
}

EulerAngles normalized(const EulerAngles& a) {
    return {wrap_degrees(a.pitch), wrap_degrees(a.yaw), wrap_degrees(a.roll)};
}

void MotionFrame::validate() const {
    require(std::isfinite(scale) && scale > 0.0, "MotionFrame: scale must be positive and finite");
    require(delta.rows() == kNumKeypoints && delta.cols() == 3, "MotionFrame: delta must be 21x3");
    require(std::isfinite(rot.pitch) && std::isfinite(rot.yaw) && std::isfinite(rot.roll),
            "MotionFrame: non-finite rotation");
    for (double v : translation) require(std::isfinite(v), "MotionFrame: non-finite translation");
    require(delta.all_finite(), "MotionFrame: non-finite delta");
}

Mat rotation_from_euler(const EulerAngles& rot) {
    require(std::isfinite(rot.pitch) && std::isfinite(rot.yaw) && std::isfinite(rot.roll),
            "rotation_from_euler: non-finite angle");

    const double p = rot.pitch * kDegToRad;
    const double y = rot.yaw * kDegToRad;
    const double r = rot.roll * kDegToRad;

    // Row-vector forms (transposes of the usual column-vector matrices):
    // pitch about x, yaw about y, roll about z.
    const double cp = std::cos(p), sp = std::sin(p);
    const double cy = std::cos(y), sy = std::sin(y);
    const double cr = std::cos(r), sr = std::sin(r);

    Mat rx = Mat::from_rows(3, 3, {1, 0, 0, 0, cp, sp, 0, -sp, cp});
    Mat ry = Mat::from_rows(3, 3, {cy, 0, -sy, 0, 1, 0, sy, 0, cy});
    Mat rz = Mat::from_rows(3, 3, {cr, sr, 0, -sr, cr, 0, 0, 0, 1});

    // R = R_roll * R_pitch * R_yaw, applied as x * R.
    Mat rp(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 3; ++k) rp(i, j) += rz(i, k) * rx(k, j);
    Mat out(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 3; ++k) out(i, j) += rp(i, k) * ry(k, j);
    return out;
}

Mat apply_motion(const CanonicalKeypoints& xc, const MotionFrame& frame) {
    require(xc.points.rows() == kNumKeypoints && xc.points.cols() == 3,
            "apply_motion: canonical keypoints must be 21x3");
    frame.validate();

    const Mat rot = rotation_from_euler(frame.rot);
    Mat out(kNumKeypoints, 3);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double v = 0.0;
            for (std::size_t k = 0; k < 3; ++k) v += xc.points(i, k) * rot(k, j);
            out(i, j) = frame.scale * (v + frame.delta(i, j)) + frame.translation[j];
        }
    }
    return out;
}

LatentFrame flatten_frame(const MotionFrame& frame) {
    frame.validate();
    LatentFrame latent;
    latent.values.resize(kLatentDim);
    latent.values[0] = frame.scale;
    latent.values[1] = frame.rot.pitch;
    latent.values[2] = frame.rot.yaw;
    latent.values[3] = frame.rot.roll;
    for (std::size_t j = 0; j < 3; ++j) latent.values[4 + j] = frame.translation[j];
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j) latent.values[delta_index(i, j)] = frame.delta(i, j);
    return latent;
}

MotionFrame unflatten_frame(const LatentFrame& latent) {
    require(latent.values.size() == kLatentDim,
            "unflatten_frame: expected length 70, got " + std::to_string(latent.values.size()));
    MotionFrame frame;
    frame.scale = latent.values[0];
    frame.rot = {latent.values[1], latent.values[2], latent.values[3]};
    for (std::size_t j = 0; j < 3; ++j) frame.translation[j] = latent.values[4 + j];
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j) frame.delta(i, j) = latent.values[delta_index(i, j)];
    return frame;
}

std::vector<double> flatten_keypoints(const Mat& points) {
    require(points.rows() == kNumKeypoints && points.cols() == 3,
            "flatten_keypoints: expected 21x3");
    std::vector<double> out(kNumKeypoints * 3);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j) out[3 * i + j] = points(i, j);
    return out;
}

Mat unflatten_keypoints(const std::vector<double>& values) {
    require(values.size() == kNumKeypoints * 3, "unflatten_keypoints: expected 63 values");
    Mat out(kNumKeypoints, 3);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j) out(i, j) = values[3 * i + j];
    return out;
}

Mat sequence_to_latents(const MotionSequence& seq) {
    Mat out(seq.size(), kLatentDim);
    for (std::size_t r = 0; r < seq.size(); ++r) {
        const LatentFrame latent = flatten_frame(seq[r]);
        for (std::size_t c = 0; c < kLatentDim; ++c) out(r, c) = latent.values[c];
    }
    return out;
}

MotionSequence latents_to_sequence(const Mat& latents) {
    require(latents.cols() == kLatentDim, "latents_to_sequence: rows must be 70 wide");
    MotionSequence seq;
    seq.reserve(latents.rows());
    for (std::size_t r = 0; r < latents.rows(); ++r) {
        LatentFrame latent;
        latent.values.assign(latents.row(r), latents.row(r) + kLatentDim);
        seq.push_back(unflatten_frame(latent));
    }
    return seq;
}

} // namespace kdiff
