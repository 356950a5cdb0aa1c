#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "kdiff/motion.hpp"
#include "kdiff/rng.hpp"

using namespace kdiff;

namespace {

MotionFrame random_frame(Rng& rng) {
    MotionFrame f;
    f.scale = rng.uniform(0.5, 2.0);
    f.rot = {rng.uniform(-179.0, 179.0), rng.uniform(-179.0, 179.0), rng.uniform(-179.0, 179.0)};
    for (auto& t : f.translation) t = rng.normal();
    f.delta = rng.normal_mat(kNumKeypoints, 3);
    return f;
}

bool frames_equal(const MotionFrame& a, const MotionFrame& b) {
    if (a.scale != b.scale) return false;
    if (a.rot.pitch != b.rot.pitch || a.rot.yaw != b.rot.yaw || a.rot.roll != b.rot.roll)
        return false;
    if (a.translation != b.translation) return false;
    return a.delta == b.delta;
}

} // namespace

TEST_CASE("rotation of zero angles is the identity") {
    const Mat r = rotation_from_euler({0, 0, 0});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(r(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("pure yaw of 90 degrees maps unit-x to minus unit-z") {
    // Hand-derived row-vector yaw matrix at 90 deg:
    //   [ 0 0 -1 ]
    //   [ 0 1  0 ]
    //   [ 1 0  0 ]
    const Mat r = rotation_from_euler({0, 90, 0});
    const double expected[3][3] = {{0, 0, -1}, {0, 1, 0}, {1, 0, 0}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(r(i, j) - expected[i][j]) < 1e-12);

    // unit-x * R
    double mapped[3] = {r(0, 0), r(0, 1), r(0, 2)};
    CHECK(std::abs(mapped[0]) < 1e-12);
    CHECK(std::abs(mapped[1]) < 1e-12);
    CHECK(std::abs(mapped[2] + 1.0) < 1e-12);
}

TEST_CASE("rotation matrices are orthonormal with unit determinant") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat r = rotation_from_euler(
            {rng.uniform(-360, 360), rng.uniform(-360, 360), rng.uniform(-360, 360)});
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < 3; ++k) dot += r(k, i) * r(k, j);
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-9);
            }
        }
        const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                           r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                           r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
        CHECK(std::abs(det - 1.0) < 1e-9);
    }
}

TEST_CASE("rotation rejects non-finite angles") {
    CHECK_THROWS_AS(rotation_from_euler({std::numeric_limits<double>::quiet_NaN(), 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(rotation_from_euler({0, std::numeric_limits<double>::infinity(), 0}),
                    std::invalid_argument);
}

TEST_CASE("apply_motion identity frame returns the canonical keypoints exactly") {
    Rng rng(12);
    const CanonicalKeypoints xc(rng.normal_mat(kNumKeypoints, 3));
    MotionFrame id;
    const Mat out = apply_motion(xc, id);
    CHECK(out == xc.points);
}

TEST_CASE("apply_motion with pure scaling doubles the keypoints") {
    Rng rng(13);
    const CanonicalKeypoints xc(rng.normal_mat(kNumKeypoints, 3));
    MotionFrame f;
    f.scale = 2.0;
    const Mat out = apply_motion(xc, f);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(out(i, j) == 2.0 * xc.points(i, j));
}

TEST_CASE("apply_motion matches a per-point scalar oracle") {
    Rng rng(14);
    const CanonicalKeypoints xc(rng.normal_mat(kNumKeypoints, 3));
    const MotionFrame f = random_frame(rng);
    const Mat out = apply_motion(xc, f);

    const Mat r = rotation_from_euler(f.rot);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const double px = xc.points(i, 0), py = xc.points(i, 1), pz = xc.points(i, 2);
        for (std::size_t j = 0; j < 3; ++j) {
            const double rotated = px * r(0, j) + py * r(1, j) + pz * r(2, j);
            const double expected = f.scale * (rotated + f.delta(i, j)) + f.translation[j];
            CHECK(std::abs(out(i, j) - expected) < 1e-12);
        }
    }
}

TEST_CASE("apply_motion is equivariant under translation offsets") {
    Rng rng(15);
    const CanonicalKeypoints xc(rng.normal_mat(kNumKeypoints, 3));
    const MotionFrame f = random_frame(rng);
    MotionFrame shifted = f;
    const double offset[3] = {0.25, -1.5, 3.0};
    for (std::size_t j = 0; j < 3; ++j) shifted.translation[j] += offset[j];

    const Mat base = apply_motion(xc, f);
    const Mat moved = apply_motion(xc, shifted);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(moved(i, j) - base(i, j) - offset[j]) < 1e-12);
}

TEST_CASE("apply_motion validates shapes and scale") {
    Rng rng(16);
    const CanonicalKeypoints xc(rng.normal_mat(kNumKeypoints, 3));
    MotionFrame bad;
    bad.scale = 0.0;
    CHECK_THROWS_AS(apply_motion(xc, bad), std::invalid_argument);
    MotionFrame bad_delta;
    bad_delta.delta = Mat(5, 3);
    CHECK_THROWS_AS(apply_motion(xc, bad_delta), std::invalid_argument);
    CHECK_THROWS_AS(CanonicalKeypoints(Mat(15, 3)), std::invalid_argument);
}

TEST_CASE("flatten of the unit frame puts scale first") {
    MotionFrame f; // scale 1, everything else 0
    const LatentFrame latent = flatten_frame(f);
    REQUIRE(latent.values.size() == kLatentDim);
    CHECK(latent.values[0] == 1.0);
    for (std::size_t i = 1; i < kLatentDim; ++i) CHECK(latent.values[i] == 0.0);
}

TEST_CASE("delta entries land at index 7 + 3i + j") {
    MotionFrame f;
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j) f.delta(i, j) = 100.0 * static_cast<double>(i) +
                                                            static_cast<double>(j) + 0.5;
    const LatentFrame latent = flatten_frame(f);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(latent.values[delta_index(i, j)] ==
                  100.0 * static_cast<double>(i) + static_cast<double>(j) + 0.5);
    CHECK(delta_index(0, 0) == 7);
    CHECK(delta_index(20, 2) == 69);
}

TEST_CASE("flatten/unflatten is a bijection on random frames") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const MotionFrame f = random_frame(rng);
        const MotionFrame back = unflatten_frame(flatten_frame(f));
        CHECK(frames_equal(f, back));
    }
}

TEST_CASE("unflatten rejects wrong lengths") {
    LatentFrame latent;
    latent.values.assign(69, 0.0);
    CHECK_THROWS_AS(unflatten_frame(latent), std::invalid_argument);
    latent.values.assign(71, 0.0);
    CHECK_THROWS_AS(unflatten_frame(latent), std::invalid_argument);
}

TEST_CASE("keypoint flattening round-trips and has length 63") {
    Rng rng(18);
    const Mat points = rng.normal_mat(kNumKeypoints, 3);
    const std::vector<double> flat = flatten_keypoints(points);
    REQUIRE(flat.size() == 63);
    CHECK(unflatten_keypoints(flat) == points);
}

TEST_CASE("degree wrapping is idempotent and lands in [-180, 180)") {
    Rng rng(19);
    for (int trial = 0; trial < 200; ++trial) {
        const double angle = rng.uniform(-2000.0, 2000.0);
        const double w = wrap_degrees(angle);
        CHECK(w >= -180.0);
        CHECK(w < 180.0);
        CHECK(wrap_degrees(w) == w);
    }
    CHECK(wrap_degrees(180.0) == -180.0);
    CHECK(wrap_degrees(-180.0) == -180.0);
    CHECK(wrap_degrees(540.0) == -180.0);
}
