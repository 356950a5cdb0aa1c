#include "kdiff/conditioning.hpp"

#include <stdexcept>
#include <string>

#include "kdiff/io.hpp"

namespace kdiff {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

Mat build_reference_rows(const CanonicalKeypoints& xc, const MotionFrame& motion0) {
    Mat out(2, kLatentDim);
    const std::vector<double> flat_xc = flatten_keypoints(xc.points);
    for (std::size_t i = 0; i < flat_xc.size(); ++i) out(0, 7 + i) = flat_xc[i];
    const LatentFrame ref = flatten_frame(motion0);
    for (std::size_t c = 0; c < kLatentDim; ++c) out(1, c) = ref.values[c];
    return out;
}

Mat build_reference_rows_no_canonical(const MotionFrame& motion0) {
    Mat out(1, kLatentDim);
    const LatentFrame ref = flatten_frame(motion0);
    for (std::size_t c = 0; c < kLatentDim; ++c) out(0, c) = ref.values[c];
    return out;
}

StructuredInput assemble_input(const Mat& ref_rows, const Mat& motion_latents) {
    require(ref_rows.cols() == kLatentDim,
            "assemble_input: reference rows must be 70 wide, got " +
                std::to_string(ref_rows.cols()));
    require(motion_latents.rows() == 0 || motion_latents.cols() == kLatentDim,
            "assemble_input: motion latents must be 70 wide, got " +
                std::to_string(motion_latents.cols()));
    require(ref_rows.rows() >= 1 && ref_rows.rows() <= 2,
            "assemble_input: expected 1 or 2 reference rows");

    StructuredInput si;
    si.n = motion_latents.rows();
    si.ref_rows = ref_rows.rows();
    si.rows = Mat(si.ref_rows + si.n, kLatentDim);
    si.rows.set_rows(0, ref_rows);
    if (si.n > 0) si.rows.set_rows(si.ref_rows, motion_latents);
    return si;
}

Mat strip_references(const Mat& full, std::size_t ref_rows) {
    require(full.rows() >= ref_rows, "strip_references: fewer rows than reference rows");
    return full.slice_rows(ref_rows, full.rows());
}

AudioFeatureSequence load_features(const std::string& path) {
    return io::read_features(path);
}

} // namespace kdiff
