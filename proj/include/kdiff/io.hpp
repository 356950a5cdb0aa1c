#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kdiff/conditioning.hpp"
#include "kdiff/motion.hpp"
#include "kdiff/pipeline.hpp"

namespace kdiff::io {

// All formats are versioned, line-oriented text with full float
// precision; checkpoints append one raw binary blob for the parameter
// tensors. Readers validate headers before touching the body and name
// the offending line on parse errors.

inline constexpr int kMotionFormatVersion = 1;
inline constexpr int kFeatureFormatVersion = 1;
inline constexpr int kDrivingFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;

/// Motion sequence file: header, shared canonical keypoints, one
/// 70-value latent record per frame.
void write_sequence(const std::string& path, const CanonicalKeypoints& xc,
                    const MotionSequence& seq);
std::pair<CanonicalKeypoints, MotionSequence> read_sequence(const std::string& path);

void write_features(const std::string& path, const AudioFeatureSequence& features);
AudioFeatureSequence read_features(const std::string& path);

/// Per-frame deformed keypoints x_d, the renderer hand-off. The
/// coordinate-space tag is recorded in the header.
void export_driving_keypoints(const std::string& path, const CanonicalKeypoints& xc,
                              const MotionSequence& seq);
std::vector<Mat> read_driving_keypoints(const std::string& path);

void write_checkpoint(const std::string& path, const ModelBundle& bundle);
ModelBundle read_checkpoint(const std::string& path);

/// Directory layout: a manifest plus per-sample reference motion,
/// ground-truth motion, feature and envelope files.
void write_dataset(const std::string& dir, const SyntheticDataset& ds);
SyntheticDataset read_dataset(const std::string& dir);

/// One raster image per frame: orthographic (x, y) scatter of the
/// deformed keypoints with axes fixed across the sequence. Binary PPM,
/// deterministic bytes. Returns the written paths.
std::vector<std::string> emit_plot_frames(const MotionSequence& seq, const CanonicalKeypoints& xc,
                                          const std::string& out_dir);

struct PpmImage {
    std::size_t width = 0, height = 0;
    std::vector<unsigned char> rgb;
};
PpmImage read_ppm(const std::string& path);

} // namespace kdiff::io
