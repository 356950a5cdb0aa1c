#pragma once

#include <string>
#include <vector>

#include "kdiff/mat.hpp"
#include "kdiff/motion.hpp"

namespace kdiff {

inline constexpr double kVideoFps = 25.0;

/// The (ref_rows + n) x 70 matrix fed to the denoiser: reference prior
/// rows stacked on top of the per-frame motion latents.
struct StructuredInput {
    Mat rows;
    std::size_t n = 0;        // motion frame count
    std::size_t ref_rows = 2; // prior rows ahead of the motion rows
};

/// One feature vector per video frame at 25 FPS.
struct AudioFeatureSequence {
    Mat features; // n x audio_dim
};

/// Rows 0 and 1 of the structured input: canonical keypoints in the
/// deformation slot with zero padding, then the reference frame's
/// motion latent.
Mat build_reference_rows(const CanonicalKeypoints& xc, const MotionFrame& motion0);

/// Same layout with the canonical-keypoint row dropped (ablation).
Mat build_reference_rows_no_canonical(const MotionFrame& motion0);

StructuredInput assemble_input(const Mat& ref_rows, const Mat& motion_latents);

/// Drops the reference rows, returning the n x 70 motion block.
Mat strip_references(const Mat& full, std::size_t ref_rows = 2);

// --- audio ---------------------------------------------------------------

inline constexpr int kAudioSampleRate = 16000;
inline constexpr std::size_t kMelBins = 80;
inline constexpr std::size_t kMelWindowSamples = 400; // 25 ms
inline constexpr std::size_t kMelHopSamples = 160;    // 10 ms
inline constexpr std::size_t kMelContextHops = 20;    // 0.2 s per video frame
inline constexpr std::size_t kMelFeatureDim = kMelBins * kMelContextHops; // 1600

struct WavData {
    std::vector<double> samples; // mono, [-1, 1]
    int sample_rate = 0;
};

/// Reads a mono PCM WAV file (16-bit integer or 32-bit float).
WavData read_wav_mono(const std::string& path);

/// Log-mel spectrogram of 16 kHz audio; columns are hops.
Mat mel_spectrogram(const std::vector<double>& samples);

/// Per-video-frame features: a 20-hop window of log-mel columns
/// centered on each frame time, flattened to 1600 values.
AudioFeatureSequence mel_features(const std::vector<double>& samples, std::size_t n_frames);

/// Reads a feature file (format owned by the io module) and validates
/// it as an AudioFeatureSequence.
AudioFeatureSequence load_features(const std::string& path);

/// Center frequency helper used to pin expected mel bins in tests.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

} // namespace kdiff
