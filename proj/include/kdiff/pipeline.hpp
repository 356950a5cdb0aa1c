#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kdiff/conditioning.hpp"
#include "kdiff/denoiser.hpp"
#include "kdiff/diffusion.hpp"
#include "kdiff/motion.hpp"

namespace kdiff {

/// Deformation channel treated as the lip proxy: the designated
/// keypoint's y coordinate, both by the synthetic generator and by the
/// sync metric.
inline constexpr std::size_t kLipKeypointIndex = 19;
inline constexpr std::size_t kLipCoordinate = 1;

/// Per-channel affine standardization of latents and audio features,
/// estimated from the training set and carried in checkpoints.
struct Normalizer {
    Mat latent_mean, latent_std; // 1 x 70
    Mat feat_mean, feat_std;     // 1 x audio_dim

    Mat normalize_latents(const Mat& x) const;
    Mat denormalize_latents(const Mat& x) const;
    Mat normalize_features(const Mat& x) const;

    static Normalizer identity(std::size_t audio_dim);
};

/// Everything needed to run the sampler: network weights plus the
/// schedule, normalization constants and data-assembly switches.
struct ModelBundle {
    DenoiserConfig cfg;
    std::unique_ptr<DenoiserModel> model;
    DiffusionSchedule sched;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    Normalizer norm;
    std::size_t window = 64;
    std::size_t ref_rows = 2; // 1 drops the canonical-keypoint prior
    std::uint64_t trained_steps = 0;
    std::uint64_t seed = 0;

    Mat reference_rows(const CanonicalKeypoints& xc, const MotionFrame& motion0) const;
};

// --- synthetic data --------------------------------------------------------

struct SyntheticConfig {
    std::size_t num_sequences = 200;
    std::size_t n = 16;
    std::uint64_t seed = 1;
    std::size_t audio_dim = 16;
    /// Per-channel pose standard deviation in degrees; the default
    /// anchors to real-video head-motion spread.
    double target_diversity = 0.639;
    /// Feature channels 0..env_channels-1 carry envelope-like signals;
    /// only the one selected by the sample's canonical lip coordinate
    /// is the true driver.
    std::size_t env_channels = 4;
};

struct SyntheticSample {
    CanonicalKeypoints xc;
    MotionFrame motion0;
    MotionSequence frames;        // n ground-truth frames
    AudioFeatureSequence audio;   // n x audio_dim
    std::vector<double> envelope; // n, the generator's sync oracle
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    SyntheticConfig cfg;
    std::vector<SyntheticSample> samples;
};

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg);
SyntheticDataset make_synthetic_dataset(std::size_t num_sequences, std::size_t n,
                                        std::uint64_t seed);

// --- training ---------------------------------------------------------------

struct TrainConfig {
    std::size_t window = 64;
    std::size_t batch_size = 32;
    std::size_t total_steps = 2000;
    double peak_lr = 5.12e-4;
    std::size_t warmup_steps = 100;
    double weight_decay = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int diffusion_T = kDefaultTrainSteps;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0; // 0 disables periodic checkpoints
    std::string checkpoint_path;
    int log_every = 0; // 0 disables stdout logging

    void validate() const;
};

/// Linear warmup to peak_lr, then cosine decay to zero at total_steps.
double lr_at(const TrainConfig& cfg, std::size_t step);

/// Decoupled-weight-decay Adam over a parameter set.
class AdamW {
public:
    AdamW(std::vector<Tensor*> params, double beta1, double beta2, double eps,
          double weight_decay);
    void step(double lr);

private:
    std::vector<Tensor*> params_;
    std::vector<Mat> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_;
    std::int64_t t_ = 0;
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<double> loss_history;
};

/// One training example as the loop assembles it: reference rows stay
/// clean, only the motion rows carry the forward-process noise.
struct TrainingItem {
    StructuredInput input; // (ref_rows + window) x 70, normalized
    Mat audio;             // normalized features for the window
    Mat eps;               // injected noise, window x 70
    int t = 0;
};

TrainingItem make_training_item(const SyntheticSample& sample, const Normalizer& norm,
                                const DiffusionSchedule& sched, std::size_t window,
                                std::size_t ref_rows, int t, const Mat& eps);

/// Minimizes noise-prediction MSE over the motion rows of structured
/// inputs built from the dataset. Reference rows are never noised and
/// never enter the loss.
TrainResult train(const SyntheticDataset& dataset, const TrainConfig& cfg,
                  const DenoiserConfig& model_cfg, std::size_t ref_rows = 2);

// --- sampling ---------------------------------------------------------------

/// Deterministic DDIM sampling of one window (audio rows <= window).
/// Reference rows are re-inserted clean at every step.
MotionSequence generate(const ModelBundle& bundle, const CanonicalKeypoints& xc,
                        const MotionFrame& motion0, const AudioFeatureSequence& audio,
                        int steps, std::uint64_t seed);

/// Windowed sampling for audio longer than one window: each later
/// window replaces the reference-motion prior with the previous
/// window's final generated frame.
MotionSequence chunked_generate(const ModelBundle& bundle, const CanonicalKeypoints& xc,
                                const MotionFrame& motion0, const AudioFeatureSequence& audio,
                                int steps, std::uint64_t seed);

} // namespace kdiff
