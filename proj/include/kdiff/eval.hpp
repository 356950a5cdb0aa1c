#pragma once

#include <string>
#include <vector>

#include "kdiff/pipeline.hpp"

namespace kdiff {

/// Per-sequence metric breakdown plus the aggregates reported by the
/// evaluation battery.
struct EvalReport {
    double diversity = 0.0;
    double smoothness = 0.0;
    double sync_r = 0.0;
    double fps = 0.0;
    bool sync_degenerate = false;

    struct PerSequence {
        double diversity, smoothness, sync_r;
    };
    std::vector<PerSequence> sequences;

    std::string to_text() const;      // human-readable
    std::string to_key_values() const; // machine-readable `key value` lines
};

/// Mean over the three pose channels of their population standard
/// deviation across frames.
double head_diversity(const MotionSequence& seq);

/// Mean squared second difference of the pose channels; lower is
/// smoother.
double smoothness(const MotionSequence& seq);

struct SyncResult {
    double r = 0.0;
    bool zero_variance = false;
};

/// Pearson correlation between the lip-proxy deformation channel and
/// the audio envelope. Zero-variance inputs yield r = 0 with the
/// degenerate flag set.
SyncResult sync_correlation(const MotionSequence& seq, const std::vector<double>& envelope,
                            std::size_t lip_point = kLipKeypointIndex,
                            std::size_t lip_coord = kLipCoordinate);

/// Median over repeats of generated-frames-per-wallclock-second;
/// keypoint generation only.
double fps_benchmark(const ModelBundle& bundle, std::size_t n, int steps, std::size_t repeats);

/// Generates on held-out samples and aggregates the metric battery.
EvalReport evaluate_on(const ModelBundle& bundle, const std::vector<SyntheticSample>& holdout,
                       int steps, std::uint64_t seed, bool measure_fps = false);

// --- ablation harness --------------------------------------------------------

/// One named variant of the training/sampling setup. Training variants
/// alter the model or data assembly; step variants reuse the full
/// model with a different DDIM step count.
struct AblationVariant {
    std::string name;
    bool use_attention = true;
    bool use_rope = true;
    std::size_t ref_rows = 2;
    std::size_t window = 0; // 0 = keep the base window
    int steps = 0;          // 0 = keep the base step count
    bool retrain = true;
};

/// Accepts: full, no_reference_row, no_attention, no_rope, n8..n64,
/// steps1..steps200. Anything else is an error.
AblationVariant parse_variant(const std::string& name);

struct AblationRow {
    std::string variant;
    EvalReport report;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    std::string to_text() const; // tab-delimited comparison table
};

/// Trains (or reuses) each variant under identical seeds and evaluates
/// them side by side on the held-out samples.
AblationTable run_ablation(const SyntheticDataset& dataset,
                           const std::vector<SyntheticSample>& holdout,
                           const std::vector<std::string>& variants, const TrainConfig& train_cfg,
                           const DenoiserConfig& model_cfg, int base_steps = 50);

} // namespace kdiff
