// Command-line front end: dataset generation, training, sampling,
// evaluation, ablations and file export for the keypoint motion
// diffusion pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "kdiff/eval.hpp"
#include "kdiff/io.hpp"
#include "kdiff/pipeline.hpp"

using namespace kdiff;

namespace {

/// --seed wins; otherwise KDIFF_SEED; otherwise 0.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("KDIFF_SEED")) return std::strtoull(env, nullptr, 10);
    return flag_value;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

MotionFrame reference_frame_from_file(const std::string& path, CanonicalKeypoints& xc_out) {
    auto [xc, seq] = io::read_sequence(path);
    if (seq.empty())
        throw std::runtime_error("reference file holds no frames: " + path);
    xc_out = xc;
    return seq.front();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kdiff: audio-conditioned keypoint motion diffusion"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI config file");

    std::uint64_t seed = 0;
    int steps = 50;
    std::size_t frames = 64;

    // --- make-data ---
    auto* cmd_data = app.add_subcommand("make-data", "Generate a synthetic dataset");
    std::string data_out;
    SyntheticConfig syn_cfg;
    cmd_data->add_option("--out", data_out, "Output directory")->required();
    cmd_data->add_option("--num", syn_cfg.num_sequences, "Number of sequences");
    auto* d_frames = cmd_data->add_option("--frames", frames, "Frames per sequence");
    cmd_data->add_option("--audio-dim", syn_cfg.audio_dim, "Feature channels");
    cmd_data->add_option("--target-diversity", syn_cfg.target_diversity,
                         "Per-channel pose std in degrees");
    cmd_data->add_option("--env-channels", syn_cfg.env_channels,
                         "Candidate envelope channels (one true, rest decoys)");
    auto* d_seed = cmd_data->add_option("--seed", seed, "Generator seed");

    // --- train ---
    auto* cmd_train = app.add_subcommand("train", "Train the denoiser on a dataset");
    std::string train_data, train_out;
    TrainConfig train_cfg;
    DenoiserConfig model_cfg;
    std::size_t ref_rows = 2;
    bool no_attention = false, no_rope = false;
    cmd_train->add_option("--data", train_data, "Dataset directory")->required();
    cmd_train->add_option("--out", train_out, "Checkpoint output path")->required();
    auto* t_frames = cmd_train->add_option("--frames", frames, "Training window");
    cmd_train->add_option("--batch", train_cfg.batch_size, "Batch size");
    cmd_train->add_option("--train-steps", train_cfg.total_steps, "Optimizer steps");
    cmd_train->add_option("--lr", train_cfg.peak_lr, "Peak learning rate");
    cmd_train->add_option("--warmup", train_cfg.warmup_steps, "Warmup steps");
    cmd_train->add_option("--weight-decay", train_cfg.weight_decay, "AdamW weight decay");
    cmd_train->add_option("--diffusion-T", train_cfg.diffusion_T, "Forward process length");
    cmd_train->add_option("--dim", model_cfg.model_dim, "Model width");
    cmd_train->add_option("--blocks", model_cfg.n_blocks, "Residual blocks");
    cmd_train->add_option("--heads", model_cfg.n_heads, "Attention heads");
    cmd_train->add_option("--ffn-mult", model_cfg.ffn_mult, "Feed-forward width multiplier");
    cmd_train->add_option("--ref-rows", ref_rows, "Reference prior rows (2, or 1 to drop x_c)");
    cmd_train->add_flag("--no-attention", no_attention, "Ablate the attention sublayer");
    cmd_train->add_flag("--no-rope", no_rope, "Ablate rotary position embedding");
    cmd_train->add_option("--ckpt-every", train_cfg.checkpoint_every,
                          "Checkpoint period in steps (0 = final only)");
    cmd_train->add_option("--log-every", train_cfg.log_every, "Loss print period (0 = quiet)");
    auto* t_seed = cmd_train->add_option("--seed", seed, "Training seed");

    // --- sample ---
    auto* cmd_sample = app.add_subcommand("sample", "Generate motion from audio features");
    std::string sample_ckpt, sample_ref, sample_features, sample_wav, sample_out;
    cmd_sample->add_option("--ckpt", sample_ckpt, "Trained checkpoint")->required();
    cmd_sample->add_option("--ref", sample_ref, "Reference motion file (x_c + frame 0)")
        ->required();
    cmd_sample->add_option("--features", sample_features, "Precomputed feature file");
    cmd_sample->add_option("--wav", sample_wav, "Mono 16 kHz WAV (mel features)");
    cmd_sample->add_option("--out", sample_out, "Output motion file")->required();
    auto* s_steps = cmd_sample->add_option("--steps", steps, "DDIM steps");
    auto* s_frames = cmd_sample->add_option("--frames", frames, "Frames to generate");
    auto* s_seed = cmd_sample->add_option("--seed", seed, "Sampling seed");
    (void)s_steps;

    // --- eval ---
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a generated motion file");
    std::string eval_seq, eval_env, eval_ckpt, eval_report;
    std::size_t fps_repeats = 3;
    cmd_eval->add_option("--seq", eval_seq, "Motion file to evaluate")->required();
    cmd_eval->add_option("--env", eval_env, "Envelope feature file (enables sync_r)");
    cmd_eval->add_option("--ckpt", eval_ckpt, "Checkpoint (enables the FPS benchmark)");
    cmd_eval->add_option("--report", eval_report, "Write the report here instead of stdout");
    cmd_eval->add_option("--fps-repeats", fps_repeats, "FPS benchmark repeats");
    auto* e_steps = cmd_eval->add_option("--steps", steps, "DDIM steps for the FPS benchmark");
    auto* e_frames = cmd_eval->add_option("--frames", frames, "Frames for the FPS benchmark");
    auto* e_seed = cmd_eval->add_option("--seed", seed, "Unused; accepted for uniformity");
    (void)e_steps;
    (void)e_frames;
    (void)e_seed;

    // --- ablate ---
    auto* cmd_ablate = app.add_subcommand("ablate", "Train and compare ablation variants");
    std::string ab_data, ab_holdout, ab_out;
    std::vector<std::string> ab_variants = {"full", "no_reference_row", "no_attention", "no_rope"};
    TrainConfig ab_train_cfg;
    DenoiserConfig ab_model_cfg;
    cmd_ablate->add_option("--data", ab_data, "Training dataset directory")->required();
    cmd_ablate->add_option("--holdout", ab_holdout, "Held-out dataset directory")->required();
    cmd_ablate->add_option("--variants", ab_variants, "Variant names")->delimiter(',');
    cmd_ablate->add_option("--train-steps", ab_train_cfg.total_steps, "Optimizer steps");
    cmd_ablate->add_option("--batch", ab_train_cfg.batch_size, "Batch size");
    cmd_ablate->add_option("--lr", ab_train_cfg.peak_lr, "Peak learning rate");
    cmd_ablate->add_option("--warmup", ab_train_cfg.warmup_steps, "Warmup steps");
    cmd_ablate->add_option("--dim", ab_model_cfg.model_dim, "Model width");
    cmd_ablate->add_option("--blocks", ab_model_cfg.n_blocks, "Residual blocks");
    cmd_ablate->add_option("--heads", ab_model_cfg.n_heads, "Attention heads");
    cmd_ablate->add_option("--ffn-mult", ab_model_cfg.ffn_mult, "Feed-forward multiplier");
    cmd_ablate->add_option("--out", ab_out, "Write the comparison table here");
    auto* a_steps = cmd_ablate->add_option("--steps", steps, "DDIM steps for evaluation");
    auto* a_frames = cmd_ablate->add_option("--frames", frames, "Training window");
    auto* a_seed = cmd_ablate->add_option("--seed", seed, "Seed shared by every variant");
    (void)a_steps;

    // --- export ---
    auto* cmd_export = app.add_subcommand("export", "Export per-frame driving keypoints");
    std::string export_seq, export_out;
    cmd_export->add_option("--seq", export_seq, "Motion file")->required();
    cmd_export->add_option("--out", export_out, "Driving keypoint file")->required();

    // --- plot ---
    auto* cmd_plot = app.add_subcommand("plot", "Render keypoint scatter frames (PPM)");
    std::string plot_seq, plot_out;
    cmd_plot->add_option("--seq", plot_seq, "Motion file")->required();
    cmd_plot->add_option("--out", plot_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_data) {
            syn_cfg.seed = resolve_seed(d_seed, seed);
            if (d_frames->count() > 0) syn_cfg.n = frames;
            const SyntheticDataset ds = make_synthetic_dataset(syn_cfg);
            io::write_dataset(data_out, ds);
            std::printf("wrote %zu sequences of %zu frames to %s\n", ds.samples.size(), ds.cfg.n,
                        data_out.c_str());
        } else if (*cmd_train) {
            train_cfg.seed = resolve_seed(t_seed, seed);
            train_cfg.window = t_frames->count() > 0 ? frames : std::size_t{64};
            train_cfg.checkpoint_path = train_out;
            const SyntheticDataset ds = io::read_dataset(train_data);
            if (t_frames->count() == 0) train_cfg.window = ds.cfg.n;
            model_cfg.audio_dim = ds.cfg.audio_dim;
            model_cfg.use_attention = !no_attention;
            model_cfg.use_rope = !no_rope;
            const TrainResult result = train(ds, train_cfg, model_cfg, ref_rows);
            std::printf("trained %zu steps, final loss %.6f, checkpoint %s\n",
                        result.loss_history.size(), result.loss_history.back(),
                        train_out.c_str());
        } else if (*cmd_sample) {
            const ModelBundle bundle = io::read_checkpoint(sample_ckpt);
            CanonicalKeypoints xc;
            const MotionFrame motion0 = reference_frame_from_file(sample_ref, xc);

            AudioFeatureSequence audio;
            if (!sample_features.empty()) {
                audio = load_features(sample_features);
                if (s_frames->count() > 0 && frames < audio.features.rows())
                    audio.features = audio.features.slice_rows(0, frames);
            } else if (!sample_wav.empty()) {
                const WavData wav = read_wav_mono(sample_wav);
                if (wav.sample_rate != kAudioSampleRate)
                    throw std::runtime_error("expected 16 kHz audio, got " +
                                             std::to_string(wav.sample_rate) + " Hz");
                std::size_t n = static_cast<std::size_t>(
                    static_cast<double>(wav.samples.size()) / kAudioSampleRate * kVideoFps);
                if (s_frames->count() > 0) n = std::min(n, frames);
                audio = mel_features(wav.samples, n);
            } else {
                throw std::runtime_error("sample: provide --features or --wav");
            }

            const MotionSequence seq = chunked_generate(bundle, xc, motion0, audio, steps,
                                                        resolve_seed(s_seed, seed));
            io::write_sequence(sample_out, xc, seq);
            std::printf("generated %zu frames (%d DDIM steps) -> %s\n", seq.size(), steps,
                        sample_out.c_str());
        } else if (*cmd_eval) {
            auto [xc, seq] = io::read_sequence(eval_seq);
            EvalReport report;
            report.diversity = head_diversity(seq);
            report.smoothness = smoothness(seq);
            if (!eval_env.empty()) {
                const AudioFeatureSequence env = load_features(eval_env);
                if (env.features.cols() != 1)
                    throw std::runtime_error("envelope file must have dim 1");
                std::vector<double> envelope(env.features.rows());
                for (std::size_t k = 0; k < envelope.size(); ++k)
                    envelope[k] = env.features(k, 0);
                const SyncResult sync = sync_correlation(seq, envelope);
                report.sync_r = sync.r;
                report.sync_degenerate = sync.zero_variance;
            }
            if (!eval_ckpt.empty()) {
                const ModelBundle bundle = io::read_checkpoint(eval_ckpt);
                report.fps = fps_benchmark(bundle, std::min<std::size_t>(frames, bundle.window),
                                           steps, fps_repeats);
            }
            const std::string text = report.to_text() + report.to_key_values();
            if (eval_report.empty())
                std::cout << text;
            else
                write_text(eval_report, text);
        } else if (*cmd_ablate) {
            ab_train_cfg.seed = resolve_seed(a_seed, seed);
            const SyntheticDataset ds = io::read_dataset(ab_data);
            const SyntheticDataset holdout = io::read_dataset(ab_holdout);
            ab_train_cfg.window = a_frames->count() > 0 ? frames : ds.cfg.n;
            ab_model_cfg.audio_dim = ds.cfg.audio_dim;
            const AblationTable table =
                run_ablation(ds, holdout.samples, ab_variants, ab_train_cfg, ab_model_cfg, steps);
            if (ab_out.empty())
                std::cout << table.to_text();
            else
                write_text(ab_out, table.to_text());
        } else if (*cmd_export) {
            auto [xc, seq] = io::read_sequence(export_seq);
            io::export_driving_keypoints(export_out, xc, seq);
            std::printf("exported %zu driving-keypoint frames -> %s\n", seq.size(),
                        export_out.c_str());
        } else if (*cmd_plot) {
            auto [xc, seq] = io::read_sequence(plot_seq);
            const std::vector<std::string> paths = io::emit_plot_frames(seq, xc, plot_out);
            std::printf("wrote %zu frames to %s\n", paths.size(), plot_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
