#include "kdiff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kdiff/io.hpp"
#include "kdiff/rng.hpp"

namespace kdiff {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

/// Band-limited signal: a short sum of sinusoids with an affine map on
/// top, so it can be evaluated at any frame index (including -1 for
/// the reference frame).
struct SmoothSignal {
    struct Term {
        double amp, freq, phase;
    };
    std::vector<Term> terms;
    double gain = 1.0;
    double offset = 0.0;

    double at(double k) const {
        double v = 0.0;
        for (const Term& t : terms) v += t.amp * std::sin(kTwoPi * (t.freq * k + t.phase));
        return offset + gain * v;
    }
};

SmoothSignal random_smooth(Rng& rng, double freq_lo, double freq_hi, std::size_t n_terms,
                           std::size_t n, double target_mean, double target_std) {
    SmoothSignal sig;
    sig.terms.resize(n_terms);
    for (auto& t : sig.terms)
        t = {rng.uniform(0.5, 1.0), rng.uniform(freq_lo, freq_hi), rng.uniform()};

    // Rescale so the materialized frames 0..n-1 have exactly the
    // requested population mean and standard deviation.
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += sig.at(static_cast<double>(k));
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = sig.at(static_cast<double>(k)) - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double std = std::sqrt(std::max(var, 1e-12));

    sig.gain = target_std / std;
    sig.offset = target_mean - mean * sig.gain;
    return sig;
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

/// Canonical-keypoint template shared by all synthetic identities.
const Mat& canonical_template() {
    static const Mat tmpl = [] {
        Rng rng(0xFACEULL);
        Mat t(kNumKeypoints, 3);
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-0.5, 0.5);
        return t;
    }();
    return tmpl;
}

double frob_norm(const std::vector<Tensor*>& params, bool grads) {
    double acc = 0.0;
    for (const Tensor* t : params) {
        const Mat& m = grads ? t->g : t->v;
        for (std::size_t i = 0; i < m.size(); ++i) acc += m.data()[i] * m.data()[i];
    }
    return std::sqrt(acc);
}

} // namespace

// --- Normalizer --------------------------------------------------------------

Mat Normalizer::normalize_latents(const Mat& x) const {
    Mat out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c)
            out(r, c) = (x(r, c) - latent_mean(0, c)) / latent_std(0, c);
    return out;
}

Mat Normalizer::denormalize_latents(const Mat& x) const {
    Mat out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c)
            out(r, c) = x(r, c) * latent_std(0, c) + latent_mean(0, c);
    return out;
}

Mat Normalizer::normalize_features(const Mat& x) const {
    Mat out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c)
            out(r, c) = (x(r, c) - feat_mean(0, c)) / feat_std(0, c);
    return out;
}

Normalizer Normalizer::identity(std::size_t audio_dim) {
    Normalizer n;
    n.latent_mean = Mat(1, kLatentDim, 0.0);
    n.latent_std = Mat(1, kLatentDim, 1.0);
    n.feat_mean = Mat(1, audio_dim, 0.0);
    n.feat_std = Mat(1, audio_dim, 1.0);
    return n;
}

Mat ModelBundle::reference_rows(const CanonicalKeypoints& xc, const MotionFrame& motion0) const {
    return ref_rows == 2 ? build_reference_rows(xc, motion0)
                         : build_reference_rows_no_canonical(motion0);
}

// --- synthetic data -----------------------------------------------------------

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg) {
    require(cfg.num_sequences >= 1 && cfg.n >= 1, "make_synthetic_dataset: counts must be positive");
    require(cfg.env_channels >= 1 && cfg.env_channels <= cfg.audio_dim,
            "make_synthetic_dataset: env_channels must fit in audio_dim");

    SyntheticDataset ds;
    ds.cfg = cfg;
    ds.samples.reserve(cfg.num_sequences);

    for (std::size_t i = 0; i < cfg.num_sequences; ++i) {
        const std::uint64_t sample_seed = mix_seed(cfg.seed, i);
        Rng rng(sample_seed);
        SyntheticSample s;
        s.seed = sample_seed;
        const std::size_t n = cfg.n;

        // Identity: jittered template; the lip keypoint's coordinates
        // encode the per-sample lip gain and which feature channel
        // carries the true envelope.
        Mat xc = canonical_template();
        for (std::size_t j = 0; j < xc.size(); ++j) xc.data()[j] += 0.02 * rng.normal();
        const double lip_gain = rng.uniform(0.5, 1.0);
        const std::size_t env_channel = static_cast<std::size_t>(rng.below(cfg.env_channels));
        xc(kLipKeypointIndex, 0) = lip_gain;
        xc(kLipKeypointIndex, kLipCoordinate) =
            (static_cast<double>(env_channel) + 0.5) / static_cast<double>(cfg.env_channels);
        s.xc = CanonicalKeypoints(xc);

        // Driving envelope and decoys share the same construction.
        const SmoothSignal env_sig = random_smooth(rng, 0.05, 0.18, 4, n, 0.5, 0.22);
        std::vector<SmoothSignal> channel_sigs(cfg.env_channels);
        for (std::size_t c = 0; c < cfg.env_channels; ++c)
            channel_sigs[c] = c == env_channel ? env_sig : random_smooth(rng, 0.05, 0.18, 4, n, 0.5, 0.22);
        auto env_at = [](const SmoothSignal& sig, double k) {
            return clamp(sig.at(k), 0.02, 0.98);
        };

        s.envelope.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            s.envelope[k] = env_at(env_sig, static_cast<double>(k));

        // Head pose: per-channel std pinned to the target diversity.
        SmoothSignal pose[3];
        for (auto& p : pose) {
            const double base = rng.uniform(-5.0, 5.0);
            p = random_smooth(rng, 0.01, 0.05, 4, n, base, cfg.target_diversity);
        }
        SmoothSignal scale_sig = random_smooth(rng, 0.01, 0.05, 4, n, 1.0, 0.03);
        SmoothSignal trans_sig[3];
        for (auto& t : trans_sig) t = random_smooth(rng, 0.01, 0.05, 4, n, 0.0, 0.02);

        std::vector<SmoothSignal> delta_sigs(kNumKeypoints * 3);
        for (auto& d : delta_sigs) d = random_smooth(rng, 0.02, 0.1, 4, n, 0.0, 0.02);

        auto frame_at = [&](double k) {
            MotionFrame f;
            f.scale = clamp(scale_sig.at(k), 0.9, 1.1);
            f.rot.pitch = clamp(pose[0].at(k), -30.0, 30.0);
            f.rot.yaw = clamp(pose[1].at(k), -30.0, 30.0);
            f.rot.roll = clamp(pose[2].at(k), -30.0, 30.0);
            for (std::size_t j = 0; j < 3; ++j) f.translation[j] = trans_sig[j].at(k);
            for (std::size_t p = 0; p < kNumKeypoints; ++p)
                for (std::size_t j = 0; j < 3; ++j) f.delta(p, j) = delta_sigs[3 * p + j].at(k);
            f.delta(kLipKeypointIndex, kLipCoordinate) =
                lip_gain * (env_at(env_sig, k) - 0.5);
            return f;
        };

        s.frames.reserve(n);
        for (std::size_t k = 0; k < n; ++k) s.frames.push_back(frame_at(static_cast<double>(k)));
        s.motion0 = frame_at(-1.0);

        // Features: candidate channels carry the lag-1 envelope signals
        // (only one is the true driver); the rest are smooth noise.
        s.audio.features = Mat(n, cfg.audio_dim);
        for (std::size_t k = 0; k < n; ++k) {
            const double lagged_k = k == 0 ? 0.0 : static_cast<double>(k - 1);
            for (std::size_t c = 0; c < cfg.env_channels; ++c)
                s.audio.features(k, c) = 2.0 * env_at(channel_sigs[c], lagged_k) - 1.0;
        }
        for (std::size_t c = cfg.env_channels; c < cfg.audio_dim; ++c) {
            const SmoothSignal noise = random_smooth(rng, 0.05, 0.25, 4, n, 0.0, 1.0);
            for (std::size_t k = 0; k < n; ++k)
                s.audio.features(k, c) = noise.at(static_cast<double>(k));
        }

        ds.samples.push_back(std::move(s));
    }
    return ds;
}

SyntheticDataset make_synthetic_dataset(std::size_t num_sequences, std::size_t n,
                                        std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.num_sequences = num_sequences;
    cfg.n = n;
    cfg.seed = seed;
    return make_synthetic_dataset(cfg);
}

// --- training -----------------------------------------------------------------

void TrainConfig::validate() const {
    require(window >= 1, "TrainConfig: window must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(total_steps >= 1, "TrainConfig: total_steps must be >= 1");
    require(peak_lr > 0.0, "TrainConfig: peak_lr must be positive");
    require(warmup_steps < total_steps, "TrainConfig: warmup must be shorter than the run");
    require(diffusion_T >= 1, "TrainConfig: diffusion_T must be >= 1");
}

double lr_at(const TrainConfig& cfg, std::size_t step) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.peak_lr * static_cast<double>(step + 1) /
               static_cast<double>(cfg.warmup_steps);
    const double progress =
        cfg.total_steps == cfg.warmup_steps
            ? 1.0
            : static_cast<double>(step - cfg.warmup_steps) /
                  static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(progress, 1.0)));
}

AdamW::AdamW(std::vector<Tensor*> params, double beta1, double beta2, double eps,
             double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps),
      weight_decay_(weight_decay) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* t : params_) {
        m_.emplace_back(t->v.rows(), t->v.cols());
        v_.emplace_back(t->v.rows(), t->v.cols());
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Tensor& t = *params_[p];
        for (std::size_t i = 0; i < t.v.size(); ++i) {
            const double g = t.g.data()[i];
            double& m = m_[p].data()[i];
            double& v = v_[p].data()[i];
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            t.v.data()[i] -=
                lr * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay_ * t.v.data()[i]);
        }
    }
}

namespace {

Normalizer fit_normalizer(const SyntheticDataset& ds) {
    Normalizer norm = Normalizer::identity(ds.cfg.audio_dim);
    const double eps = 1e-8;

    Mat lat_sum(1, kLatentDim), lat_sq(1, kLatentDim);
    std::size_t lat_n = 0;
    Mat feat_sum(1, ds.cfg.audio_dim), feat_sq(1, ds.cfg.audio_dim);
    std::size_t feat_n = 0;
    for (const SyntheticSample& s : ds.samples) {
        const Mat lat = sequence_to_latents(s.frames);
        for (std::size_t r = 0; r < lat.rows(); ++r)
            for (std::size_t c = 0; c < kLatentDim; ++c) {
                lat_sum(0, c) += lat(r, c);
                lat_sq(0, c) += lat(r, c) * lat(r, c);
            }
        lat_n += lat.rows();
        for (std::size_t r = 0; r < s.audio.features.rows(); ++r)
            for (std::size_t c = 0; c < s.audio.features.cols(); ++c) {
                feat_sum(0, c) += s.audio.features(r, c);
                feat_sq(0, c) += s.audio.features(r, c) * s.audio.features(r, c);
            }
        feat_n += s.audio.features.rows();
    }
    for (std::size_t c = 0; c < kLatentDim; ++c) {
        const double mean = lat_sum(0, c) / static_cast<double>(lat_n);
        const double var = lat_sq(0, c) / static_cast<double>(lat_n) - mean * mean;
        norm.latent_mean(0, c) = mean;
        norm.latent_std(0, c) = std::sqrt(std::max(var, 0.0)) + eps;
    }
    for (std::size_t c = 0; c < ds.cfg.audio_dim; ++c) {
        const double mean = feat_sum(0, c) / static_cast<double>(feat_n);
        const double var = feat_sq(0, c) / static_cast<double>(feat_n) - mean * mean;
        norm.feat_mean(0, c) = mean;
        norm.feat_std(0, c) = std::sqrt(std::max(var, 0.0)) + eps;
    }
    return norm;
}

} // namespace

TrainingItem make_training_item(const SyntheticSample& sample, const Normalizer& norm,
                                const DiffusionSchedule& sched, std::size_t window,
                                std::size_t ref_rows, int t, const Mat& eps) {
    require(sample.frames.size() >= window, "make_training_item: sample shorter than window");
    require(eps.rows() == window && eps.cols() == kLatentDim,
            "make_training_item: eps must be window x 70");
    require(ref_rows == 1 || ref_rows == 2, "make_training_item: ref_rows must be 1 or 2");

    Mat seq_lat = sequence_to_latents(sample.frames);
    if (sample.frames.size() > window) seq_lat = seq_lat.slice_rows(0, window);
    const Mat z0 = norm.normalize_latents(seq_lat);

    TrainingItem item;
    item.t = t;
    item.eps = eps;
    const Mat zt = forward_sample(z0, t, eps, sched);
    const Mat ref_raw = ref_rows == 2 ? build_reference_rows(sample.xc, sample.motion0)
                                      : build_reference_rows_no_canonical(sample.motion0);
    item.input = assemble_input(norm.normalize_latents(ref_raw), zt);
    item.audio = norm.normalize_features(sample.audio.features.slice_rows(0, window));
    return item;
}

TrainResult train(const SyntheticDataset& dataset, const TrainConfig& cfg,
                  const DenoiserConfig& model_cfg, std::size_t ref_rows) {
    cfg.validate();
    model_cfg.validate();
    require(!dataset.samples.empty(), "train: dataset is empty");
    require(ref_rows == 1 || ref_rows == 2, "train: ref_rows must be 1 or 2");
    require(dataset.cfg.audio_dim == model_cfg.audio_dim,
            "train: dataset audio_dim differs from model audio_dim");
    for (const SyntheticSample& s : dataset.samples)
        require(s.frames.size() >= cfg.window, "train: sample shorter than the window");

    TrainResult result;
    result.bundle.cfg = model_cfg;
    result.bundle.model = std::make_unique<DenoiserModel>(model_cfg);
    result.bundle.model->init_params(cfg.seed);
    result.bundle.sched = make_schedule(cfg.diffusion_T);
    result.bundle.norm = fit_normalizer(dataset);
    result.bundle.window = cfg.window;
    result.bundle.ref_rows = ref_rows;
    result.bundle.seed = cfg.seed;

    DenoiserModel& model = *result.bundle.model;
    const Normalizer& norm = result.bundle.norm;
    const DiffusionSchedule& sched = result.bundle.sched;
    AdamW opt(model.params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay);
    Rng rng(mix_seed(cfg.seed, 0x747261696eULL));

    const std::size_t n = cfg.window;
    const double grad_scale =
        1.0 / (static_cast<double>(n) * static_cast<double>(kLatentDim) *
               static_cast<double>(cfg.batch_size));

    // Batch items run concurrently, each into its own gradient buffer;
    // buffers are reduced in item order, so the result does not depend
    // on the thread count or schedule. The pool is kept small so the
    // buffers stay cache-resident between reductions.
#ifdef _OPENMP
    const std::size_t hw_threads = static_cast<std::size_t>(omp_get_max_threads());
#else
    const std::size_t hw_threads = 1;
#endif
    constexpr std::size_t kGradBudgetBytes = 256ull << 20;
    const std::size_t per_item_bytes = model.param_count() * sizeof(double);
    std::size_t chunk = std::min(cfg.batch_size, 2 * hw_threads);
    chunk = std::max<std::size_t>(
        1, std::min(chunk, kGradBudgetBytes / std::max<std::size_t>(per_item_bytes, 1)));

    std::vector<GradBuffer> buffers;
    std::vector<ForwardCache> caches(chunk);
    for (std::size_t i = 0; i < chunk; ++i) buffers.push_back(model.make_grad_buffer());

    struct Draw {
        std::size_t sample_index;
        int t;
        Mat eps;
    };
    std::vector<Draw> draws(cfg.batch_size);
    std::vector<double> item_losses(cfg.batch_size);

    for (std::size_t step = 0; step < cfg.total_steps; ++step) {
        model.zero_grads();
        // Randomness is drawn up front on a single stream so the batch
        // is identical however it is scheduled.
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            draws[b].sample_index = rng.below(dataset.samples.size());
            draws[b].t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T)));
            draws[b].eps = rng.normal_mat(n, kLatentDim);
        }

        for (std::size_t chunk_start = 0; chunk_start < cfg.batch_size; chunk_start += chunk) {
            const std::int64_t count = static_cast<std::int64_t>(
                std::min(chunk, cfg.batch_size - chunk_start));
#pragma omp parallel for schedule(dynamic, 1)
            for (std::int64_t i = 0; i < count; ++i) {
                const std::size_t b = chunk_start + static_cast<std::size_t>(i);
                const Draw& draw = draws[b];
                buffers[static_cast<std::size_t>(i)].zero();
                const TrainingItem item =
                    make_training_item(dataset.samples[draw.sample_index], norm, sched, n,
                                       ref_rows, draw.t, draw.eps);

                ForwardCache& cache = caches[static_cast<std::size_t>(i)];
                const Mat pred =
                    model.forward(item.input.rows, item.audio, draw.t, ref_rows, cache);
                const Mat pred_motion = strip_references(pred, ref_rows);
                item_losses[b] = training_loss(pred_motion, item.eps);

                // Loss covers only the motion rows; reference rows get
                // a zero gradient.
                Mat d_out(pred.rows(), kLatentDim);
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < kLatentDim; ++c)
                        d_out(ref_rows + r, c) =
                            2.0 * (pred_motion(r, c) - item.eps(r, c)) * grad_scale;
                model.backward(cache, d_out, &buffers[static_cast<std::size_t>(i)]);
            }
            for (std::int64_t i = 0; i < count; ++i)
                model.accumulate_grads(buffers[static_cast<std::size_t>(i)]);
        }

        double batch_loss = 0.0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) batch_loss += item_losses[b];
        batch_loss /= static_cast<double>(cfg.batch_size);

        if (!std::isfinite(batch_loss)) {
            const double gnorm = frob_norm(model.params(), true);
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                     " (lr " + std::to_string(lr_at(cfg, step)) + ", grad norm " +
                                     std::to_string(gnorm) + ")");
        }

        opt.step(lr_at(cfg, step));
        result.loss_history.push_back(batch_loss);
        result.bundle.trained_steps = step + 1;

        if (cfg.log_every > 0 && (step % static_cast<std::size_t>(cfg.log_every) == 0 ||
                                  step + 1 == cfg.total_steps))
            std::printf("step %6zu  loss %.6f  lr %.3e\n", step, batch_loss, lr_at(cfg, step));

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            (step + 1) % cfg.checkpoint_every == 0 && step + 1 != cfg.total_steps)
            io::write_checkpoint(cfg.checkpoint_path + ".step" + std::to_string(step + 1),
                                 result.bundle);
    }

    if (!cfg.checkpoint_path.empty()) io::write_checkpoint(cfg.checkpoint_path, result.bundle);
    return result;
}

// --- sampling -------------------------------------------------------------------

MotionSequence generate(const ModelBundle& bundle, const CanonicalKeypoints& xc,
                        const MotionFrame& motion0, const AudioFeatureSequence& audio,
                        int steps, std::uint64_t seed) {
    if (!bundle.model)
        throw std::logic_error("generate: no model loaded in bundle");
    const std::size_t n = audio.features.rows();
    require(n >= 1, "generate: need at least one audio frame");
    require(n <= bundle.window, "generate: audio longer than the model window; use chunked_generate");
    require(audio.features.cols() == bundle.cfg.audio_dim,
            "generate: feature width " + std::to_string(audio.features.cols()) +
                " does not match model audio_dim " + std::to_string(bundle.cfg.audio_dim));

    const Mat ref = bundle.norm.normalize_latents(bundle.reference_rows(xc, motion0));
    const Mat audio_n = bundle.norm.normalize_features(audio.features);

    Rng rng(mix_seed(seed, 0x67656eULL));
    Mat z = rng.normal_mat(n, kLatentDim);

    const TimestepSubsequence ts = ddim_timesteps(bundle.sched.T, steps);
    for (std::size_t i = 0; i < ts.steps.size(); ++i) {
        const int t = ts.steps[i];
        const int t_prev = i + 1 < ts.steps.size() ? ts.steps[i + 1] : 0;

        const StructuredInput si = assemble_input(ref, z);
        // Reference rows must stay clean at every step.
        for (std::size_t r = 0; r < bundle.ref_rows; ++r)
            for (std::size_t c = 0; c < kLatentDim; ++c)
                if (si.rows(r, c) != ref(r, c))
                    throw std::logic_error("generate: reference row corrupted during sampling");

        const Mat pred = bundle.model->denoise(si.rows, audio_n, t, bundle.ref_rows);
        const Mat eps_hat = strip_references(pred, bundle.ref_rows);
        z = ddim_step(z, eps_hat, t, t_prev, bundle.sched);
    }

    return latents_to_sequence(bundle.norm.denormalize_latents(z));
}

MotionSequence chunked_generate(const ModelBundle& bundle, const CanonicalKeypoints& xc,
                                const MotionFrame& motion0, const AudioFeatureSequence& audio,
                                int steps, std::uint64_t seed) {
    if (!bundle.model)
        throw std::logic_error("chunked_generate: no model loaded in bundle");
    const std::size_t m = audio.features.rows();
    require(m >= 1, "chunked_generate: need at least one audio frame");

    MotionSequence out;
    out.reserve(m);
    MotionFrame ref_motion = motion0;
    std::size_t start = 0, chunk_index = 0;
    while (start < m) {
        const std::size_t len = std::min(bundle.window, m - start);
        AudioFeatureSequence chunk;
        chunk.features = audio.features.slice_rows(start, start + len);
        const std::uint64_t chunk_seed =
            chunk_index == 0 ? seed : mix_seed(seed, chunk_index);
        MotionSequence part = generate(bundle, xc, ref_motion, chunk, steps, chunk_seed);
        ref_motion = part.back();
        for (MotionFrame& f : part) out.push_back(std::move(f));
        start += len;
        ++chunk_index;
    }
    return out;
}

} // namespace kdiff
