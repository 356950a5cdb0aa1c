#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kdiff/eval.hpp"
#include "kdiff/pipeline.hpp"
#include "kdiff/rng.hpp"

using namespace kdiff;

namespace {

SyntheticConfig small_synth(std::size_t num = 4, std::size_t n = 8) {
    SyntheticConfig cfg;
    cfg.num_sequences = num;
    cfg.n = n;
    cfg.seed = 7;
    cfg.audio_dim = 8;
    cfg.env_channels = 2;
    return cfg;
}

DenoiserConfig small_model(std::size_t audio_dim = 8) {
    DenoiserConfig cfg;
    cfg.model_dim = 16;
    cfg.n_blocks = 1;
    cfg.n_heads = 2;
    cfg.audio_dim = audio_dim;
    return cfg;
}

TrainConfig small_train(std::size_t window = 8) {
    TrainConfig cfg;
    cfg.window = window;
    cfg.batch_size = 2;
    cfg.total_steps = 10;
    cfg.warmup_steps = 2;
    cfg.seed = 3;
    return cfg;
}

bool sequences_equal(const MotionSequence& a, const MotionSequence& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const MotionFrame& x = a[i];
        const MotionFrame& y = b[i];
        if (x.scale != y.scale || x.rot.pitch != y.rot.pitch || x.rot.yaw != y.rot.yaw ||
            x.rot.roll != y.rot.roll || x.translation != y.translation || !(x.delta == y.delta))
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("synthetic datasets are reproducible from the seed") {
    const SyntheticDataset a = make_synthetic_dataset(small_synth());
    const SyntheticDataset b = make_synthetic_dataset(small_synth());
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(sequence_to_latents(a.samples[i].frames) == sequence_to_latents(b.samples[i].frames));
        CHECK(a.samples[i].audio.features == b.samples[i].audio.features);
        CHECK(a.samples[i].envelope == b.samples[i].envelope);
        CHECK(a.samples[i].xc.points == b.samples[i].xc.points);
    }

    SyntheticConfig other = small_synth();
    other.seed = 8;
    const SyntheticDataset c = make_synthetic_dataset(other);
    CHECK(max_abs_diff(sequence_to_latents(a.samples[0].frames),
                       sequence_to_latents(c.samples[0].frames)) > 0.0);
}

TEST_CASE("generator oracle: lip channel tracks the envelope with correlation 1") {
    const SyntheticDataset ds = make_synthetic_dataset(make_synthetic_dataset(2, 16, 5).cfg);
    for (const SyntheticSample& s : ds.samples) {
        const SyncResult sync = sync_correlation(s.frames, s.envelope);
        CHECK(!sync.zero_variance);
        CHECK(sync.r == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("generated pose diversity matches the configured target") {
    SyntheticConfig cfg = small_synth(3, 32);
    const SyntheticDataset ds = make_synthetic_dataset(cfg);
    for (const SyntheticSample& s : ds.samples)
        CHECK(head_diversity(s.frames) == doctest::Approx(cfg.target_diversity).epsilon(1e-9));

    cfg.target_diversity = 1.5;
    const SyntheticDataset wide = make_synthetic_dataset(cfg);
    for (const SyntheticSample& s : wide.samples)
        CHECK(head_diversity(s.frames) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("synthetic pose stays within the +-30 degree band and scale within [0.9, 1.1]") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth(6, 24));
    for (const SyntheticSample& s : ds.samples) {
        for (const MotionFrame& f : s.frames) {
            CHECK(std::abs(f.rot.pitch) <= 30.0);
            CHECK(std::abs(f.rot.yaw) <= 30.0);
            CHECK(std::abs(f.rot.roll) <= 30.0);
            CHECK(f.scale >= 0.9);
            CHECK(f.scale <= 1.1);
        }
    }
}

TEST_CASE("learning-rate schedule: warmup scale, peak, and decay to zero") {
    TrainConfig cfg;
    cfg.peak_lr = 5.12e-4;
    cfg.warmup_steps = 100;
    cfg.total_steps = 1000;

    CHECK(lr_at(cfg, 0) == doctest::Approx(cfg.peak_lr / 100.0).epsilon(1e-12));
    CHECK(lr_at(cfg, 100) == doctest::Approx(5.12e-4).epsilon(1e-12));
    CHECK(lr_at(cfg, 1000) == doctest::Approx(0.0).epsilon(1e-15));

    // Monotone segments.
    for (std::size_t s = 1; s < 100; ++s) CHECK(lr_at(cfg, s) > lr_at(cfg, s - 1));
    for (std::size_t s = 101; s <= 1000; ++s) CHECK(lr_at(cfg, s) <= lr_at(cfg, s - 1));
}

TEST_CASE("training items never noise the reference rows") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    const DiffusionSchedule sched = make_schedule(1000);
    Normalizer norm = Normalizer::identity(ds.cfg.audio_dim);
    Rng rng(61);

    const SyntheticSample& s = ds.samples[0];
    const Mat ref_expected = build_reference_rows(s.xc, s.motion0);
    for (int t : {1, 250, 999}) {
        const Mat eps = rng.normal_mat(8, 70);
        const TrainingItem item = make_training_item(s, norm, sched, 8, 2, t, eps);
        REQUIRE(item.input.rows.rows() == 10);
        // Reference rows are exactly the (normalized) priors at every t.
        for (std::size_t c = 0; c < 70; ++c) {
            CHECK(item.input.rows(0, c) == ref_expected(0, c));
            CHECK(item.input.rows(1, c) == ref_expected(1, c));
        }
        // Motion rows carry the closed-form noising of the clean latents.
        const Mat z0 = norm.normalize_latents(sequence_to_latents(s.frames).slice_rows(0, 8));
        const Mat zt = forward_sample(z0, t, eps, sched);
        CHECK(strip_references(item.input.rows, 2) == zt);
    }
}

TEST_CASE("the loss ignores reference-row predictions entirely") {
    Rng rng(62);
    const Mat eps = rng.normal_mat(6, 70);
    Mat pred = rng.normal_mat(8, 70);
    const double loss = training_loss(strip_references(pred, 2), eps);
    // Garbage in the reference rows must not move the loss.
    for (std::size_t c = 0; c < 70; ++c) {
        pred(0, c) = 1e9;
        pred(1, c) = -1e9;
    }
    CHECK(training_loss(strip_references(pred, 2), eps) == loss);
}

TEST_CASE("one training step on a single sample leaves finite loss and moves parameters") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth(1, 8));
    TrainConfig cfg = small_train();
    cfg.total_steps = 1;
    cfg.warmup_steps = 0;
    cfg.batch_size = 1;

    const TrainResult result = train(ds, cfg, small_model());
    REQUIRE(result.loss_history.size() == 1);
    CHECK(std::isfinite(result.loss_history[0]));

    DenoiserModel fresh(small_model());
    fresh.init_params(cfg.seed);
    double moved = 0.0;
    for (std::size_t p = 0; p < fresh.params().size(); ++p)
        moved += max_abs_diff(result.bundle.model->params()[p]->v, fresh.params()[p]->v);
    CHECK(moved > 0.0);
}

TEST_CASE("identical seeds give identical loss curves and samples") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    const TrainResult a = train(ds, small_train(), small_model());
    const TrainResult b = train(ds, small_train(), small_model());
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t i = 0; i < a.loss_history.size(); ++i)
        CHECK(a.loss_history[i] == b.loss_history[i]);

    const SyntheticSample& s = ds.samples[0];
    const MotionSequence ga = generate(a.bundle, s.xc, s.motion0, s.audio, 10, 99);
    const MotionSequence gb = generate(b.bundle, s.xc, s.motion0, s.audio, 10, 99);
    CHECK(sequences_equal(ga, gb));
}

TEST_CASE("absurd learning rates abort with a diagnostic") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    TrainConfig cfg = small_train();
    cfg.peak_lr = 1e18;
    cfg.warmup_steps = 0;
    cfg.total_steps = 8;
    try {
        train(ds, cfg, small_model());
        FAIL("expected a non-finite abort");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("non-finite") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
        CHECK(msg.find("grad norm") != std::string::npos);
    }
}

TEST_CASE("invalid train configs are rejected") {
    TrainConfig cfg = small_train();
    cfg.warmup_steps = cfg.total_steps;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_train();
    cfg.peak_lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_train();
    cfg.window = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    const SyntheticDataset empty{small_synth(), {}};
    CHECK_THROWS_AS(train(empty, small_train(), small_model()), std::invalid_argument);
}

TEST_CASE("generation is seed-deterministic with the audio row count as length") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    const TrainResult result = train(ds, small_train(), small_model());
    const SyntheticSample& s = ds.samples[1];

    const MotionSequence a = generate(result.bundle, s.xc, s.motion0, s.audio, 10, 5);
    const MotionSequence b = generate(result.bundle, s.xc, s.motion0, s.audio, 10, 5);
    const MotionSequence c = generate(result.bundle, s.xc, s.motion0, s.audio, 10, 6);
    CHECK(a.size() == s.audio.features.rows());
    CHECK(sequences_equal(a, b));
    CHECK(!sequences_equal(a, c));
}

TEST_CASE("generate requires a loaded model and matching feature width") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    const SyntheticSample& s = ds.samples[0];

    ModelBundle unloaded;
    CHECK_THROWS_AS(generate(unloaded, s.xc, s.motion0, s.audio, 10, 1), std::logic_error);

    const TrainResult result = train(ds, small_train(), small_model());
    AudioFeatureSequence wrong;
    wrong.features = Mat(4, 5);
    CHECK_THROWS_AS(generate(result.bundle, s.xc, s.motion0, wrong, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("chunked generation equals plain generation when audio fits one window") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    const TrainResult result = train(ds, small_train(), small_model());
    const SyntheticSample& s = ds.samples[2];

    const MotionSequence plain = generate(result.bundle, s.xc, s.motion0, s.audio, 10, 21);
    const MotionSequence chunked = chunked_generate(result.bundle, s.xc, s.motion0, s.audio, 10, 21);
    CHECK(sequences_equal(plain, chunked));
}

TEST_CASE("chunked generation covers long audio deterministically") {
    const SyntheticDataset train_ds = make_synthetic_dataset(small_synth());
    const TrainResult result = train(train_ds, small_train(), small_model());

    SyntheticConfig long_cfg = small_synth(1, 20); // longer than the window of 8
    long_cfg.seed = 77;
    const SyntheticDataset long_ds = make_synthetic_dataset(long_cfg);
    const SyntheticSample& s = long_ds.samples[0];

    const MotionSequence a = chunked_generate(result.bundle, s.xc, s.motion0, s.audio, 10, 3);
    const MotionSequence b = chunked_generate(result.bundle, s.xc, s.motion0, s.audio, 10, 3);
    CHECK(a.size() == 20);
    CHECK(sequences_equal(a, b));
}

TEST_CASE("normalizer round-trips latents") {
    const SyntheticDataset ds = make_synthetic_dataset(small_synth());
    const TrainResult result = train(ds, small_train(), small_model());
    Rng rng(63);
    const Mat x = rng.normal_mat(5, 70);
    const Mat back = result.bundle.norm.denormalize_latents(result.bundle.norm.normalize_latents(x));
    CHECK(max_abs_diff(back, x) < 1e-9);
}
