#include "kdiff/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kdiff {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double channel_std(const MotionSequence& seq, double (*get)(const MotionFrame&)) {
    const double n = static_cast<double>(seq.size());
    double mean = 0.0;
    for (const MotionFrame& f : seq) mean += get(f);
    mean /= n;
    double var = 0.0;
    for (const MotionFrame& f : seq) {
        const double d = get(f) - mean;
        var += d * d;
    }
    return std::sqrt(var / n);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b, bool* degenerate) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;
    return sab / std::sqrt(saa * sbb);
}

} // namespace

double head_diversity(const MotionSequence& seq) {
    require(seq.size() >= 2, "head_diversity: need at least 2 frames");
    const double sp = channel_std(seq, [](const MotionFrame& f) { return f.rot.pitch; });
    const double sy = channel_std(seq, [](const MotionFrame& f) { return f.rot.yaw; });
    const double sr = channel_std(seq, [](const MotionFrame& f) { return f.rot.roll; });
    return (sp + sy + sr) / 3.0;
}

double smoothness(const MotionSequence& seq) {
    require(seq.size() >= 3, "smoothness: need at least 3 frames");
    double acc = 0.0;
    std::size_t count = 0;
    auto second_diff = [&](double (*get)(const MotionFrame&)) {
        for (std::size_t k = 1; k + 1 < seq.size(); ++k) {
            const double d2 = get(seq[k + 1]) - 2.0 * get(seq[k]) + get(seq[k - 1]);
            acc += d2 * d2;
            ++count;
        }
    };
    second_diff([](const MotionFrame& f) { return f.rot.pitch; });
    second_diff([](const MotionFrame& f) { return f.rot.yaw; });
    second_diff([](const MotionFrame& f) { return f.rot.roll; });
    return acc / static_cast<double>(count);
}

SyncResult sync_correlation(const MotionSequence& seq, const std::vector<double>& envelope,
                            std::size_t lip_point, std::size_t lip_coord) {
    require(seq.size() == envelope.size(), "sync_correlation: sequence and envelope lengths differ");
    require(seq.size() >= 3, "sync_correlation: need at least 3 frames");
    require(lip_point < kNumKeypoints && lip_coord < 3, "sync_correlation: bad lip channel");

    std::vector<double> lip(seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) lip[k] = seq[k].delta(lip_point, lip_coord);

    SyncResult res;
    res.r = pearson(lip, envelope, &res.zero_variance);
    return res;
}

double fps_benchmark(const ModelBundle& bundle, std::size_t n, int steps, std::size_t repeats) {
    require(repeats >= 1, "fps_benchmark: repeats must be >= 1");
    if (!bundle.model) throw std::logic_error("fps_benchmark: no model loaded");

    SyntheticConfig gen_cfg;
    gen_cfg.num_sequences = 1;
    gen_cfg.n = std::max<std::size_t>(n, 3);
    gen_cfg.seed = 99;
    gen_cfg.audio_dim = bundle.cfg.audio_dim;
    const SyntheticDataset probe = make_synthetic_dataset(gen_cfg);
    const SyntheticSample& s = probe.samples.front();
    AudioFeatureSequence audio;
    audio.features = s.audio.features.slice_rows(0, std::min(n, bundle.window));

    std::vector<double> fps(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const MotionSequence seq = generate(bundle, s.xc, s.motion0, audio, steps, 7 + r);
        const auto t1 = std::chrono::steady_clock::now();
        const double sec = std::chrono::duration<double>(t1 - t0).count();
        fps[r] = static_cast<double>(seq.size()) / std::max(sec, 1e-9);
    }
    std::sort(fps.begin(), fps.end());
    return fps[fps.size() / 2];
}

EvalReport evaluate_on(const ModelBundle& bundle, const std::vector<SyntheticSample>& holdout,
                       int steps, std::uint64_t seed, bool measure_fps) {
    require(!holdout.empty(), "evaluate_on: empty holdout set");

    EvalReport report;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
        const SyntheticSample& s = holdout[i];
        const MotionSequence seq =
            chunked_generate(bundle, s.xc, s.motion0, s.audio, steps, mix_seed(seed, i));

        EvalReport::PerSequence per{};
        per.diversity = head_diversity(seq);
        per.smoothness = smoothness(seq);
        const SyncResult sync = sync_correlation(seq, s.envelope);
        per.sync_r = sync.r;
        report.sync_degenerate = report.sync_degenerate || sync.zero_variance;
        report.sequences.push_back(per);

        report.diversity += per.diversity;
        report.smoothness += per.smoothness;
        report.sync_r += per.sync_r;
    }
    const double n = static_cast<double>(holdout.size());
    report.diversity /= n;
    report.smoothness /= n;
    report.sync_r /= n;
    if (measure_fps)
        report.fps = fps_benchmark(bundle, std::min<std::size_t>(bundle.window, 16), steps, 3);
    return report;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "sequences evaluated: " << sequences.size() << "\n";
    os << "head diversity (deg): " << diversity << "\n";
    os << "smoothness (deg^2):   " << smoothness << "\n";
    os << "sync correlation:     " << sync_r << (sync_degenerate ? "  [degenerate input]" : "")
       << "\n";
    if (fps > 0.0) os << "fps:                  " << fps << "\n";
    return os.str();
}

std::string EvalReport::to_key_values() const {
    std::ostringstream os;
    os << "diversity " << diversity << "\n";
    os << "smoothness " << smoothness << "\n";
    os << "sync_r " << sync_r << "\n";
    os << "sync_degenerate " << (sync_degenerate ? 1 : 0) << "\n";
    if (fps > 0.0) os << "fps " << fps << "\n";
    for (std::size_t i = 0; i < sequences.size(); ++i)
        os << "seq" << i << ".diversity " << sequences[i].diversity << "\n"
           << "seq" << i << ".smoothness " << sequences[i].smoothness << "\n"
           << "seq" << i << ".sync_r " << sequences[i].sync_r << "\n";
    return os.str();
}

AblationVariant parse_variant(const std::string& name) {
    AblationVariant v;
    v.name = name;
    if (name == "full") return v;
    if (name == "no_reference_row") {
        v.ref_rows = 1;
        return v;
    }
    if (name == "no_attention") {
        v.use_attention = false;
        return v;
    }
    if (name == "no_rope") {
        v.use_rope = false;
        return v;
    }
    for (std::size_t frames : {8, 16, 32, 64}) {
        if (name == "n" + std::to_string(frames)) {
            v.window = frames;
            return v;
        }
    }
    for (int steps : {1, 5, 10, 20, 50, 100, 200}) {
        if (name == "steps" + std::to_string(steps)) {
            v.steps = steps;
            v.retrain = false; // sampled from the full model
            return v;
        }
    }
    throw std::invalid_argument("unknown ablation variant: " + name);
}

AblationTable run_ablation(const SyntheticDataset& dataset,
                           const std::vector<SyntheticSample>& holdout,
                           const std::vector<std::string>& variants, const TrainConfig& train_cfg,
                           const DenoiserConfig& model_cfg, int base_steps) {
    // Validate every name before spending any training time.
    std::vector<AblationVariant> parsed;
    parsed.reserve(variants.size());
    for (const std::string& name : variants) parsed.push_back(parse_variant(name));

    AblationTable table;
    TrainResult full_result;
    bool have_full = false;
    auto ensure_full = [&]() -> TrainResult& {
        if (!have_full) {
            full_result = train(dataset, train_cfg, model_cfg);
            have_full = true;
        }
        return full_result;
    };

    for (const AblationVariant& v : parsed) {
        AblationRow row;
        row.variant = v.name;
        const int steps = v.steps > 0 ? v.steps : base_steps;

        if (!v.retrain || v.name == "full") {
            row.report = evaluate_on(ensure_full().bundle, holdout, steps, train_cfg.seed);
        } else {
            DenoiserConfig cfg = model_cfg;
            cfg.use_attention = v.use_attention;
            cfg.use_rope = v.use_rope;
            TrainConfig tc = train_cfg;
            tc.checkpoint_path.clear();
            if (v.window > 0) tc.window = v.window;
            const TrainResult res = train(dataset, tc, cfg, v.ref_rows);
            row.report = evaluate_on(res.bundle, holdout, steps, train_cfg.seed);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string AblationTable::to_text() const {
    std::ostringstream os;
    os << "variant\tdiversity\tsmoothness\tsync_r\n";
    for (const AblationRow& row : rows)
        os << row.variant << "\t" << row.report.diversity << "\t" << row.report.smoothness << "\t"
           << row.report.sync_r << "\n";
    return os.str();
}

} // namespace kdiff
