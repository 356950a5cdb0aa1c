#include "kdiff/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kdiff::io {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Line-oriented reader that reports the file and line of every
/// complaint.
class LineReader {
public:
    LineReader(const std::string& path, std::istream& in) : path_(path), in_(in) {}

    std::string next() {
        std::string line;
        if (!std::getline(in_, line)) {
            ++line_no_;
            fail("unexpected end of file");
        }
        ++line_no_;
        return line;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error(path_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

    /// "key value" line with an exact key.
    std::string expect_key(const std::string& key) {
        const std::string line = next();
        if (line.rfind(key + " ", 0) != 0)
            fail("expected '" + key + " ...', got '" + line + "'");
        return line.substr(key.size() + 1);
    }

    long expect_int(const std::string& key) {
        const std::string value = expect_key(key);
        try {
            return std::stol(value);
        } catch (const std::exception&) {
            fail("expected integer for '" + key + "', got '" + value + "'");
        }
    }

    double expect_double(const std::string& key) {
        const std::string value = expect_key(key);
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            fail("expected number for '" + key + "', got '" + value + "'");
        }
    }

    std::vector<double> parse_doubles(const std::string& line, std::size_t expected) {
        std::vector<double> out;
        out.reserve(expected);
        const char* p = line.c_str();
        char* end = nullptr;
        while (*p) {
            const double v = std::strtod(p, &end);
            if (end == p) break;
            out.push_back(v);
            p = end;
        }
        if (out.size() != expected)
            fail("expected " + std::to_string(expected) + " values, got " +
                 std::to_string(out.size()));
        return out;
    }

    std::vector<double> next_doubles(std::size_t expected) { return parse_doubles(next(), expected); }

    int line_no() const { return line_no_; }

private:
    std::string path_;
    std::istream& in_;
    int line_no_ = 0;
};

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return in;
}

void write_row(std::ostream& out, const double* values, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        if (i) out << ' ';
        out << fmt_double(values[i]);
    }
    out << '\n';
}

void check_version(LineReader& reader, const std::string& magic, int version) {
    const std::string line = reader.next();
    const std::string expected = magic + " " + std::to_string(version);
    if (line != expected)
        reader.fail("version mismatch: expected '" + expected + "', got '" + line + "'");
}

} // namespace

// --- motion sequences ----------------------------------------------------------

void write_sequence(const std::string& path, const CanonicalKeypoints& xc,
                    const MotionSequence& seq) {
    std::ofstream out = open_out(path);
    out << "kdiff-motion " << kMotionFormatVersion << "\n";
    out << "n " << seq.size() << "\n";
    out << "fps 25\n";
    out << "keypoints " << kNumKeypoints << "\n";
    out << "layout s-euler-t-delta " << kLatentDim << "\n";
    out << "xc\n";
    for (std::size_t i = 0; i < kNumKeypoints; ++i) write_row(out, xc.points.row(i), 3);
    out << "frames\n";
    // Serialized directly (not via flatten_frame) so the format can
    // carry raw sampler output even when it falls outside the frame
    // invariants.
    for (const MotionFrame& f : seq) {
        std::vector<double> record(kLatentDim);
        record[0] = f.scale;
        record[1] = f.rot.pitch;
        record[2] = f.rot.yaw;
        record[3] = f.rot.roll;
        for (std::size_t j = 0; j < 3; ++j) record[4 + j] = f.translation[j];
        for (std::size_t i = 0; i < kNumKeypoints; ++i)
            for (std::size_t j = 0; j < 3; ++j) record[delta_index(i, j)] = f.delta(i, j);
        write_row(out, record.data(), record.size());
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<CanonicalKeypoints, MotionSequence> read_sequence(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader reader(path, in);
    check_version(reader, "kdiff-motion", kMotionFormatVersion);

    const long n = reader.expect_int("n");
    if (n < 0) reader.fail("negative frame count");
    const long fps = reader.expect_int("fps");
    if (fps != 25) reader.fail("unsupported fps " + std::to_string(fps) + " (format fixes 25)");
    const long kp = reader.expect_int("keypoints");
    if (kp != static_cast<long>(kNumKeypoints))
        reader.fail("keypoint count " + std::to_string(kp) + " unsupported (layout expects 21)");
    const std::string layout = reader.expect_key("layout");
    if (layout != "s-euler-t-delta " + std::to_string(kLatentDim))
        reader.fail("unknown layout '" + layout + "'");

    if (reader.next() != "xc") reader.fail("expected 'xc' section");
    Mat points(kNumKeypoints, 3);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const std::vector<double> row = reader.next_doubles(3);
        for (std::size_t j = 0; j < 3; ++j) points(i, j) = row[j];
    }

    if (reader.next() != "frames") reader.fail("expected 'frames' section");
    MotionSequence seq;
    seq.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        LatentFrame latent;
        latent.values = reader.next_doubles(kLatentDim);
        seq.push_back(unflatten_frame(latent));
    }
    if (reader.next() != "end") reader.fail("expected 'end' after " + std::to_string(n) + " frames");
    return {CanonicalKeypoints(points), std::move(seq)};
}

// --- features --------------------------------------------------------------------

void write_features(const std::string& path, const AudioFeatureSequence& features) {
    std::ofstream out = open_out(path);
    out << "kdiff-features " << kFeatureFormatVersion << "\n";
    out << "n " << features.features.rows() << "\n";
    out << "dim " << features.features.cols() << "\n";
    out << "rows\n";
    for (std::size_t r = 0; r < features.features.rows(); ++r)
        write_row(out, features.features.row(r), features.features.cols());
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

AudioFeatureSequence read_features(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader reader(path, in);
    check_version(reader, "kdiff-features", kFeatureFormatVersion);
    const long n = reader.expect_int("n");
    const long dim = reader.expect_int("dim");
    if (n < 0 || dim <= 0) reader.fail("bad dimensions");
    if (reader.next() != "rows") reader.fail("expected 'rows' section");

    AudioFeatureSequence seq;
    seq.features = Mat(static_cast<std::size_t>(n), static_cast<std::size_t>(dim));
    for (long r = 0; r < n; ++r) {
        const std::vector<double> row = reader.next_doubles(static_cast<std::size_t>(dim));
        for (long c = 0; c < dim; ++c)
            seq.features(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                row[static_cast<std::size_t>(c)];
    }
    if (reader.next() != "end") reader.fail("expected 'end' after feature rows");
    if (!seq.features.all_finite()) reader.fail("non-finite feature value");
    return seq;
}

// --- driving keypoints -------------------------------------------------------------

void export_driving_keypoints(const std::string& path, const CanonicalKeypoints& xc,
                              const MotionSequence& seq) {
    std::ofstream out = open_out(path);
    out << "kdiff-driving " << kDrivingFormatVersion << "\n";
    out << "n " << seq.size() << "\n";
    out << "keypoints " << kNumKeypoints << "\n";
    out << "space normalized\n";
    out << "frames\n";
    for (const MotionFrame& f : seq) {
        const Mat xd = apply_motion(xc, f);
        write_row(out, xd.data(), xd.size());
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Mat> read_driving_keypoints(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader reader(path, in);
    check_version(reader, "kdiff-driving", kDrivingFormatVersion);
    const long n = reader.expect_int("n");
    const long kp = reader.expect_int("keypoints");
    if (kp != static_cast<long>(kNumKeypoints))
        reader.fail("keypoint count " + std::to_string(kp) + " unsupported (layout expects 21)");
    reader.expect_key("space");
    if (reader.next() != "frames") reader.fail("expected 'frames' section");

    std::vector<Mat> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const std::vector<double> row = reader.next_doubles(kNumKeypoints * 3);
        frames.push_back(unflatten_keypoints(row));
    }
    if (reader.next() != "end") reader.fail("expected 'end' after frames");
    return frames;
}

// --- checkpoints ----------------------------------------------------------------------

void write_checkpoint(const std::string& path, const ModelBundle& bundle) {
    if (!bundle.model) throw std::logic_error("write_checkpoint: bundle holds no model");
    std::ofstream out = open_out(path, std::ios::binary);
    const DenoiserConfig& cfg = bundle.cfg;
    out << "kdiff-checkpoint " << kCheckpointFormatVersion << "\n";
    out << "model_dim " << cfg.model_dim << "\n";
    out << "n_blocks " << cfg.n_blocks << "\n";
    out << "n_heads " << cfg.n_heads << "\n";
    out << "latent_dim " << cfg.latent_dim << "\n";
    out << "audio_dim " << cfg.audio_dim << "\n";
    out << "max_seq " << cfg.max_seq << "\n";
    out << "ffn_mult " << cfg.ffn_mult << "\n";
    out << "use_attention " << (cfg.use_attention ? 1 : 0) << "\n";
    out << "use_rope " << (cfg.use_rope ? 1 : 0) << "\n";
    out << "window " << bundle.window << "\n";
    out << "ref_rows " << bundle.ref_rows << "\n";
    out << "diffusion_T " << bundle.sched.T << "\n";
    out << "beta_start " << fmt_double(bundle.beta_start) << "\n";
    out << "beta_end " << fmt_double(bundle.beta_end) << "\n";
    out << "trained_steps " << bundle.trained_steps << "\n";
    out << "seed " << bundle.seed << "\n";
    out << "latent_mean ";
    write_row(out, bundle.norm.latent_mean.data(), kLatentDim);
    out << "latent_std ";
    write_row(out, bundle.norm.latent_std.data(), kLatentDim);
    out << "feat_mean ";
    write_row(out, bundle.norm.feat_mean.data(), cfg.audio_dim);
    out << "feat_std ";
    write_row(out, bundle.norm.feat_std.data(), cfg.audio_dim);

    const auto& params = bundle.model->params();
    out << "tensors " << params.size() << "\n";
    std::size_t total = 0;
    for (const Tensor* t : params) {
        out << t->name << " " << t->v.rows() << " " << t->v.cols() << "\n";
        total += t->v.size();
    }
    out << "blob " << total << "\n";
    for (const Tensor* t : params)
        out.write(reinterpret_cast<const char*>(t->v.data()),
                  static_cast<std::streamsize>(t->v.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

ModelBundle read_checkpoint(const std::string& path) {
    std::ifstream in = open_in(path, std::ios::binary);
    LineReader reader(path, in);
    check_version(reader, "kdiff-checkpoint", kCheckpointFormatVersion);

    DenoiserConfig cfg;
    cfg.model_dim = static_cast<std::size_t>(reader.expect_int("model_dim"));
    cfg.n_blocks = static_cast<std::size_t>(reader.expect_int("n_blocks"));
    cfg.n_heads = static_cast<std::size_t>(reader.expect_int("n_heads"));
    cfg.latent_dim = static_cast<std::size_t>(reader.expect_int("latent_dim"));
    cfg.audio_dim = static_cast<std::size_t>(reader.expect_int("audio_dim"));
    cfg.max_seq = static_cast<std::size_t>(reader.expect_int("max_seq"));
    cfg.ffn_mult = static_cast<std::size_t>(reader.expect_int("ffn_mult"));
    cfg.use_attention = reader.expect_int("use_attention") != 0;
    cfg.use_rope = reader.expect_int("use_rope") != 0;

    ModelBundle bundle;
    bundle.cfg = cfg;
    bundle.window = static_cast<std::size_t>(reader.expect_int("window"));
    bundle.ref_rows = static_cast<std::size_t>(reader.expect_int("ref_rows"));
    const int T = static_cast<int>(reader.expect_int("diffusion_T"));
    bundle.beta_start = reader.expect_double("beta_start");
    bundle.beta_end = reader.expect_double("beta_end");
    bundle.sched = make_schedule(T, bundle.beta_start, bundle.beta_end);
    bundle.trained_steps = static_cast<std::uint64_t>(reader.expect_int("trained_steps"));
    bundle.seed = static_cast<std::uint64_t>(reader.expect_int("seed"));

    bundle.norm.latent_mean =
        Mat::from_rows(1, kLatentDim, reader.parse_doubles(reader.expect_key("latent_mean"), kLatentDim));
    bundle.norm.latent_std =
        Mat::from_rows(1, kLatentDim, reader.parse_doubles(reader.expect_key("latent_std"), kLatentDim));
    bundle.norm.feat_mean = Mat::from_rows(
        1, cfg.audio_dim, reader.parse_doubles(reader.expect_key("feat_mean"), cfg.audio_dim));
    bundle.norm.feat_std = Mat::from_rows(
        1, cfg.audio_dim, reader.parse_doubles(reader.expect_key("feat_std"), cfg.audio_dim));

    bundle.model = std::make_unique<DenoiserModel>(cfg);
    auto& params = bundle.model->params();
    const long tensor_count = reader.expect_int("tensors");
    if (tensor_count != static_cast<long>(params.size()))
        reader.fail("tensor count " + std::to_string(tensor_count) + " does not match model (" +
                    std::to_string(params.size()) + ")");
    std::size_t total = 0;
    for (Tensor* t : params) {
        std::istringstream ls(reader.next());
        std::string name;
        std::size_t rows = 0, cols = 0;
        if (!(ls >> name >> rows >> cols)) reader.fail("malformed tensor descriptor");
        if (name != t->name || rows != t->v.rows() || cols != t->v.cols())
            reader.fail("tensor mismatch: file has " + name + " " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", model expects " + t->name + " " +
                        std::to_string(t->v.rows()) + "x" + std::to_string(t->v.cols()));
        total += t->v.size();
    }
    const long blob = reader.expect_int("blob");
    if (blob != static_cast<long>(total))
        reader.fail("blob size " + std::to_string(blob) + " does not match tensors (" +
                    std::to_string(total) + ")");
    for (Tensor* t : params) {
        in.read(reinterpret_cast<char*>(t->v.data()),
                static_cast<std::streamsize>(t->v.size() * sizeof(double)));
        if (!in) reader.fail("truncated parameter blob");
    }
    return bundle;
}

// --- datasets ----------------------------------------------------------------------------

void write_dataset(const std::string& dir, const SyntheticDataset& ds) {
    fs::create_directories(dir);
    std::ofstream manifest = open_out((fs::path(dir) / "dataset.kds").string());
    manifest << "kdiff-dataset " << kDatasetFormatVersion << "\n";
    manifest << "num " << ds.samples.size() << "\n";
    manifest << "frames " << ds.cfg.n << "\n";
    manifest << "audio_dim " << ds.cfg.audio_dim << "\n";
    manifest << "seed " << ds.cfg.seed << "\n";
    manifest << "target_diversity " << fmt_double(ds.cfg.target_diversity) << "\n";
    manifest << "env_channels " << ds.cfg.env_channels << "\n";
    manifest << "samples\n";

    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "sample_%05zu", i);
        manifest << prefix << "\n";
        const SyntheticSample& s = ds.samples[i];
        const fs::path base = fs::path(dir) / prefix;

        write_sequence(base.string() + ".ref.kmo", s.xc, {s.motion0});
        write_sequence(base.string() + ".gt.kmo", s.xc, s.frames);
        write_features(base.string() + ".feat.kft", s.audio);
        AudioFeatureSequence env;
        env.features = Mat(s.envelope.size(), 1);
        for (std::size_t k = 0; k < s.envelope.size(); ++k) env.features(k, 0) = s.envelope[k];
        write_features(base.string() + ".env.kft", env);
    }
    manifest << "end\n";
    if (!manifest) throw std::runtime_error("write failed: dataset manifest in " + dir);
}

SyntheticDataset read_dataset(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "dataset.kds").string();
    std::ifstream in = open_in(manifest_path);
    LineReader reader(manifest_path, in);
    check_version(reader, "kdiff-dataset", kDatasetFormatVersion);

    SyntheticDataset ds;
    const long num = reader.expect_int("num");
    ds.cfg.num_sequences = static_cast<std::size_t>(num);
    ds.cfg.n = static_cast<std::size_t>(reader.expect_int("frames"));
    ds.cfg.audio_dim = static_cast<std::size_t>(reader.expect_int("audio_dim"));
    ds.cfg.seed = static_cast<std::uint64_t>(reader.expect_int("seed"));
    ds.cfg.target_diversity = reader.expect_double("target_diversity");
    ds.cfg.env_channels = static_cast<std::size_t>(reader.expect_int("env_channels"));
    if (reader.next() != "samples") reader.fail("expected 'samples' section");

    for (long i = 0; i < num; ++i) {
        const std::string prefix = reader.next();
        const fs::path base = fs::path(dir) / prefix;
        SyntheticSample s;

        auto [ref_xc, ref_seq] = read_sequence(base.string() + ".ref.kmo");
        if (ref_seq.size() != 1)
            reader.fail(prefix + ": reference file must hold exactly one frame");
        s.motion0 = ref_seq.front();
        auto [gt_xc, gt_seq] = read_sequence(base.string() + ".gt.kmo");
        s.xc = gt_xc;
        s.frames = std::move(gt_seq);
        s.audio = read_features(base.string() + ".feat.kft");
        const AudioFeatureSequence env = read_features(base.string() + ".env.kft");
        if (env.features.cols() != 1) reader.fail(prefix + ": envelope file must have dim 1");
        s.envelope.resize(env.features.rows());
        for (std::size_t k = 0; k < s.envelope.size(); ++k) s.envelope[k] = env.features(k, 0);
        s.seed = mix_seed(ds.cfg.seed, static_cast<std::uint64_t>(i));
        ds.samples.push_back(std::move(s));
    }
    if (reader.next() != "end") reader.fail("expected 'end' after samples");
    return ds;
}

// --- plots --------------------------------------------------------------------------------

std::vector<std::string> emit_plot_frames(const MotionSequence& seq, const CanonicalKeypoints& xc,
                                          const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("emit_plot_frames: cannot create " + out_dir);

    constexpr std::size_t kSize = 256;

    std::vector<Mat> driving;
    driving.reserve(seq.size());
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    bool first = true;
    for (const MotionFrame& f : seq) {
        Mat xd = apply_motion(xc, f);
        for (std::size_t i = 0; i < kNumKeypoints; ++i) {
            if (first) {
                min_x = max_x = xd(i, 0);
                min_y = max_y = xd(i, 1);
                first = false;
            }
            min_x = std::min(min_x, xd(i, 0));
            max_x = std::max(max_x, xd(i, 0));
            min_y = std::min(min_y, xd(i, 1));
            max_y = std::max(max_y, xd(i, 1));
        }
        driving.push_back(std::move(xd));
    }
    if (max_x - min_x < 1e-12) {
        min_x -= 0.5;
        max_x += 0.5;
    }
    if (max_y - min_y < 1e-12) {
        min_y -= 0.5;
        max_y += 0.5;
    }
    const double pad_x = 0.05 * (max_x - min_x), pad_y = 0.05 * (max_y - min_y);
    min_x -= pad_x;
    max_x += pad_x;
    min_y -= pad_y;
    max_y += pad_y;

    std::vector<std::string> paths;
    paths.reserve(driving.size());
    for (std::size_t k = 0; k < driving.size(); ++k) {
        std::vector<unsigned char> rgb(kSize * kSize * 3, 0xff);
        const Mat& xd = driving[k];
        for (std::size_t i = 0; i < kNumKeypoints; ++i) {
            const double fx = (xd(i, 0) - min_x) / (max_x - min_x);
            const double fy = (xd(i, 1) - min_y) / (max_y - min_y);
            const long px = std::lround(fx * (kSize - 1));
            const long py = static_cast<long>(kSize - 1) - std::lround(fy * (kSize - 1));
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dx = -1; dx <= 1; ++dx) {
                    const long x = px + dx, y = py + dy;
                    if (x < 0 || y < 0 || x >= static_cast<long>(kSize) ||
                        y >= static_cast<long>(kSize))
                        continue;
                    const std::size_t at =
                        3 * (static_cast<std::size_t>(y) * kSize + static_cast<std::size_t>(x));
                    rgb[at] = 0x20;
                    rgb[at + 1] = 0x30;
                    rgb[at + 2] = 0x90;
                }
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06zu.ppm", k);
        const std::string path = (fs::path(out_dir) / name).string();
        std::ofstream out = open_out(path, std::ios::binary);
        out << "P6\n" << kSize << " " << kSize << "\n255\n";
        out.write(reinterpret_cast<const char*>(rgb.data()),
                  static_cast<std::streamsize>(rgb.size()));
        if (!out) throw std::runtime_error("write failed: " + path);
        paths.push_back(path);
    }
    return paths;
}

PpmImage read_ppm(const std::string& path) {
    std::ifstream in = open_in(path, std::ios::binary);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path);
    PpmImage img;
    int maxval = 0;
    in >> img.width >> img.height >> maxval;
    in.get();
    img.rgb.resize(img.width * img.height * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!in) throw std::runtime_error("read_ppm: truncated: " + path);
    return img;
}

} // namespace kdiff::io
