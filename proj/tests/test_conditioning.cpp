#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kdiff/conditioning.hpp"
#include "kdiff/io.hpp"
#include "kdiff/rng.hpp"

using namespace kdiff;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<double> tone(double hz, double seconds, double amp = 0.5) {
    const std::size_t n = static_cast<std::size_t>(seconds * kAudioSampleRate);
    std::vector<double> samples(n);
    for (std::size_t i = 0; i < n; ++i)
        samples[i] = amp * std::sin(2.0 * 3.14159265358979323846 * hz * static_cast<double>(i) /
                                    kAudioSampleRate);
    return samples;
}

} // namespace

TEST_CASE("reference row 0 holds the canonical keypoints after zero padding") {
    CanonicalKeypoints xc(Mat(kNumKeypoints, 3, 1.0));
    MotionFrame id;
    const Mat rows = build_reference_rows(xc, id);
    REQUIRE(rows.rows() == 2);
    REQUIRE(rows.cols() == 70);
    for (std::size_t c = 0; c < 7; ++c) CHECK(rows(0, c) == 0.0);
    for (std::size_t c = 7; c < 70; ++c) CHECK(rows(0, c) == 1.0);
}

TEST_CASE("reference row 1 is the flattened reference motion") {
    Rng rng(51);
    CanonicalKeypoints xc(rng.normal_mat(kNumKeypoints, 3));
    MotionFrame id; // scale 1, rest zero
    const Mat rows = build_reference_rows(xc, id);
    CHECK(rows(1, 0) == 1.0);
    for (std::size_t c = 1; c < 70; ++c) CHECK(rows(1, c) == 0.0);
}

TEST_CASE("sentinel values land at their layout indices") {
    Mat points(kNumKeypoints, 3);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            points(i, j) = 1000.0 + 10.0 * static_cast<double>(i) + static_cast<double>(j);
    CanonicalKeypoints xc(points);

    MotionFrame m0;
    m0.scale = 7.5;
    m0.rot = {1.0, 2.0, 3.0};
    m0.translation = {4.0, 5.0, 6.0};
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            m0.delta(i, j) = -(10.0 * static_cast<double>(i) + static_cast<double>(j));

    const Mat rows = build_reference_rows(xc, m0);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(rows(0, 7 + 3 * i + j) == points(i, j));
    CHECK(rows(1, 0) == 7.5);
    CHECK(rows(1, 1) == 1.0);
    CHECK(rows(1, 2) == 2.0);
    CHECK(rows(1, 3) == 3.0);
    CHECK(rows(1, 4) == 4.0);
    CHECK(rows(1, 5) == 5.0);
    CHECK(rows(1, 6) == 6.0);
    for (std::size_t i = 0; i < kNumKeypoints; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(rows(1, delta_index(i, j)) == m0.delta(i, j));
}

TEST_CASE("assemble_input stacks references over motion rows") {
    Rng rng(52);
    const Mat ref = rng.normal_mat(2, 70);

    const StructuredInput empty = assemble_input(ref, Mat(0, 0));
    CHECK(empty.rows.rows() == 2);
    CHECK(empty.n == 0);

    const Mat motion = rng.normal_mat(64, 70);
    const StructuredInput si = assemble_input(ref, motion);
    CHECK(si.rows.rows() == 66);
    CHECK(si.n == 64);
    CHECK(strip_references(si.rows) == motion);

    CHECK_THROWS_AS(assemble_input(rng.normal_mat(2, 69), motion), std::invalid_argument);
    CHECK_THROWS_AS(assemble_input(ref, rng.normal_mat(3, 69)), std::invalid_argument);
}

TEST_CASE("strip_references drops exactly the prior rows") {
    Rng rng(53);
    const Mat full = rng.normal_mat(10, 70);
    const Mat stripped = strip_references(full, 2);
    CHECK(stripped.rows() == 8);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 70; ++c) CHECK(stripped(r, c) == full(r + 2, c));
    CHECK(strip_references(full, 1).rows() == 9);
    CHECK_THROWS_AS(strip_references(Mat(1, 70), 2), std::invalid_argument);
}

TEST_CASE("silence produces identical feature rows") {
    const std::vector<double> silence(3 * kAudioSampleRate, 0.0);
    const AudioFeatureSequence seq = mel_features(silence, 8);
    REQUIRE(seq.features.rows() == 8);
    REQUIRE(seq.features.cols() == kMelFeatureDim);
    for (std::size_t r = 1; r < 8; ++r)
        for (std::size_t c = 0; c < kMelFeatureDim; ++c)
            CHECK(seq.features(r, c) == seq.features(0, c));
}

TEST_CASE("440 Hz and 880 Hz tones hit their mel filterbank bins") {
    // Expected bin: the triangle whose peak frequency is nearest the
    // tone, computed from the same mel-scale formula.
    const double mel_hi = hz_to_mel(kAudioSampleRate / 2.0);
    auto expected_bin = [&](double hz) {
        const double target = hz_to_mel(hz);
        int best = 0;
        double best_diff = 1e18;
        for (int m = 0; m < static_cast<int>(kMelBins); ++m) {
            const double peak_mel = mel_hi * static_cast<double>(m + 1) /
                                    static_cast<double>(kMelBins + 1);
            if (std::abs(peak_mel - target) < best_diff) {
                best_diff = std::abs(peak_mel - target);
                best = m;
            }
        }
        return best;
    };

    auto dominant_bin = [](const std::vector<double>& samples) {
        const Mat mel = mel_spectrogram(samples);
        const std::size_t hop = mel.cols() / 2;
        std::size_t best = 0;
        for (std::size_t m = 1; m < kMelBins; ++m)
            if (mel(m, hop) > mel(best, hop)) best = m;
        return static_cast<int>(best);
    };

    const int bin_440 = dominant_bin(tone(440.0, 1.0));
    const int bin_880 = dominant_bin(tone(880.0, 1.0));
    CHECK(std::abs(bin_440 - expected_bin(440.0)) <= 1);
    CHECK(std::abs(bin_880 - expected_bin(880.0)) <= 1);
    CHECK(bin_440 != bin_880);
}

TEST_CASE("64 frames come out of 2.56 seconds of audio") {
    const AudioFeatureSequence seq = mel_features(tone(300.0, 2.56), 64);
    CHECK(seq.features.rows() == 64);
    CHECK(seq.features.cols() == 1600);
}

TEST_CASE("audio shorter than n_frames/25 seconds is rejected with the required duration") {
    const std::vector<double> short_audio(kAudioSampleRate, 0.0); // 1 s
    try {
        mel_features(short_audio, 64); // needs 2.56 s
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2.56") != std::string::npos);
    }
}

TEST_CASE("delaying audio by one video frame shifts feature rows by one") {
    Rng rng(54);
    std::vector<double> audio(2 * kAudioSampleRate);
    for (std::size_t i = 0; i < audio.size(); ++i) {
        const double t = static_cast<double>(i) / kAudioSampleRate;
        audio[i] = 0.3 * std::sin(2 * 3.14159 * 220 * t) + 0.2 * std::sin(2 * 3.14159 * 470 * t) +
                   0.05 * rng.normal();
    }
    std::vector<double> delayed(kAudioSampleRate / 25, 0.0); // 640 samples = 1/25 s
    delayed.insert(delayed.end(), audio.begin(), audio.end());

    const AudioFeatureSequence orig = mel_features(audio, 32);
    const AudioFeatureSequence shifted = mel_features(delayed, 32);
    for (std::size_t k = 4; k < 32; ++k)
        for (std::size_t c = 0; c < kMelFeatureDim; ++c)
            CHECK(std::abs(shifted.features(k, c) - orig.features(k - 1, c)) < 1e-6);
}

TEST_CASE("mel features are deterministic") {
    const std::vector<double> audio = tone(523.0, 2.0);
    const AudioFeatureSequence a = mel_features(audio, 16);
    const AudioFeatureSequence b = mel_features(audio, 16);
    CHECK(a.features == b.features);
}

TEST_CASE("load_features round-trips through the io writer") {
    Rng rng(55);
    AudioFeatureSequence seq;
    seq.features = rng.normal_mat(12, 5);
    const std::string path = temp_path("kdiff_test_features.kft");
    io::write_features(path, seq);
    const AudioFeatureSequence back = load_features(path);
    CHECK(back.features == seq.features);
    std::filesystem::remove(path);
}

TEST_CASE("feature files with short rows are rejected with expected/actual counts") {
    const std::string path = temp_path("kdiff_test_badrow.kft");
    {
        std::ofstream out(path);
        out << "kdiff-features 1\nn 2\ndim 4\nrows\n1 2 3 4\n1 2 3\nend\n";
    }
    try {
        load_features(path);
        FAIL("expected failure");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected 4") != std::string::npos);
        CHECK(msg.find("got 3") != std::string::npos);
        CHECK(msg.find(":6:") != std::string::npos); // offending line
    }
    std::filesystem::remove(path);
}

TEST_CASE("truncated feature files fail without returning a partial sequence") {
    const std::string path = temp_path("kdiff_test_truncated.kft");
    {
        std::ofstream out(path);
        out << "kdiff-features 1\nn 5\ndim 3\nrows\n1 2 3\n4 5 6\n";
    }
    CHECK_THROWS_AS(load_features(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("wav reader handles 16-bit PCM and rejects stereo") {
    const std::string path = temp_path("kdiff_test_tone.wav");
    // Write a minimal 16-bit PCM WAV by hand.
    {
        std::ofstream out(path, std::ios::binary);
        const std::vector<double> samples = tone(440.0, 0.1);
        const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
        auto put16 = [&](std::uint16_t v) { out.put(static_cast<char>(v & 0xff)).put(static_cast<char>(v >> 8)); };
        auto put32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
        };
        out.write("RIFF", 4);
        put32(36 + data_bytes);
        out.write("WAVE", 4);
        out.write("fmt ", 4);
        put32(16);
        put16(1);  // PCM
        put16(1);  // mono
        put32(16000);
        put32(32000);
        put16(2);
        put16(16);
        out.write("data", 4);
        put32(data_bytes);
        for (double s : samples) put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(s * 32767.0)));
    }
    const WavData wav = read_wav_mono(path);
    CHECK(wav.sample_rate == 16000);
    CHECK(wav.samples.size() == 1600);
    // Round-trip amplitude within quantization error.
    double max_abs = 0.0;
    for (double s : wav.samples) max_abs = std::max(max_abs, std::abs(s));
    CHECK(max_abs > 0.45);
    CHECK(max_abs < 0.55);
    std::filesystem::remove(path);
}
