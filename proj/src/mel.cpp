#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "kdiff/conditioning.hpp"

namespace kdiff {

namespace {

constexpr std::size_t kFftSize = 512;
constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-10;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

/// In-place iterative radix-2 FFT (size must be a power of two).
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

/// Triangular mel filterbank, kMelBins x (kFftSize/2 + 1).
const Mat& mel_filterbank() {
    static const Mat bank = [] {
        const std::size_t n_bins = kFftSize / 2 + 1;
        Mat bank(kMelBins, n_bins);
        const double mel_lo = hz_to_mel(0.0);
        const double mel_hi = hz_to_mel(kAudioSampleRate / 2.0);
        std::vector<double> hz(kMelBins + 2);
        for (std::size_t i = 0; i < hz.size(); ++i)
            hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                           static_cast<double>(kMelBins + 1));
        for (std::size_t m = 0; m < kMelBins; ++m) {
            const double f0 = hz[m], f1 = hz[m + 1], f2 = hz[m + 2];
            for (std::size_t k = 0; k < n_bins; ++k) {
                const double f = static_cast<double>(k) * kAudioSampleRate /
                                 static_cast<double>(kFftSize);
                double w = 0.0;
                if (f > f0 && f < f1)
                    w = (f - f0) / (f1 - f0);
                else if (f >= f1 && f < f2)
                    w = (f2 - f) / (f2 - f1);
                bank(m, k) = w;
            }
        }
        return bank;
    }();
    return bank;
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

} // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

WavData read_wav_mono(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("wav: cannot open " + path);

    char tag[5] = {0};
    in.read(tag, 4);
    require(std::strncmp(tag, "RIFF", 4) == 0, "wav: missing RIFF header in " + path);
    read_u32(in); // riff size
    in.read(tag, 4);
    require(std::strncmp(tag, "WAVE", 4) == 0, "wav: not a WAVE file: " + path);

    WavData wav;
    std::uint16_t format = 0, channels = 0, bits = 0;
    bool have_fmt = false;
    while (in.read(tag, 4)) {
        const std::uint32_t chunk_size = read_u32(in);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            wav.sample_rate = static_cast<int>(read_u32(in));
            read_u32(in); // byte rate
            read_u16(in); // block align
            bits = read_u16(in);
            if (chunk_size > 16) in.ignore(chunk_size - 16);
            have_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            require(have_fmt, "wav: data chunk before fmt in " + path);
            require(channels == 1, "wav: expected mono audio, got " +
                                       std::to_string(channels) + " channels in " + path);
            if (format == 1 && bits == 16) {
                const std::size_t n = chunk_size / 2;
                wav.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint16_t raw = read_u16(in);
                    wav.samples[i] = static_cast<double>(static_cast<std::int16_t>(raw)) / 32768.0;
                }
            } else if (format == 3 && bits == 32) {
                const std::size_t n = chunk_size / 4;
                wav.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint32_t raw = read_u32(in);
                    float f;
                    std::memcpy(&f, &raw, 4);
                    wav.samples[i] = static_cast<double>(f);
                }
            } else {
                throw std::runtime_error("wav: unsupported format (want 16-bit PCM or "
                                         "32-bit float): " + path);
            }
            return wav;
        } else {
            in.ignore(chunk_size + (chunk_size & 1));
        }
    }
    throw std::runtime_error("wav: no data chunk in " + path);
}

Mat mel_spectrogram(const std::vector<double>& samples) {
    if (samples.size() < kMelWindowSamples) return Mat(kMelBins, 0);
    const std::size_t n_hops = 1 + (samples.size() - kMelWindowSamples) / kMelHopSamples;

    std::vector<double> window(kMelWindowSamples);
    for (std::size_t i = 0; i < kMelWindowSamples; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                         static_cast<double>(kMelWindowSamples - 1));

    const Mat& bank = mel_filterbank();
    const std::size_t n_bins = kFftSize / 2 + 1;
    Mat out(kMelBins, n_hops);
    std::vector<std::complex<double>> buf(kFftSize);
    std::vector<double> power(n_bins);
    for (std::size_t h = 0; h < n_hops; ++h) {
        const std::size_t start = h * kMelHopSamples;
        for (std::size_t i = 0; i < kFftSize; ++i) {
            const double v =
                i < kMelWindowSamples ? samples[start + i] * window[i] : 0.0;
            buf[i] = {v, 0.0};
        }
        fft(buf);
        for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t m = 0; m < kMelBins; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n_bins; ++k) acc += bank(m, k) * power[k];
            out(m, h) = std::log(acc + kLogFloor);
        }
    }
    return out;
}

AudioFeatureSequence mel_features(const std::vector<double>& samples, std::size_t n_frames) {
    require(n_frames >= 1, "mel_features: need at least one frame");
    const std::size_t needed =
        n_frames * static_cast<std::size_t>(kAudioSampleRate / kVideoFps);
    if (samples.size() < needed) {
        const double got = static_cast<double>(samples.size()) / kAudioSampleRate;
        const double want = static_cast<double>(n_frames) / kVideoFps;
        throw std::invalid_argument("mel_features: audio too short: need at least " +
                                    std::to_string(want) + " s (" + std::to_string(needed) +
                                    " samples), got " + std::to_string(got) + " s");
    }

    const Mat mel = mel_spectrogram(samples);
    const std::int64_t n_hops = static_cast<std::int64_t>(mel.cols());
    const std::int64_t half = static_cast<std::int64_t>(kMelContextHops) / 2;
    // 1/25 s is exactly 4 hops of 10 ms.
    const std::int64_t hops_per_frame = 4;

    AudioFeatureSequence seq;
    seq.features = Mat(n_frames, kMelFeatureDim);
    for (std::size_t k = 0; k < n_frames; ++k) {
        const std::int64_t center = static_cast<std::int64_t>(k) * hops_per_frame;
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(kMelContextHops); ++j) {
            std::int64_t hop = center - half + j;
            if (hop < 0) hop = 0;
            if (hop > n_hops - 1) hop = n_hops - 1;
            for (std::size_t m = 0; m < kMelBins; ++m)
                seq.features(k, static_cast<std::size_t>(j) * kMelBins + m) =
                    mel(m, static_cast<std::size_t>(hop));
        }
    }
    return seq;
}

} // namespace kdiff
