// Benchmark comparing the serial reference kernels against the OpenMP
// variants, plus a whole-model forward/backward timing at a few
// realistic shapes. Both paths must agree bit-for-bit; the tests
// enforce that, this tool reports the speed difference.

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kdiff/denoiser.hpp"
#include "kdiff/kernels.hpp"
#include "kdiff/rng.hpp"

using namespace kdiff;
namespace kn = kernels;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-34s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads: %d\n\n", omp_get_max_threads());
#else
    std::printf("OpenMP not available; both columns run the serial path.\n\n");
#endif
    std::printf("%-34s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng(42);

    {
        const Mat a = rng.normal_mat(256, 256), b = rng.normal_mat(256, 256);
        Mat out;
        report("matmul 256x256x256",
               time_ms([&] { kn::matmul(a, b, out, kn::Mode::Serial); }, 20),
               time_ms([&] { kn::matmul(a, b, out, kn::Mode::Parallel); }, 20));
    }
    {
        const Mat a = rng.normal_mat(66, 1024), b = rng.normal_mat(1024, 1024);
        Mat out;
        report("matmul 66x1024x1024",
               time_ms([&] { kn::matmul(a, b, out, kn::Mode::Serial); }, 20),
               time_ms([&] { kn::matmul(a, b, out, kn::Mode::Parallel); }, 20));
    }
    {
        const Mat a = rng.normal_mat(512, 384), b = rng.normal_mat(512, 384);
        Mat out;
        report("matmul_nt 512x384 * (512x384)^T",
               time_ms([&] { kn::matmul_nt(a, b, out, kn::Mode::Serial); }, 10),
               time_ms([&] { kn::matmul_nt(a, b, out, kn::Mode::Parallel); }, 10));
    }
    {
        const Mat a = rng.normal_mat(2048, 128), b = rng.normal_mat(2048, 256);
        report("matmul_tn_acc (2048x128)^T * b",
               time_ms(
                   [&] {
                       Mat out(128, 256);
                       kn::matmul_tn_acc(a, b, out, kn::Mode::Serial);
                   },
                   10),
               time_ms(
                   [&] {
                       Mat out(128, 256);
                       kn::matmul_tn_acc(a, b, out, kn::Mode::Parallel);
                   },
                   10));
    }
    {
        const Mat x = rng.normal_mat(1024, 512);
        report("softmax_rows 1024x512",
               time_ms(
                   [&] {
                       Mat y = x;
                       kn::softmax_rows(y, kn::Mode::Serial);
                   },
                   20),
               time_ms(
                   [&] {
                       Mat y = x;
                       kn::softmax_rows(y, kn::Mode::Parallel);
                   },
                   20));
    }
    {
        const Mat x = rng.normal_mat(1024, 256);
        const Mat gain = rng.normal_mat(1, 256), bias = rng.normal_mat(1, 256);
        Mat out;
        std::vector<double> mean, rstd;
        report("layernorm_rows 1024x256",
               time_ms([&] { kn::layernorm_rows(x, gain, bias, out, mean, rstd, kn::Mode::Serial); },
                       20),
               time_ms(
                   [&] { kn::layernorm_rows(x, gain, bias, out, mean, rstd, kn::Mode::Parallel); },
                   20));
    }
    {
        const Mat x = rng.normal_mat(1024, 128);
        std::vector<double> pos(1024);
        for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(i);
        Mat out;
        report("rope_rows 1024x128",
               time_ms([&] { kn::rope_rows(x, pos, out, kn::Mode::Serial); }, 20),
               time_ms([&] { kn::rope_rows(x, pos, out, kn::Mode::Parallel); }, 20));
    }

    // Whole-model denoise at the full-scale window (n = 64).
    {
        DenoiserConfig cfg;
        cfg.model_dim = 256;
        cfg.n_blocks = 4;
        cfg.n_heads = 4;
        cfg.audio_dim = 16;
        DenoiserModel model(cfg);
        model.init_params(1, false);
        const Mat input = rng.normal_mat(66, 70);
        const Mat audio = rng.normal_mat(64, cfg.audio_dim);

        const auto run = [&] { (void)model.denoise(input, audio, 500, 2); };
        kn::set_default_mode(kn::Mode::Serial);
        const double serial = time_ms(run, 5);
        kn::set_default_mode(kn::Mode::Parallel);
        const double parallel = time_ms(run, 5);
        report("denoise fwd n=64 dim=256 blocks=4", serial, parallel);
    }
    {
        DenoiserConfig cfg;
        cfg.model_dim = 64;
        cfg.n_blocks = 2;
        cfg.n_heads = 2;
        cfg.audio_dim = 16;
        DenoiserModel model(cfg);
        model.init_params(1, false);
        const Mat input = rng.normal_mat(18, 70);
        const Mat audio = rng.normal_mat(16, cfg.audio_dim);
        Mat d_out = rng.normal_mat(18, 70);

        const auto run = [&] {
            ForwardCache cache;
            (void)model.forward(input, audio, 500, 2, cache);
            model.zero_grads();
            model.backward(cache, d_out);
        };
        kn::set_default_mode(kn::Mode::Serial);
        const double serial = time_ms(run, 10);
        kn::set_default_mode(kn::Mode::Parallel);
        const double parallel = time_ms(run, 10);
        report("fwd+bwd n=16 dim=64 blocks=2", serial, parallel);
    }

    kn::set_default_mode(kn::Mode::Parallel);
    return 0;
}
