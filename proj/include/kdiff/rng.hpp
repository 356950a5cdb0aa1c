#pragma once

#include <cstdint>
#include <random>

#include "kdiff/mat.hpp"

namespace kdiff {

/// Mixes a base seed with a stream index so derived generators are
/// decorrelated (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seeded random source. Gaussians use Box-Muller on raw mt19937_64
/// output so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Standard normal, no cached spare.
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    Mat normal_mat(std::size_t rows, std::size_t cols, double stddev = 1.0) {
        Mat m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal();
        return m;
    }

    Rng fork(std::uint64_t stream) { return Rng(mix_seed(engine_(), stream)); }

private:
    std::mt19937_64 engine_;
};

} // namespace kdiff
