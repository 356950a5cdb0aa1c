#include "kdiff/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kdiff::kernels {

namespace {

std::atomic<Mode> g_mode{
#ifdef _OPENMP
    Mode::Parallel
#else
    Mode::Serial
#endif
};

void check_shape(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("kernels: shape mismatch in ") + what);
}

constexpr double kRopeBase = 10000.0;
constexpr double kLnEps = 1e-5;

// Below this many inner operations the OpenMP region costs more than
// it saves; stay serial. Dispatch only — results are identical either
// way.
constexpr std::size_t kParallelMinWork = 1 << 17;

bool go_parallel(Mode mode, std::size_t work) {
    return mode == Mode::Parallel && work >= kParallelMinWork;
}

/// Dot product with four independent accumulators; fixed summation
/// order, so results do not depend on the execution mode.
double dot4(const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        acc0 += a[p] * b[p];
        acc1 += a[p + 1] * b[p + 1];
        acc2 += a[p + 2] * b[p + 2];
        acc3 += a[p + 3] * b[p + 3];
    }
    double tail = 0.0;
    for (; p < n; ++p) tail += a[p] * b[p];
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

} // namespace

Mode default_mode() { return g_mode.load(std::memory_order_relaxed); }
void set_default_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

// The OpenMP loops below intentionally parallelize only the outer
// (output-row / output-column) dimension; every reduction stays inside
// one thread so Serial and Parallel agree bit-for-bit.

void matmul(const Mat& a, const Mat& b, Mat& out, Mode mode) {
    check_shape(a.cols() == b.rows(), "matmul");
    out = Mat(a.rows(), b.cols());
    const std::int64_t m = static_cast<std::int64_t>(a.rows());
    const std::size_t k = a.cols(), n = b.cols();
    const bool par = go_parallel(mode, a.rows() * k * n);
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const double* ar = a.row(static_cast<std::size_t>(r));
        double* or_ = out.row(static_cast<std::size_t>(r));
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ar[p];
            const double* br = b.row(p);
            for (std::size_t c = 0; c < n; ++c) or_[c] += av * br[c];
        }
    }
}

void matmul_nt(const Mat& a, const Mat& b, Mat& out, Mode mode) {
    out = Mat(a.rows(), b.rows());
    matmul_nt_acc(a, b, out, mode);
}

void matmul_nt_acc(const Mat& a, const Mat& b, Mat& out, Mode mode) {
    check_shape(a.cols() == b.cols(), "matmul_nt");
    check_shape(out.rows() == a.rows() && out.cols() == b.rows(), "matmul_nt out");
    const std::int64_t m = static_cast<std::int64_t>(a.rows());
    const std::size_t k = a.cols(), n = b.rows();
    const bool par = go_parallel(mode, a.rows() * k * n);
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const double* ar = a.row(static_cast<std::size_t>(r));
        double* or_ = out.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < n; ++c) or_[c] += dot4(ar, b.row(c), k);
    }
}

void matmul_tn_acc(const Mat& a, const Mat& b, Mat& out, Mode mode) {
    check_shape(a.rows() == b.rows(), "matmul_tn");
    check_shape(out.rows() == a.cols() && out.cols() == b.cols(), "matmul_tn out");
    const std::int64_t m = static_cast<std::int64_t>(a.cols());
    const std::size_t k = a.rows(), n = b.cols();
    const bool par = go_parallel(mode, a.cols() * k * n);
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        double* or_ = out.row(static_cast<std::size_t>(r));
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(p, static_cast<std::size_t>(r));
            const double* br = b.row(p);
            for (std::size_t c = 0; c < n; ++c) or_[c] += av * br[c];
        }
    }
}

void add_row_vector(Mat& x, const Mat& bias, Mode mode) {
    check_shape(bias.rows() == 1 && bias.cols() == x.cols(), "add_row_vector");
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t n = x.cols();
    const bool par = go_parallel(mode, x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        double* xr = x.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < n; ++c) xr[c] += bias(0, c);
    }
}

void col_sum_acc(const Mat& x, Mat& out, Mode mode) {
    check_shape(out.rows() == 1 && out.cols() == x.cols(), "col_sum_acc");
    const std::int64_t n = static_cast<std::int64_t>(x.cols());
    const std::size_t m = x.rows();
    const bool par = go_parallel(mode, x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < m; ++r) acc += x(r, static_cast<std::size_t>(c));
        out(0, static_cast<std::size_t>(c)) += acc;
    }
}

void softmax_rows(Mat& x, Mode mode) {
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t n = x.cols();
    const bool par = go_parallel(mode, 16 * x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        double* xr = x.row(static_cast<std::size_t>(r));
        double mx = xr[0];
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, xr[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            xr[c] = std::exp(xr[c] - mx);
            sum += xr[c];
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < n; ++c) xr[c] *= inv;
    }
}

void layernorm_rows(const Mat& x, const Mat& gain, const Mat& bias, Mat& out,
                    std::vector<double>& mean, std::vector<double>& rstd, Mode mode) {
    check_shape(gain.rows() == 1 && gain.cols() == x.cols(), "layernorm gain");
    check_shape(bias.rows() == 1 && bias.cols() == x.cols(), "layernorm bias");
    out = Mat(x.rows(), x.cols());
    mean.assign(x.rows(), 0.0);
    rstd.assign(x.rows(), 0.0);
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t n = x.cols();
    const bool par = go_parallel(mode, 4 * x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const double* xr = x.row(static_cast<std::size_t>(r));
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += xr[c];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double d = xr[c] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double rs = 1.0 / std::sqrt(var + kLnEps);
        mean[static_cast<std::size_t>(r)] = mu;
        rstd[static_cast<std::size_t>(r)] = rs;
        double* or_ = out.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < n; ++c)
            or_[c] = (xr[c] - mu) * rs * gain(0, c) + bias(0, c);
    }
}

void layernorm_rows_backward(const Mat& x, const Mat& gain,
                             const std::vector<double>& mean, const std::vector<double>& rstd,
                             const Mat& d_out, Mat& d_x, Mat& d_gain, Mat& d_bias, Mode mode) {
    check_shape(x.same_shape(d_out), "layernorm_backward");
    d_x = Mat(x.rows(), x.cols());
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t n = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const bool par = go_parallel(mode, 8 * x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const std::size_t rr = static_cast<std::size_t>(r);
        const double* xr = x.row(rr);
        const double* dor = d_out.row(rr);
        double* dxr = d_x.row(rr);
        const double mu = mean[rr], rs = rstd[rr];
        double sum_dg = 0.0, sum_dgx = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double xhat = (xr[c] - mu) * rs;
            const double dg = dor[c] * gain(0, c);
            sum_dg += dg;
            sum_dgx += dg * xhat;
        }
        for (std::size_t c = 0; c < n; ++c) {
            const double xhat = (xr[c] - mu) * rs;
            const double dg = dor[c] * gain(0, c);
            dxr[c] = rs * (dg - inv_n * sum_dg - xhat * inv_n * sum_dgx);
        }
    }
    // Parameter gradients reduce over rows; keep the column loop outer
    // so each accumulator stays with one thread.
    const std::int64_t nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t c = 0; c < nn; ++c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        double dg = 0.0, db = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double xhat = (x(r, cc) - mean[r]) * rstd[r];
            dg += d_out(r, cc) * xhat;
            db += d_out(r, cc);
        }
        d_gain(0, cc) += dg;
        d_bias(0, cc) += db;
    }
}

void silu(const Mat& x, Mat& out, Mode mode) {
    out = Mat(x.rows(), x.cols());
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t n = x.cols();
    const bool par = go_parallel(mode, 16 * x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const double* xr = x.row(static_cast<std::size_t>(r));
        double* or_ = out.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < n; ++c) {
            const double s = 1.0 / (1.0 + std::exp(-xr[c]));
            or_[c] = xr[c] * s;
        }
    }
}

void silu_backward(const Mat& x, const Mat& d_out, Mat& d_x, Mode mode) {
    check_shape(x.same_shape(d_out), "silu_backward");
    d_x = Mat(x.rows(), x.cols());
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t n = x.cols();
    const bool par = go_parallel(mode, 16 * x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const double* xr = x.row(static_cast<std::size_t>(r));
        const double* dor = d_out.row(static_cast<std::size_t>(r));
        double* dxr = d_x.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < n; ++c) {
            const double s = 1.0 / (1.0 + std::exp(-xr[c]));
            dxr[c] = dor[c] * (s + xr[c] * s * (1.0 - s));
        }
    }
}

namespace {

void rope_apply(const Mat& x, const std::vector<double>& positions, Mat& out, double sign,
                Mode mode) {
    if (x.cols() % 2 != 0)
        throw std::invalid_argument("rope: column count must be even");
    if (positions.size() != x.rows())
        throw std::invalid_argument("rope: one position per row required");
    out = Mat(x.rows(), x.cols());
    const std::int64_t m = static_cast<std::int64_t>(x.rows());
    const std::size_t pairs = x.cols() / 2;
    const bool par = go_parallel(mode, 32 * x.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < m; ++r) {
        const std::size_t rr = static_cast<std::size_t>(r);
        const double* xr = x.row(rr);
        double* or_ = out.row(rr);
        for (std::size_t i = 0; i < pairs; ++i) {
            const double freq = std::pow(kRopeBase, -2.0 * static_cast<double>(i) /
                                                        static_cast<double>(x.cols()));
            const double theta = sign * positions[rr] * freq;
            const double c = std::cos(theta), s = std::sin(theta);
            const double a = xr[2 * i], b = xr[2 * i + 1];
            or_[2 * i] = a * c - b * s;
            or_[2 * i + 1] = a * s + b * c;
        }
    }
}

} // namespace

void rope_rows(const Mat& x, const std::vector<double>& positions, Mat& out, Mode mode) {
    rope_apply(x, positions, out, 1.0, mode);
}

void rope_rows_inverse(const Mat& x, const std::vector<double>& positions, Mat& out, Mode mode) {
    rope_apply(x, positions, out, -1.0, mode);
}

} // namespace kdiff::kernels
