#pragma once

#include <vector>

#include "kdiff/mat.hpp"

namespace kdiff::kernels {

/// Execution mode for the dense kernels. Every kernel has a serial
/// reference implementation and an OpenMP variant that distributes
/// whole output rows (or columns) across threads. Each output element
/// is always reduced by a single thread in the same order, so both
/// modes produce bit-identical results for any thread count.
enum class Mode { Serial, Parallel };

/// Process-wide default mode: Parallel when compiled with OpenMP.
Mode default_mode();
void set_default_mode(Mode m);

// out = a * b              (m x k)(k x n)
void matmul(const Mat& a, const Mat& b, Mat& out, Mode mode);
// out = a * b^T            (m x k)(n x k)
void matmul_nt(const Mat& a, const Mat& b, Mat& out, Mode mode);
// out += a * b^T
void matmul_nt_acc(const Mat& a, const Mat& b, Mat& out, Mode mode);
// out += a^T * b           (k x m)(k x n)
void matmul_tn_acc(const Mat& a, const Mat& b, Mat& out, Mode mode);

/// Adds a 1xN row vector to every row.
void add_row_vector(Mat& x, const Mat& bias, Mode mode);

/// out += column sums of x (out is 1xN). Parallel over columns.
void col_sum_acc(const Mat& x, Mat& out, Mode mode);

/// In-place row-wise softmax.
void softmax_rows(Mat& x, Mode mode);

/// Row-wise layer normalization with learnable gain/bias (both 1xN).
/// mean/rstd receive per-row statistics for the backward pass.
void layernorm_rows(const Mat& x, const Mat& gain, const Mat& bias, Mat& out,
                    std::vector<double>& mean, std::vector<double>& rstd, Mode mode);
void layernorm_rows_backward(const Mat& x, const Mat& gain,
                             const std::vector<double>& mean, const std::vector<double>& rstd,
                             const Mat& d_out, Mat& d_x, Mat& d_gain, Mat& d_bias, Mode mode);

/// SiLU activation x*sigmoid(x), element-wise; backward wants the
/// forward input.
void silu(const Mat& x, Mat& out, Mode mode);
void silu_backward(const Mat& x, const Mat& d_out, Mat& d_x, Mode mode);

/// Applies rotary position rotations to consecutive column pairs of x,
/// one position per row: pair i of row r is rotated by
/// positions[r] * base^(-2i/cols). cols must be even.
void rope_rows(const Mat& x, const std::vector<double>& positions, Mat& out, Mode mode);
/// Inverse rotation (backward pass / unrotate).
void rope_rows_inverse(const Mat& x, const std::vector<double>& positions, Mat& out, Mode mode);

// Convenience overloads on the default mode.
inline void matmul(const Mat& a, const Mat& b, Mat& out) { matmul(a, b, out, default_mode()); }
inline void matmul_nt(const Mat& a, const Mat& b, Mat& out) { matmul_nt(a, b, out, default_mode()); }
inline void matmul_nt_acc(const Mat& a, const Mat& b, Mat& out) { matmul_nt_acc(a, b, out, default_mode()); }
inline void matmul_tn_acc(const Mat& a, const Mat& b, Mat& out) { matmul_tn_acc(a, b, out, default_mode()); }
inline void add_row_vector(Mat& x, const Mat& bias) { add_row_vector(x, bias, default_mode()); }
inline void col_sum_acc(const Mat& x, Mat& out) { col_sum_acc(x, out, default_mode()); }
inline void softmax_rows(Mat& x) { softmax_rows(x, default_mode()); }
inline void layernorm_rows(const Mat& x, const Mat& gain, const Mat& bias, Mat& out,
                           std::vector<double>& mean, std::vector<double>& rstd) {
    layernorm_rows(x, gain, bias, out, mean, rstd, default_mode());
}
inline void layernorm_rows_backward(const Mat& x, const Mat& gain,
                                    const std::vector<double>& mean, const std::vector<double>& rstd,
                                    const Mat& d_out, Mat& d_x, Mat& d_gain, Mat& d_bias) {
    layernorm_rows_backward(x, gain, mean, rstd, d_out, d_x, d_gain, d_bias, default_mode());
}
inline void silu(const Mat& x, Mat& out) { silu(x, out, default_mode()); }
inline void silu_backward(const Mat& x, const Mat& d_out, Mat& d_x) {
    silu_backward(x, d_out, d_x, default_mode());
}
inline void rope_rows(const Mat& x, const std::vector<double>& positions, Mat& out) {
    rope_rows(x, positions, out, default_mode());
}
inline void rope_rows_inverse(const Mat& x, const std::vector<double>& positions, Mat& out) {
    rope_rows_inverse(x, positions, out, default_mode());
}

} // namespace kdiff::kernels
