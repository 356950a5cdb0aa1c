#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdiff {

/// Dense row-major matrix of doubles. The one value type every module
/// shares; vectors are represented as 1xN (or Nx1) matrices where that
/// reads better.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat from_rows(std::size_t rows, std::size_t cols, std::vector<double> values) {
        if (values.size() != rows * cols)
            throw std::invalid_argument("Mat::from_rows: " + std::to_string(values.size()) +
                                        " values for " + std::to_string(rows) + "x" +
                                        std::to_string(cols));
        Mat m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(values);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool operator==(const Mat& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    /// Copy of rows [r0, r1).
    Mat slice_rows(std::size_t r0, std::size_t r1) const {
        if (r0 > r1 || r1 > rows_)
            throw std::invalid_argument("Mat::slice_rows: bad range");
        Mat out(r1 - r0, cols_);
        for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(r - r0, c) = (*this)(r, c);
        return out;
    }

    /// Copy of columns [c0, c1).
    Mat slice_cols(std::size_t c0, std::size_t c1) const {
        if (c0 > c1 || c1 > cols_)
            throw std::invalid_argument("Mat::slice_cols: bad range");
        Mat out(rows_, c1 - c0);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = c0; c < c1; ++c) out(r, c - c0) = (*this)(r, c);
        return out;
    }

    void set_cols(std::size_t c0, const Mat& block) {
        for (std::size_t r = 0; r < block.rows(); ++r)
            for (std::size_t c = 0; c < block.cols(); ++c) (*this)(r, c0 + c) = block(r, c);
    }

    void set_rows(std::size_t r0, const Mat& block) {
        for (std::size_t r = 0; r < block.rows(); ++r)
            for (std::size_t c = 0; c < block.cols(); ++c) (*this)(r0 + r, c) = block(r, c);
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace kdiff
