#ifndef SRNKIT_MATRIX_HPP
#define SRNKIT_MATRIX_HPP

//
// Dense row-major matrix and the small set of kernels everything else builds on.
//

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "srnkit/errors.hpp"

namespace srnkit {

class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0)
            throw DimensionMismatch("matrix dimensions must be positive");
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0)
            throw DimensionMismatch("matrix dimensions must be positive");
        if (data_.size() != rows * cols)
            throw DimensionMismatch("data length does not match rows*cols");
        for (double x : data_)
            if (!std::isfinite(x))
                throw DimensionMismatch("non-finite entry in matrix data");
    }

    // Row-major nested initializer, mainly for tests.
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw DimensionMismatch("ragged initializer");
            for (double x : r) data_.push_back(x);
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix diag(std::span<const double> d) {
        DenseMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }
    static DenseMatrix diag(std::initializer_list<double> d) {
        return diag(std::span<const double>(d.begin(), d.size()));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double frobenius_norm(const DenseMatrix& w) {
    double s = 0.0;
    for (double x : w.data()) s += x * x;
    return std::sqrt(s);
}

inline double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("frobenius_distance shape mismatch");
    double s = 0.0;
    auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

// C = A * B
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul inner dimension mismatch");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        auto ai = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

// C = A * B^T, both operands traversed along contiguous rows.
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw DimensionMismatch("matmul_nt inner dimension mismatch");
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        auto ci = c.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
    return c;
}

// C = A^T * B
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw DimensionMismatch("matmul_tn inner dimension mismatch");
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto ak = a.row(k);
        auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

inline DenseMatrix scaled(const DenseMatrix& a, double alpha) {
    DenseMatrix c = a;
    for (double& x : c.data()) x *= alpha;
    return c;
}

// A += alpha * B
inline void add_scaled_inplace(DenseMatrix& a, double alpha, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("add_scaled shape mismatch");
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += alpha * db[i];
}

inline DenseMatrix add_scaled(const DenseMatrix& a, double alpha, const DenseMatrix& b) {
    DenseMatrix c = a;
    add_scaled_inplace(c, alpha, b);
    return c;
}

inline DenseMatrix outer(std::span<const double> u, std::span<const double> v) {
    DenseMatrix c(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) c(i, j) = u[i] * v[j];
    return c;
}

inline std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionMismatch("matvec dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline std::vector<double> matvec_t(const DenseMatrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw DimensionMismatch("matvec_t dimension mismatch");
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * xi;
    }
    return y;
}

inline double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Flattens a c_i x c_o x h x w convolution tensor to a (c_i, c_o*h*w) matrix,
// row-major over the trailing three axes.
inline DenseMatrix reshape_conv_weight(const std::vector<double>& tensor, std::size_t ci,
                                       std::size_t co, std::size_t h, std::size_t w) {
    if (tensor.size() != ci * co * h * w)
        throw DimensionMismatch("conv tensor size mismatch");
    return DenseMatrix(ci, co * h * w, tensor);
}

}  // namespace srnkit

#endif
