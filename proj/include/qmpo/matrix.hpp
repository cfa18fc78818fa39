#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qmpo {

/// Dense row-major matrix of doubles. The only matrix type in the library;
/// everything small enough to be dense goes through it.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), d_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals)
        : rows_(rows), cols_(cols), d_(vals) {
        if (d_.size() != rows * cols)
            throw std::invalid_argument("Matrix: initializer size mismatch");
    }

    static Matrix identity(std::size_t n) {
        Matrix I(n, n);
        for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
        return I;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return d_.size(); }
    bool empty() const { return d_.empty(); }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return d_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return d_[i * cols_ + j];
    }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    double* row_ptr(std::size_t i) { return d_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return d_.data() + i * cols_; }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < d_.size(); ++i) d_[i] += o.d_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < d_.size(); ++i) d_[i] -= o.d_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : d_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

private:
    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw std::invalid_argument("Matrix: shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> d_;
};

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// C = A^T * B, streaming over the shared row index.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: row count mismatch");
    Matrix c(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* ar = a.row_ptr(r);
        const double* br = b.row_ptr(r);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = ar[i];
            if (ari == 0.0) continue;
            double* ci = c.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
        }
    }
    return c;
}

/// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: column count mismatch");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

/// C -= A * B, in place on c.
inline void matmul_sub(Matrix& c, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
        throw std::invalid_argument("matmul_sub: shape mismatch");
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j < n; ++j) ci[j] -= aik * bk[j];
        }
    }
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * ai[j];
    }
    return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j)));
    return m;
}

inline double trace(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
    return s;
}

/// Frobenius inner product <A, B>.
inline double inner(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("inner: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        const double* bi = b.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * bi[j];
    }
    return s;
}

/// (X + X^T)/2 with exactly mirrored entries.
inline Matrix symmetrize(const Matrix& x) {
    if (x.rows() != x.cols()) throw std::invalid_argument("symmetrize: square input required");
    Matrix s(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        s(i, i) = x(i, i);
        for (std::size_t j = i + 1; j < x.cols(); ++j) {
            const double v = 0.5 * (x(i, j) + x(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

inline double asymmetry(const Matrix& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = i + 1; j < x.cols(); ++j) {
            const double d = x(i, j) - x(j, i);
            s += 2.0 * d * d;
        }
    return std::sqrt(s);
}

/// ||A^T A - I||_F, the usual orthonormality drift measure.
inline double orthonormality_error(const Matrix& a) {
    Matrix g = matmul_tn(a, a);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return frobenius_norm(g);
}

inline Matrix hstack(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("hstack: row count mismatch");
    Matrix c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
    }
    return c;
}

inline Matrix rows_slice(const Matrix& a, std::size_t row0, std::size_t nrows) {
    if (row0 + nrows > a.rows()) throw std::invalid_argument("rows_slice: out of range");
    Matrix c(nrows, a.cols());
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(row0 + i, j);
    return c;
}

inline Matrix cols_slice(const Matrix& a, std::size_t col0, std::size_t ncols) {
    if (col0 + ncols > a.cols()) throw std::invalid_argument("cols_slice: out of range");
    Matrix c(a.rows(), ncols);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < ncols; ++j) c(i, j) = a(i, col0 + j);
    return c;
}

/// Column-stacked vec(A), the convention all Kronecker identities here use.
inline std::vector<double> vec_colmajor(const Matrix& a) {
    std::vector<double> v(a.rows() * a.cols());
    std::size_t p = 0;
    for (std::size_t j = 0; j < a.cols(); ++j)
        for (std::size_t i = 0; i < a.rows(); ++i) v[p++] = a(i, j);
    return v;
}

}  // namespace qmpo
