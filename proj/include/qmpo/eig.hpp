#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "qmpo/errors.hpp"
#include "qmpo/matrix.hpp"

namespace qmpo {

/// Full eigendecomposition of a symmetric matrix, eigenvalues descending.
struct Spectrum {
    std::vector<double> values;  ///< mu_1 >= ... >= mu_n
    Matrix vectors;              ///< orthonormal columns, vectors.col(i) pairs with values[i]

    std::size_t size() const { return values.size(); }
    double max() const { return values.front(); }
    double min() const { return values.back(); }
};

namespace detail {

/// Householder reduction of a symmetric matrix to tridiagonal form with
/// accumulation of the transform (EISPACK tred2 lineage).
inline void tridiagonalize(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
    const int n = static_cast<int>(v.rows());
    for (int j = 0; j < n; ++j) d[j] = v(n - 1, j);

    for (int i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (int j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (int k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0.0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (int j = 0; j < i; ++j) e[j] = 0.0;

            for (int j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (int k = j + 1; k <= i - 1; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (int j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (int j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (int k = j; k <= i - 1; ++k) v(k, j) -= f * e[k] + g * d[k];
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    for (int i = 0; i < n - 1; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (int k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (int j = 0; j <= i; ++j) {
                double g = 0.0;
                for (int k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (int k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (int k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (int j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal (d, e), rotations
/// accumulated into v (EISPACK tql2 lineage).
inline void ql_iterate(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
    const int n = static_cast<int>(v.rows());
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    double f = 0.0;
    double tst1 = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();

    for (int l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        int m = l;
        while (m < n && std::abs(e[m]) > eps * tst1) ++m;

        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 64)
                    throw std::runtime_error("sym_eig: QL iteration failed to converge");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (int i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0;
                double c2 = c;
                double c3 = c;
                const double el1 = e[l + 1];
                double s = 0.0;
                double s2 = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for (int k = 0; k < n; ++k) {
                        h = v(k, i + 1);
                        v(k, i + 1) = s * v(k, i) + c * h;
                        v(k, i) = c * v(k, i) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace detail

inline constexpr double kSymTol = 1e-10;

/// Eigendecomposition of a symmetric dense matrix. Rejects inputs whose
/// asymmetry exceeds 1e-10 relative; the symmetrized matrix is what gets
/// decomposed. Pairs are returned in descending eigenvalue order.
inline Spectrum sym_eig(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: square input required");
    const std::size_t n = a.rows();
    if (asymmetry(a) > kSymTol * frobenius_norm(a))
        throw std::invalid_argument("sym_eig: input is not symmetric");
    if (n == 0) return {};

    Matrix v = symmetrize(a);
    std::vector<double> d(n, 0.0), e(n, 0.0);
    detail::tridiagonalize(v, d, e);
    detail::ql_iterate(v, d, e);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return d[i] > d[j]; });

    Spectrum s;
    s.values.resize(n);
    s.vectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        s.values[c] = d[order[c]];
        for (std::size_t r = 0; r < n; ++r) s.vectors(r, c) = v(r, order[c]);
    }
    return s;
}

/// Largest |eigenvalue| of a symmetric matrix, i.e. its 2-norm.
inline double sym_norm2(const Matrix& a) {
    const Spectrum s = sym_eig(a);
    if (s.values.empty()) return 0.0;
    return std::max(std::abs(s.max()), std::abs(s.min()));
}

}  // namespace qmpo
