#pragma once

#include <algorithm>
#include <cmath>

#include "qmpo/matrix.hpp"

namespace qmpo {

struct QrResult {
    Matrix q;          ///< n x p, orthonormal columns
    Matrix r;          ///< p x p, upper triangular, nonnegative diagonal
    std::size_t rank;  ///< #{i : r(i,i) > rank_tol * r(0,0)}
};

inline constexpr double kQrRankTol = 1e-12;

/// Economized Householder QR of an n x p matrix, n >= p. The R diagonal is
/// made nonnegative by column sign flips, which pins the factors down
/// deterministically. Rank deficiency is reported, never thrown.
inline QrResult thin_qr(const Matrix& a) {
    const std::size_t n = a.rows();
    const std::size_t p = a.cols();
    if (n < p) throw std::invalid_argument("thin_qr: more columns than rows");

    Matrix work = a;                      // gets triangularized in place
    std::vector<std::vector<double>> vs;  // Householder vectors
    vs.reserve(p);

    for (std::size_t j = 0; j < p; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < n; ++i) norm += work(i, j) * work(i, j);
        norm = std::sqrt(norm);

        std::vector<double> v(n - j, 0.0);
        if (norm > 0.0) {
            const double alpha = work(j, j) >= 0.0 ? -norm : norm;
            v[0] = work(j, j) - alpha;
            for (std::size_t i = j + 1; i < n; ++i) v[i - j] = work(i, j);
            double vnorm = 0.0;
            for (double x : v) vnorm += x * x;
            vnorm = std::sqrt(vnorm);
            if (vnorm > 0.0) {
                for (double& x : v) x /= vnorm;
                // apply I - 2vv^T to the remaining columns
                for (std::size_t c = j; c < p; ++c) {
                    double dot = 0.0;
                    for (std::size_t i = j; i < n; ++i) dot += v[i - j] * work(i, c);
                    dot *= 2.0;
                    for (std::size_t i = j; i < n; ++i) work(i, c) -= dot * v[i - j];
                }
            }
        }
        vs.push_back(std::move(v));
    }

    QrResult out;
    out.r = Matrix(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) out.r(i, j) = work(i, j);

    // accumulate Q = H_0 ... H_{p-1} applied to the leading p columns of I
    out.q = Matrix(n, p);
    for (std::size_t j = 0; j < p; ++j) out.q(j, j) = 1.0;
    for (std::size_t j = p; j-- > 0;) {
        const std::vector<double>& v = vs[j];
        double vnorm = 0.0;
        for (double x : v) vnorm += x * x;
        if (vnorm == 0.0) continue;
        for (std::size_t c = 0; c < p; ++c) {
            double dot = 0.0;
            for (std::size_t i = j; i < n; ++i) dot += v[i - j] * out.q(i, c);
            dot *= 2.0;
            for (std::size_t i = j; i < n; ++i) out.q(i, c) -= dot * v[i - j];
        }
    }

    // sign convention: nonnegative R diagonal
    for (std::size_t i = 0; i < p; ++i) {
        if (out.r(i, i) < 0.0) {
            for (std::size_t j = i; j < p; ++j) out.r(i, j) = -out.r(i, j);
            for (std::size_t k = 0; k < n; ++k) out.q(k, i) = -out.q(k, i);
        }
    }

    out.rank = 0;
    const double pivot0 = out.r.rows() ? out.r(0, 0) : 0.0;
    for (std::size_t i = 0; i < p; ++i)
        if (out.r(i, i) > kQrRankTol * pivot0 && out.r(i, i) > 0.0) ++out.rank;

    return out;
}

}  // namespace qmpo
