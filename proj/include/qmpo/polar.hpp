#pragma once

#include <cmath>

#include "qmpo/eig.hpp"
#include "qmpo/errors.hpp"
#include "qmpo/matrix.hpp"

namespace qmpo {

struct PolarResult {
    Matrix q;  ///< p x s, orthonormal columns
    Matrix s;  ///< s x s, symmetric positive definite, equals (Y^T Y)^{1/2}
};

inline constexpr double kPolarRankTol = 1e-12;

/// Polar decomposition Y = QS of a full-column-rank matrix, computed from
/// the eigendecomposition of Y^T Y (the column count is always small here).
inline PolarResult polar(const Matrix& y) {
    if (y.rows() < y.cols()) throw std::invalid_argument("polar: more columns than rows");
    const std::size_t p = y.cols();

    const Spectrum es = sym_eig(matmul_tn(y, y));
    const double sigma_max = es.values.empty() ? 0.0 : std::sqrt(std::max(0.0, es.max()));
    std::vector<double> sigma(p);
    for (std::size_t i = 0; i < p; ++i) {
        sigma[i] = std::sqrt(std::max(0.0, es.values[i]));
        if (sigma[i] <= kPolarRankTol * sigma_max || sigma[i] == 0.0)
            throw SingularMatrixError("polar: input is numerically rank deficient");
    }

    // S = W diag(sigma) W^T, S^{-1} = W diag(1/sigma) W^T
    const Matrix& w = es.vectors;
    Matrix s(p, p), sinv(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i; j < p; ++j) {
            double sv = 0.0, iv = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                sv += w(i, k) * sigma[k] * w(j, k);
                iv += w(i, k) / sigma[k] * w(j, k);
            }
            s(i, j) = sv;
            s(j, i) = sv;
            sinv(i, j) = iv;
            sinv(j, i) = iv;
        }
    }

    return {matmul(y, sinv), std::move(s)};
}

}  // namespace qmpo
