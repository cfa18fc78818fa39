#pragma once

#include <cstdint>
#include <random>

#include "qmpo/matrix.hpp"
#include "qmpo/qr.hpp"

namespace qmpo {

using Rng = std::mt19937_64;

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> g;
    Matrix a(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) a(i, j) = g(rng);
    return a;
}

inline Matrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
    return thin_qr(gaussian_matrix(rows, cols, rng)).q;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
    return symmetrize(gaussian_matrix(n, n, rng));
}

}  // namespace qmpo
