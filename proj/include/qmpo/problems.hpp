#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qmpo/driver.hpp"
#include "qmpo/eig.hpp"
#include "qmpo/errors.hpp"
#include "qmpo/matrix.hpp"
#include "qmpo/operator.hpp"
#include "qmpo/random.hpp"

namespace qmpo {

/// Feature matrix (features x samples) with 1-based integer labels.
struct LabeledDataset {
    Matrix x;                ///< n features x m samples
    std::vector<int> labels; ///< in 1..num_classes, one per sample
    int num_classes = 0;

    void validate() const {
        if (labels.size() != x.cols())
            throw std::invalid_argument("LabeledDataset: one label per sample required");
        if (static_cast<std::size_t>(num_classes) > x.cols())
            throw std::invalid_argument("LabeledDataset: more classes than samples");
        for (int lab : labels)
            if (lab < 1 || lab > num_classes)
                throw std::invalid_argument("LabeledDataset: label out of range");
    }
};

struct GraphConfig {
    double t = 0.1;      ///< heat kernel width
    double gamma = 0.1;  ///< trade-off weight on the linear term

    void validate() const {
        if (t <= 0.0 || gamma <= 0.0)
            throw std::invalid_argument("GraphConfig: t and gamma must be positive");
    }
};

/// Synthetic instance in the sprand style: H = B + B^T with B sparse uniform
/// on (0,1) at the given density, G standard normal. Deterministic per seed.
inline QmpoProblem gen_synthetic(std::size_t n, std::size_t l, double density,
                                 std::uint64_t seed) {
    if (density < 0.0 || density > 1.0)
        throw std::invalid_argument("gen_synthetic: density must be in [0, 1]");
    if (n <= l || l < 1) throw std::invalid_argument("gen_synthetic: need n > l >= 1");

    Rng rng(seed);
    const std::size_t target = static_cast<std::size_t>(density * double(n) * double(n));

    // B's nonzero pattern: uniformly random positions without duplicates
    std::unordered_map<std::uint64_t, double> b;
    b.reserve(target + target / 4);
    std::uniform_int_distribution<std::uint64_t> pick(0, static_cast<std::uint64_t>(n) - 1);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    while (b.size() < target) {
        const std::uint64_t code = pick(rng) * n + pick(rng);
        const double v = val(rng);
        b.emplace(code, v);
    }

    // H = B + B^T merged into symmetric triplets, sorted for a canonical CSR
    std::unordered_map<std::uint64_t, double> hmap;
    hmap.reserve(2 * b.size());
    for (const auto& [code, v] : b) {
        const std::uint64_t i = code / n, j = code % n;
        hmap[i * n + j] += v;
        hmap[j * n + i] += v;
    }
    std::vector<std::pair<std::uint64_t, double>> entries(hmap.begin(), hmap.end());
    std::sort(entries.begin(), entries.end());
    std::vector<std::size_t> ti, tj;
    std::vector<double> tv;
    ti.reserve(entries.size());
    tj.reserve(entries.size());
    tv.reserve(entries.size());
    for (const auto& [code, v] : entries) {
        ti.push_back(static_cast<std::size_t>(code / n));
        tj.push_back(static_cast<std::size_t>(code % n));
        tv.push_back(v);
    }

    QmpoProblem prob{SymmetricOperator::sparse(Csr::from_triplets(n, ti, tj, tv)),
                     gaussian_matrix(n, l, rng), "synthetic"};
    return prob;
}

namespace detail {

/// Subtracts from every column its mean over the rows; for a samples-by-
/// features block this centers each feature over the samples.
inline Matrix center_columns_over_samples(const Matrix& a) {
    Matrix c = a;
    for (std::size_t j = 0; j < c.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < c.rows(); ++i) mean += c(i, j);
        mean /= double(c.rows());
        for (std::size_t i = 0; i < c.rows(); ++i) c(i, j) -= mean;
    }
    return c;
}

}  // namespace detail

/// Orthogonal least squares regression instance: H = A~^T A~ as a gram
/// operator (never materialized), G = A~^T B~, where A~ and B~ are the
/// centered training-sample matrix (samples x features) and class indicator.
inline QmpoProblem build_olsr(const LabeledDataset& dataset, double train_fraction = 0.30,
                              std::uint64_t seed = 0) {
    dataset.validate();
    if (train_fraction <= 0.0 || train_fraction > 1.0)
        throw std::invalid_argument("build_olsr: train_fraction must be in (0, 1]");
    const std::size_t m = dataset.x.cols();
    const std::size_t n = dataset.x.rows();
    const std::size_t l = static_cast<std::size_t>(dataset.num_classes);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t m_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(train_fraction * m)));
    order.resize(m_train);
    std::sort(order.begin(), order.end());

    std::set<int> seen;
    for (std::size_t s : order) seen.insert(dataset.labels[s]);
    if (seen.size() < 2)
        throw std::invalid_argument(
            "build_olsr: training split touched a single class; use another seed");

    // samples x features, so that the gram operator is A^T A on feature space
    Matrix a_hat(m_train, n);
    Matrix b_hat(m_train, l);
    for (std::size_t r = 0; r < m_train; ++r) {
        const std::size_t s = order[r];
        for (std::size_t f = 0; f < n; ++f) a_hat(r, f) = dataset.x(f, s);
        b_hat(r, static_cast<std::size_t>(dataset.labels[s] - 1)) = 1.0;
    }
    const Matrix a_centered = detail::center_columns_over_samples(a_hat);
    const Matrix b_centered = detail::center_columns_over_samples(b_hat);

    return {SymmetricOperator::gram(a_centered), matmul_tn(a_centered, b_centered), "olsr"};
}

inline constexpr std::size_t kGcsedMaxSamples = 30000;

/// Graph clustering instance: heat-kernel similarity W, normalized adjacency
/// W_hat = D^{-1/2} W D^{-1/2}, C = D^{1/2} Y (Y^T D Y)^{-1/2};
/// H = -W_hat, G = -gamma C. The problem lives on sample space (m x m).
inline QmpoProblem build_gcsed(const LabeledDataset& dataset, const GraphConfig& cfg,
                               const Matrix& y) {
    cfg.validate();
    const std::size_t m = dataset.x.cols();
    const std::size_t n = dataset.x.rows();
    if (m > kGcsedMaxSamples)
        throw std::invalid_argument("build_gcsed: m exceeds the dense-graph limit");
    if (y.rows() != m) throw std::invalid_argument("build_gcsed: Y row count mismatch");
    const std::size_t l = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
        int ones = 0;
        for (std::size_t j = 0; j < l; ++j) {
            if (y(i, j) == 1.0)
                ++ones;
            else if (y(i, j) != 0.0)
                throw std::invalid_argument("build_gcsed: Y must be a 0/1 indicator");
        }
        if (ones != 1) throw std::invalid_argument("build_gcsed: Y needs exactly one 1 per row");
    }

    Matrix w(m, m);
    const double denom = 2.0 * cfg.t * cfg.t;
    for (std::size_t i = 0; i < m; ++i) {
        w(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            double d2 = 0.0;
            for (std::size_t f = 0; f < n; ++f) {
                const double d = dataset.x(f, i) - dataset.x(f, j);
                d2 += d * d;
            }
            const double v = std::exp(-d2 / denom);
            w(i, j) = v;
            w(j, i) = v;
        }
    }

    std::vector<double> deg(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) deg[i] += w(i, j);
    for (std::size_t i = 0; i < m; ++i)
        if (deg[i] <= 0.0)
            throw std::invalid_argument("build_gcsed: isolated vertex (zero degree)");

    Matrix w_hat(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        const double di = 1.0 / std::sqrt(deg[i]);
        for (std::size_t j = i; j < m; ++j) {
            const double v = w(i, j) * di / std::sqrt(deg[j]);
            w_hat(i, j) = -v;
            w_hat(j, i) = -v;
        }
    }

    // C = D^{1/2} Y (Y^T D Y)^{-1/2}
    Matrix ydy(l, l);
    for (std::size_t a = 0; a < l; ++a)
        for (std::size_t b = 0; b < l; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += y(i, a) * deg[i] * y(i, b);
            ydy(a, b) = s;
        }
    const Spectrum es = sym_eig(ydy);
    if (es.min() <= 0.0)
        throw std::invalid_argument("build_gcsed: empty cluster column in Y");
    Matrix inv_sqrt(l, l);
    for (std::size_t a = 0; a < l; ++a)
        for (std::size_t b = a; b < l; ++b) {
            double s = 0.0;
            for (std::size_t k2 = 0; k2 < l; ++k2)
                s += es.vectors(a, k2) / std::sqrt(es.values[k2]) * es.vectors(b, k2);
            inv_sqrt(a, b) = s;
            inv_sqrt(b, a) = s;
        }
    Matrix dy(m, l);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < l; ++a) dy(i, a) = std::sqrt(deg[i]) * y(i, a);
    Matrix g = matmul(dy, inv_sqrt);
    g *= -cfg.gamma;

    return {SymmetricOperator::dense(std::move(w_hat)), std::move(g), "gcsed"};
}

}  // namespace qmpo
