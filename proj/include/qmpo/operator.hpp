#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include "qmpo/matrix.hpp"

namespace qmpo {

/// Compressed-sparse-row storage. The structure is expected to be symmetric
/// (both triangles present); builders in this library always emit it so.
struct Csr {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;  ///< size n+1
    std::vector<std::size_t> col_idx;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }

    static Csr from_triplets(std::size_t n, std::vector<std::size_t> rows,
                             std::vector<std::size_t> cols, std::vector<double> vals) {
        Csr m;
        m.n = n;
        m.row_ptr.assign(n + 1, 0);
        for (std::size_t r : rows) {
            if (r >= n) throw std::invalid_argument("Csr: row index out of range");
            ++m.row_ptr[r + 1];
        }
        for (std::size_t i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
        m.col_idx.resize(vals.size());
        m.values.resize(vals.size());
        std::vector<std::size_t> cursor(m.row_ptr.begin(), m.row_ptr.end() - 1);
        for (std::size_t t = 0; t < vals.size(); ++t) {
            if (cols[t] >= n) throw std::invalid_argument("Csr: column index out of range");
            const std::size_t pos = cursor[rows[t]]++;
            m.col_idx[pos] = cols[t];
            m.values[pos] = vals[t];
        }
        return m;
    }
};

/// Symmetric n x n linear action Y -> H Y. Three storage variants: dense,
/// sparse CSR, and gram (a data matrix A standing for A^T A, which is never
/// materialized). Copies are cheap; the payload is shared and immutable.
class SymmetricOperator {
public:
    enum class Kind { dense, sparse, gram };

    static SymmetricOperator dense(Matrix h) {
        if (h.rows() != h.cols())
            throw std::invalid_argument("SymmetricOperator: square matrix required");
        if (asymmetry(h) > 1e-10 * (1.0 + frobenius_norm(h)))
            throw std::invalid_argument("SymmetricOperator: dense input is not symmetric");
        SymmetricOperator op;
        op.kind_ = Kind::dense;
        op.n_ = h.rows();
        op.dense_ = std::make_shared<Matrix>(std::move(h));
        return op;
    }

    static SymmetricOperator sparse(Csr h) {
        SymmetricOperator op;
        op.kind_ = Kind::sparse;
        op.n_ = h.n;
        op.sparse_ = std::make_shared<Csr>(std::move(h));
        return op;
    }

    /// A has shape m x n (samples by features); the operator is A^T A on R^n.
    static SymmetricOperator gram(Matrix a) {
        SymmetricOperator op;
        op.kind_ = Kind::gram;
        op.n_ = a.cols();
        op.dense_ = std::make_shared<Matrix>(std::move(a));
        return op;
    }

    static SymmetricOperator identity(std::size_t n) {
        Csr id;
        id.n = n;
        id.row_ptr.resize(n + 1);
        id.col_idx.resize(n);
        id.values.assign(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            id.row_ptr[i + 1] = i + 1;
            id.col_idx[i] = i;
        }
        return sparse(std::move(id));
    }

    Kind kind() const { return kind_; }
    std::size_t dim() const { return n_; }
    double scale() const { return scale_; }

    /// Stored payloads; wrong-variant access throws. The scale factor is not
    /// folded in.
    const Csr& csr_data() const {
        if (kind_ != Kind::sparse) throw std::invalid_argument("csr_data: not a sparse operator");
        return *sparse_;
    }
    const Matrix& dense_data() const {
        if (kind_ != Kind::dense) throw std::invalid_argument("dense_data: not a dense operator");
        return *dense_;
    }
    const Matrix& gram_data() const {
        if (kind_ != Kind::gram) throw std::invalid_argument("gram_data: not a gram operator");
        return *dense_;
    }

    /// Same action multiplied by c. Shares the underlying storage.
    SymmetricOperator scaled(double c) const {
        SymmetricOperator op = *this;
        op.scale_ *= c;
        return op;
    }

    /// Y = scale * H * X.
    Matrix apply(const Matrix& x) const {
        if (x.rows() != n_) throw std::invalid_argument("apply_sym: row count mismatch");
        Matrix y(n_, x.cols());
        switch (kind_) {
            case Kind::dense:
                y = matmul(*dense_, x);
                break;
            case Kind::sparse: {
                const Csr& h = *sparse_;
                const std::size_t p = x.cols();
                for (std::size_t i = 0; i < n_; ++i) {
                    double* yi = y.row_ptr(i);
                    for (std::size_t t = h.row_ptr[i]; t < h.row_ptr[i + 1]; ++t) {
                        const double v = h.values[t];
                        const double* xr = x.row_ptr(h.col_idx[t]);
                        for (std::size_t j = 0; j < p; ++j) yi[j] += v * xr[j];
                    }
                }
                break;
            }
            case Kind::gram:
                y = matmul_tn(*dense_, matmul(*dense_, x));
                break;
        }
        if (scale_ != 1.0) y *= scale_;
        return y;
    }

    /// Upper bound on ||H||_2 from row sums of |entries| (Gershgorin-style);
    /// the gram variant uses ||A||_1 * ||A||_inf >= ||A^T A||_2.
    double norm_bound() const {
        double b = 0.0;
        switch (kind_) {
            case Kind::dense: {
                for (std::size_t i = 0; i < n_; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n_; ++j) s += std::abs((*dense_)(i, j));
                    b = std::max(b, s);
                }
                break;
            }
            case Kind::sparse: {
                const Csr& h = *sparse_;
                for (std::size_t i = 0; i < n_; ++i) {
                    double s = 0.0;
                    for (std::size_t t = h.row_ptr[i]; t < h.row_ptr[i + 1]; ++t)
                        s += std::abs(h.values[t]);
                    b = std::max(b, s);
                }
                break;
            }
            case Kind::gram: {
                const Matrix& a = *dense_;
                double rmax = 0.0;
                std::vector<double> colsum(a.cols(), 0.0);
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    double rs = 0.0;
                    for (std::size_t j = 0; j < a.cols(); ++j) {
                        const double v = std::abs(a(i, j));
                        rs += v;
                        colsum[j] += v;
                    }
                    rmax = std::max(rmax, rs);
                }
                double cmax = 0.0;
                for (double c : colsum) cmax = std::max(cmax, c);
                b = rmax * cmax;
                break;
            }
        }
        return b * std::abs(scale_);
    }

    /// Materializes the full n x n matrix. Oracle and verification use only;
    /// guarded so it never runs on a production-scale operator.
    Matrix densify(std::size_t guard = 2000) const {
        if (n_ > guard) throw std::invalid_argument("densify: operator too large");
        Matrix full = apply(Matrix::identity(n_));
        return symmetrize(full);
    }

private:
    Kind kind_ = Kind::dense;
    std::size_t n_ = 0;
    double scale_ = 1.0;
    std::shared_ptr<const Matrix> dense_;  // dense H, or the gram data matrix A
    std::shared_ptr<const Csr> sparse_;
};

/// Free-function form of the operator action.
inline Matrix apply_sym(const SymmetricOperator& op, const Matrix& x) { return op.apply(x); }

}  // namespace qmpo
