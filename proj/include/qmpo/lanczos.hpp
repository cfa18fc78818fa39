#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "qmpo/errors.hpp"
#include "qmpo/matrix.hpp"
#include "qmpo/operator.hpp"
#include "qmpo/qr.hpp"
#include "qmpo/random.hpp"

namespace qmpo {

/// Symmetric block tridiagonal projection T_k, assembled dense.
struct BlockTridiagonal {
    std::size_t order = 0;
    Matrix dense;
};

/// State of the block Lanczos process. The inner basis blocks V_1..V_k
/// (concatenated: an orthonormal basis of the k-step block Krylov subspace)
/// always carry their diagonal blocks M_j; while the process has not
/// terminated, the boundary block V_{k+1} with coupling N_k and diagonal
/// M_{k+1} is kept one step ahead, so the three-term relation
/// H V_k = V_k T_k + V_{k+1} N_k E^T is available at every step.
class BlockLanczosState {
public:
    std::size_t block_size() const { return ell_; }
    std::size_t steps() const { return k_; }
    std::size_t basis_dim() const { return k_ * ell_; }
    bool terminated() const { return terminated_; }
    bool saturated() const { return saturated_; }
    bool can_extend() const { return !terminated_ && !saturated_; }
    bool has_boundary() const { return v_.size() == k_ + 1; }

    const Matrix& v_block(std::size_t j) const { return v_[j]; }        ///< j in [0, k) inner, k = boundary
    const Matrix& m_block(std::size_t j) const { return m_[j]; }
    const Matrix& n_block(std::size_t j) const { return noff_[j]; }        ///< couples block j to j+1
    const Matrix& k_factor() const { return k_factor_; }
    double hnorm_estimate() const { return hnorm_est_; }

    /// Concatenated inner basis, n x k*ell.
    Matrix basis() const {
        Matrix b(n_, basis_dim());
        for (std::size_t j = 0; j < k_; ++j)
            for (std::size_t r = 0; r < n_; ++r)
                for (std::size_t c = 0; c < ell_; ++c) b(r, j * ell_ + c) = v_[j](r, c);
        return b;
    }

    /// U = V_k P for a reduced point P with k*ell rows.
    Matrix lift(const Matrix& p) const {
        if (p.rows() != basis_dim()) throw std::invalid_argument("lift: row count mismatch");
        Matrix u(n_, p.cols());
        for (std::size_t j = 0; j < k_; ++j) {
            const Matrix pj = rows_slice(p, j * ell_, ell_);
            const Matrix& vj = v_[j];
            for (std::size_t r = 0; r < n_; ++r) {
                double* ur = u.row_ptr(r);
                for (std::size_t c = 0; c < ell_; ++c) {
                    const double vrc = vj(r, c);
                    if (vrc == 0.0) continue;
                    const double* pc = pj.row_ptr(c);
                    for (std::size_t q = 0; q < p.cols(); ++q) ur[q] += vrc * pc[q];
                }
            }
        }
        return u;
    }

    /// G_k = V_k^T G = [K; 0].
    Matrix reduced_g() const {
        Matrix gk(basis_dim(), ell_);
        for (std::size_t i = 0; i < ell_; ++i)
            for (std::size_t j = 0; j < ell_; ++j) gk(i, j) = k_factor_(i, j);
        return gk;
    }

    friend BlockLanczosState lanczos_init(const SymmetricOperator& h, const Matrix& g);
    friend void lanczos_extend(BlockLanczosState& state, const SymmetricOperator& h);

private:
    double termination_tol() const { return 1e-12 * (1.0 + hnorm_est_); }

    /// Two-pass classical Gram-Schmidt of x against the inner basis.
    void reorthogonalize(Matrix& x) const {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < k_; ++j) matmul_sub(x, v_[j], matmul_tn(v_[j], x));
    }

    /// Column-wise two-pass MGS QR of l. Columns whose residual falls under
    /// the deflation tolerance get a zero row in N and are replaced by fresh
    /// random directions orthogonal to everything already held. Returns false
    /// when no independent direction at all is left (invariant subspace).
    bool qr_with_deflation(const Matrix& l, Matrix& q_out, Matrix& n_out) {
        const std::size_t p = l.cols();
        const double tol = termination_tol();
        q_out = Matrix(n_, p);
        n_out = Matrix(p, p);
        std::vector<bool> dead(p, false);
        std::size_t kept = 0;

        std::vector<double> col(n_);
        for (std::size_t c = 0; c < p; ++c) {
            for (std::size_t r = 0; r < n_; ++r) col[r] = l(r, c);
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t t = 0; t < c; ++t) {
                    if (dead[t]) continue;
                    double coef = 0.0;
                    for (std::size_t r = 0; r < n_; ++r) coef += q_out(r, t) * col[r];
                    n_out(t, c) += coef;
                    for (std::size_t r = 0; r < n_; ++r) col[r] -= coef * q_out(r, t);
                }
            }
            double rho = 0.0;
            for (double x : col) rho += x * x;
            rho = std::sqrt(rho);
            if (rho > tol) {
                n_out(c, c) = rho;
                for (std::size_t r = 0; r < n_; ++r) q_out(r, c) = col[r] / rho;
                ++kept;
            } else {
                dead[c] = true;
            }
        }
        if (kept == 0) return false;

        // pad dead columns with random directions orthogonal to the basis and
        // to every column filled so far (unfilled columns are zero, harmless)
        for (std::size_t c = 0; c < p; ++c) {
            if (!dead[c]) continue;
            bool filled = false;
            for (int attempt = 0; attempt < 4 && !filled; ++attempt) {
                Matrix cand = gaussian_matrix(n_, 1, rng_);
                reorthogonalize(cand);
                for (int pass = 0; pass < 2; ++pass) {
                    for (std::size_t t = 0; t < p; ++t) {
                        if (t == c) continue;
                        double coef = 0.0;
                        for (std::size_t r = 0; r < n_; ++r) coef += q_out(r, t) * cand(r, 0);
                        for (std::size_t r = 0; r < n_; ++r) cand(r, 0) -= coef * q_out(r, t);
                    }
                }
                double rho = 0.0;
                for (std::size_t r = 0; r < n_; ++r) rho += cand(r, 0) * cand(r, 0);
                rho = std::sqrt(rho);
                if (rho > 1e-8) {
                    for (std::size_t r = 0; r < n_; ++r) q_out(r, c) = cand(r, 0) / rho;
                    filled = true;
                }
            }
            if (!filled) return false;  // basis already spans the space
        }
        return true;
    }

    /// Builds the boundary block from the cached product H * (last inner
    /// block); flips the terminated flag instead when the residual block
    /// vanishes or no new direction exists.
    void make_boundary(const SymmetricOperator& h) {
        Matrix l = hv_last_;
        matmul_sub(l, v_[k_ - 1], m_[k_ - 1]);
        if (k_ >= 2) matmul_sub(l, v_[k_ - 2], transpose(noff_[k_ - 2]));
        reorthogonalize(l);

        if (frobenius_norm(l) <= termination_tol()) {
            terminated_ = true;
            return;
        }
        if (basis_dim() + ell_ > n_) {
            // fewer than a full block of directions left; the process cannot
            // continue but the subspace is not certified invariant
            saturated_ = true;
            return;
        }
        Matrix q, nk;
        if (!qr_with_deflation(l, q, nk)) {
            terminated_ = true;
            return;
        }
        hv_last_ = h.apply(q);
        Matrix m_next = symmetrize(matmul_tn(q, hv_last_));
        hnorm_est_ = std::max(hnorm_est_, max_abs(m_next));
        v_.push_back(std::move(q));
        noff_.push_back(std::move(nk));
        m_.push_back(std::move(m_next));
    }

    std::size_t n_ = 0;
    std::size_t ell_ = 0;
    std::size_t k_ = 0;
    std::vector<Matrix> v_;  // k inner blocks, plus boundary while present
    std::vector<Matrix> m_;
    std::vector<Matrix> noff_;  // noff_[j] couples block j and j+1
    Matrix k_factor_;
    Matrix hv_last_;  // H * newest block, reused by the next residual
    bool terminated_ = false;
    bool saturated_ = false;
    double hnorm_est_ = 0.0;
    Rng rng_{0x9e3779b97f4a7c15ull};
};

/// Starts the process: G = V_1 K, M_1 = V_1^T H V_1, and one boundary step
/// so the relation is available immediately.
inline BlockLanczosState lanczos_init(const SymmetricOperator& h, const Matrix& g) {
    const std::size_t n = h.dim();
    const std::size_t ell = g.cols();
    if (g.rows() != n) throw std::invalid_argument("lanczos_init: G row count mismatch");
    if (ell < 1 || n <= ell)
        throw std::invalid_argument("lanczos_init: need n > l >= 1");
    if (frobenius_norm(g) == 0.0)
        throw DegenerateProblemError(
            "lanczos_init: G = 0 reduces the problem to a plain eigenvalue problem");

    BlockLanczosState s;
    s.n_ = n;
    s.ell_ = ell;
    QrResult qr = thin_qr(g);
    s.k_factor_ = std::move(qr.r);
    s.hv_last_ = h.apply(qr.q);
    Matrix m1 = symmetrize(matmul_tn(qr.q, s.hv_last_));
    s.hnorm_est_ = max_abs(m1);
    s.v_.push_back(std::move(qr.q));
    s.m_.push_back(std::move(m1));
    s.k_ = 1;
    s.make_boundary(h);
    return s;
}

/// One step of the recurrence: the boundary block joins the basis and a new
/// boundary is produced (or the process terminates on an invariant subspace).
inline void lanczos_extend(BlockLanczosState& state, const SymmetricOperator& h) {
    if (state.terminated())
        throw ContractViolation("lanczos_extend: process already terminated");
    if (state.saturated())
        throw ContractViolation("lanczos_extend: fewer than one block of directions left");
    state.k_ += 1;
    state.make_boundary(h);
}

/// T_k assembled from the stored inner blocks.
inline BlockTridiagonal assemble_T(const BlockLanczosState& s) {
    const std::size_t ell = s.block_size();
    const std::size_t k = s.steps();
    BlockTridiagonal t;
    t.order = k * ell;
    t.dense = Matrix(t.order, t.order);
    for (std::size_t j = 0; j < k; ++j) {
        const Matrix& mj = s.m_block(j);
        for (std::size_t a = 0; a < ell; ++a)
            for (std::size_t b = 0; b < ell; ++b) t.dense(j * ell + a, j * ell + b) = mj(a, b);
        if (j + 1 < k) {
            const Matrix& nj = s.n_block(j);
            for (std::size_t a = 0; a < ell; ++a)
                for (std::size_t b = 0; b < ell; ++b) {
                    t.dense((j + 1) * ell + a, j * ell + b) = nj(a, b);
                    t.dense(j * ell + b, (j + 1) * ell + a) = nj(a, b);
                }
        }
    }
    return t;
}

/// || H V_k - V_k T_k - V_{k+1} N_k E^T ||_F; the boundary term is absent
/// after termination, where the identity H V_k = V_k T_k takes over.
inline double relation_residual(const BlockLanczosState& s, const SymmetricOperator& h) {
    const Matrix basis = s.basis();
    Matrix r = h.apply(basis);
    const BlockTridiagonal t = assemble_T(s);
    matmul_sub(r, basis, t.dense);
    if (s.has_boundary()) {
        const std::size_t ell = s.block_size();
        const Matrix tail = matmul(s.v_block(s.steps()), s.n_block(s.steps() - 1));
        for (std::size_t i = 0; i < r.rows(); ++i)
            for (std::size_t c = 0; c < ell; ++c)
                r(i, (s.steps() - 1) * ell + c) -= tail(i, c);
    }
    return frobenius_norm(r);
}

}  // namespace qmpo
