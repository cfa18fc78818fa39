#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "qmpo/eig.hpp"
#include "qmpo/errors.hpp"
#include "qmpo/matrix.hpp"
#include "qmpo/qr.hpp"
#include "qmpo/random.hpp"

namespace qmpo {

/// min tr(P^T T P) + 2 tr(P^T Gr) over P with orthonormal columns.
struct ReducedProblem {
    Matrix t;   ///< m x m symmetric
    Matrix gr;  ///< m x l

    std::size_t dim() const { return t.rows(); }
    std::size_t cols() const { return gr.cols(); }
};

/// Feasible point, P^T P = I.
struct StiefelPoint {
    Matrix p;
};

/// Tangent vectors at P satisfy sym(P^T xi) = 0; they are carried as plain
/// matrices and validated where the contract demands it.
using TangentVector = Matrix;

struct RtrConfig {
    int max_outer = 500;
    double grad_tol = -1.0;     ///< <= 0: use 1e-10 * (1 + ||Gr||_F)
    double radius_init = -1.0;  ///< <= 0: 0.1 * sqrt(l)
    double radius_max = -1.0;   ///< <= 0: sqrt(m * l)
    double rho_prime = 0.1;     ///< acceptance threshold, in (0, 1/4]
    int tcg_max_iter = 250;
    double theta = 1.0;  ///< tCG residual reduction exponent
    double kappa = 0.1;  ///< tCG residual reduction factor
    int extra_starts = 0;  ///< random feasible starts tried besides P0
    std::uint64_t seed = 20240901ull;

    void validate() const {
        if (max_outer < 1 || tcg_max_iter < 1 || theta <= 0.0 || kappa <= 0.0 ||
            extra_starts < 0)
            throw std::invalid_argument("RtrConfig: bounds must be positive");
        if (rho_prime <= 0.0 || rho_prime > 0.25)
            throw std::invalid_argument("RtrConfig: rho_prime must lie in (0, 1/4]");
    }
};

struct RtrResult {
    StiefelPoint p;
    Matrix lambda;  ///< l x l, exactly symmetric
    double objective = 0.0;
    double grad_norm = 0.0;
    int outer_iterations = 0;
    bool converged = false;
};

inline double reduced_objective(const ReducedProblem& prob, const Matrix& p) {
    const Matrix tp = matmul(prob.t, p);
    return inner(p, tp) + 2.0 * inner(p, prob.gr);
}

/// d/dP of the objective in the ambient space: 2 (T P + Gr).
inline Matrix euclidean_grad(const ReducedProblem& prob, const Matrix& p) {
    Matrix g = matmul(prob.t, p);
    g += prob.gr;
    g *= 2.0;
    return g;
}

/// xi = X - P sym(P^T X), the projection onto the tangent space at P.
inline TangentVector project_tangent(const Matrix& p, const Matrix& x) {
    Matrix xi = x;
    matmul_sub(xi, p, symmetrize(matmul_tn(p, x)));
    return xi;
}

inline Matrix riemannian_grad(const ReducedProblem& prob, const Matrix& p) {
    return project_tangent(p, euclidean_grad(prob, p));
}

/// Riemannian Hessian action for the embedded metric:
/// P_T(2 T xi - xi sym(P^T egrad)).
inline TangentVector hess_action(const ReducedProblem& prob, const Matrix& p,
                                 const TangentVector& xi) {
    const double sym_err = frobenius_norm(symmetrize(matmul_tn(p, xi)));
    if (sym_err > 1e-8 * (1.0 + frobenius_norm(xi)))
        throw ContractViolation("hess_action: xi is not tangent at P");
    Matrix h = matmul(prob.t, xi);
    h *= 2.0;
    const Matrix pg = symmetrize(matmul_tn(p, euclidean_grad(prob, p)));
    matmul_sub(h, xi, pg);
    return project_tangent(p, h);
}

/// QR retraction. A zero step returns P itself.
inline StiefelPoint retract(const StiefelPoint& p, const TangentVector& xi) {
    if (frobenius_norm(xi) == 0.0) return p;
    return {thin_qr(p.p + xi).q};
}

/// Lambda = -sym(P^T (T P + Gr)); the construction mirrors entries so the
/// result equals its transpose bit for bit.
inline Matrix recover_multiplier(const ReducedProblem& prob, const Matrix& p) {
    Matrix tp = matmul(prob.t, p);
    tp += prob.gr;
    Matrix lam = symmetrize(matmul_tn(p, tp));
    lam *= -1.0;
    return lam;
}

/// lambda_min(sym(-P^T Gr)); >= 0 (up to tolerance) at a global minimizer.
inline double global_necessary_check(const ReducedProblem& prob, const Matrix& p) {
    Matrix s = symmetrize(matmul_tn(p, prob.gr));
    s *= -1.0;
    return sym_eig(s).min();
}

namespace detail {

struct TcgInternals {
    TangentVector step;
    double model_decrease = 0.0;
    bool hit_boundary = false;
};

/// Steihaug-Toint truncated CG on the tangent space at P. Stops on the
/// radius boundary, on negative curvature, or once
/// ||r_j|| <= ||r_0|| min(||r_0||^theta, kappa).
inline TcgInternals tcg_inner(const ReducedProblem& prob, const Matrix& p, const Matrix& grad,
                              double radius, const RtrConfig& cfg) {
    TcgInternals out;
    const std::size_t m = p.rows(), l = p.cols();
    out.step = Matrix(m, l);

    Matrix r = grad;
    double r_r = inner(r, r);
    const double norm_r0 = std::sqrt(r_r);
    if (norm_r0 == 0.0) return out;
    const double stop_res = norm_r0 * std::min(std::pow(norm_r0, cfg.theta), cfg.kappa);

    Matrix delta = r;
    delta *= -1.0;
    double e_pe = 0.0, e_pd = 0.0, d_pd = r_r;

    const int max_iter = cfg.tcg_max_iter > 0 ? cfg.tcg_max_iter : 250;
    for (int j = 0; j < max_iter; ++j) {
        const TangentVector hd = hess_action(prob, p, delta);
        const double d_hd = inner(delta, hd);

        const double alpha = d_hd > 0.0 ? r_r / d_hd : 0.0;
        const double e_pe_next = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;
        if (d_hd <= 0.0 || e_pe_next >= radius * radius) {
            const double tau =
                (-e_pd + std::sqrt(e_pd * e_pd + d_pd * (radius * radius - e_pe))) / d_pd;
            Matrix extra = delta;
            extra *= tau;
            out.step += extra;
            out.hit_boundary = true;
            break;
        }
        Matrix ad = delta;
        ad *= alpha;
        out.step += ad;
        e_pe = e_pe_next;

        Matrix ahd = hd;
        ahd *= alpha;
        r += ahd;
        r = project_tangent(p, r);
        const double r_r_next = inner(r, r);
        if (std::sqrt(r_r_next) <= stop_res) break;

        const double beta = r_r_next / r_r;
        r_r = r_r_next;
        Matrix nd = delta;
        nd *= beta;
        nd -= r;
        delta = nd;
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = r_r + beta * beta * d_pd;
    }

    // exact model decrease -(<g, s> + 1/2 <s, H s>) of the returned step
    const TangentVector hs = hess_action(prob, p, out.step);
    out.model_decrease = -(inner(grad, out.step) + 0.5 * inner(out.step, hs));
    return out;
}

inline RtrResult rtr_single(const ReducedProblem& prob, const StiefelPoint& p0,
                            const RtrConfig& cfg) {
    const std::size_t l = prob.cols();
    const std::size_t m = prob.dim();
    const double grad_tol =
        cfg.grad_tol > 0.0 ? cfg.grad_tol : 1e-10 * (1.0 + frobenius_norm(prob.gr));
    const double radius_max =
        cfg.radius_max > 0.0 ? cfg.radius_max : std::sqrt(double(m) * double(l));
    double radius = cfg.radius_init > 0.0 ? cfg.radius_init : 0.1 * std::sqrt(double(l));
    radius = std::min(radius, radius_max);

    RtrResult res;
    res.p = p0;
    res.objective = reduced_objective(prob, res.p.p);

    for (int it = 0; it < cfg.max_outer; ++it) {
        const Matrix g = riemannian_grad(prob, res.p.p);
        res.grad_norm = frobenius_norm(g);
        res.outer_iterations = it;
        if (res.grad_norm <= grad_tol) {
            res.converged = true;
            break;
        }

        const TcgInternals tcg = tcg_inner(prob, res.p.p, g, radius, cfg);
        const StiefelPoint cand = retract(res.p, tcg.step);
        const double f_cand = reduced_objective(prob, cand.p);
        // regularize the ratio so cancellation noise in f does not stall the
        // superlinear phase (the model decrease is exact, f differences are not)
        const double rho_reg =
            1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(res.objective));
        const double rho = (res.objective - f_cand + rho_reg) / (tcg.model_decrease + rho_reg);
        const double step_norm = frobenius_norm(tcg.step);

        if (rho < 0.25)
            radius *= 0.25;
        else if (rho > 0.75 && (tcg.hit_boundary || step_norm >= 0.99 * radius))
            radius = std::min(2.0 * radius, radius_max);

        if (rho > cfg.rho_prime && f_cand <= res.objective + rho_reg) {
            res.p = cand;
            res.objective = f_cand;
        }
        if (radius < 1e-15) break;
    }

    const Matrix g_final = riemannian_grad(prob, res.p.p);
    res.grad_norm = frobenius_norm(g_final);
    res.converged = res.grad_norm <= grad_tol;
    res.lambda = recover_multiplier(prob, res.p.p);
    return res;
}

/// Gr = 0 reduces to the symmetric eigenvalue problem; solved exactly.
inline RtrResult rtr_eigen_path(const ReducedProblem& prob) {
    const std::size_t m = prob.dim(), l = prob.cols();
    const Spectrum es = sym_eig(prob.t);
    RtrResult res;
    res.p.p = Matrix(m, l);
    for (std::size_t c = 0; c < l; ++c)
        for (std::size_t r = 0; r < m; ++r) res.p.p(r, c) = es.vectors(r, m - l + c);
    res.objective = reduced_objective(prob, res.p.p);
    res.grad_norm = frobenius_norm(riemannian_grad(prob, res.p.p));
    res.lambda = recover_multiplier(prob, res.p.p);
    res.converged = true;
    return res;
}

}  // namespace detail

/// tCG step alone, exposed for testing against dense tangent-space solves.
inline TangentVector tcg_step(const ReducedProblem& prob, const Matrix& p, const Matrix& grad,
                              double radius, const RtrConfig& cfg) {
    if (radius <= 0.0) throw std::invalid_argument("tcg_step: radius must be positive");
    return detail::tcg_inner(prob, p, grad, radius, cfg).step;
}

/// Riemannian trust-region solve of the reduced problem from P0, plus
/// cfg.extra_starts random feasible starts; the best objective wins.
inline RtrResult rtr_solve(const ReducedProblem& prob, const StiefelPoint& p0,
                           const RtrConfig& cfg = {}) {
    cfg.validate();
    if (p0.p.rows() != prob.dim() || p0.p.cols() != prob.cols())
        throw std::invalid_argument("rtr_solve: P0 shape mismatch");
    if (orthonormality_error(p0.p) > 1e-8)
        throw std::invalid_argument("rtr_solve: P0 is not feasible");

    if (frobenius_norm(prob.gr) == 0.0) return detail::rtr_eigen_path(prob);

    RtrResult best = detail::rtr_single(prob, p0, cfg);
    Rng rng(cfg.seed);
    for (int s = 0; s < cfg.extra_starts; ++s) {
        StiefelPoint start{random_orthonormal(prob.dim(), prob.cols(), rng)};
        RtrResult r = detail::rtr_single(prob, start, cfg);
        if (r.objective < best.objective) best = r;
    }
    return best;
}

}  // namespace qmpo
