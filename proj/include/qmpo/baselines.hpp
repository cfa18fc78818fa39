#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>

#include "qmpo/driver.hpp"
#include "qmpo/errors.hpp"
#include "qmpo/polar.hpp"
#include "qmpo/rtr.hpp"

namespace qmpo {

struct BaselineConfig {
    std::size_t max_iter = 2000;
    double f_tol = 1e-12;        ///< stop when |f_t - f_{t+1}| / (1 + |f_t|) <= f_tol
    double alpha_margin = 1e-8;  ///< shift is norm_bound(H) + margin, so alpha I - H >= 0
    std::uint64_t seed = 7;

    void validate() const {
        if (max_iter < 1 || f_tol <= 0.0 || alpha_margin <= 0.0)
            throw std::invalid_argument("BaselineConfig: bounds must be positive");
    }
};

/// Generalized power iteration: U <- polar factor of (alpha I - H) U - G.
/// The shift keeps alpha I - H positive semidefinite, which makes the
/// objective non-increasing. Reported quantities are for the scaled problem,
/// same convention as the main solver.
inline SolveReport gpi_solve(const QmpoProblem& problem, const BaselineConfig& cfg = {}) {
    cfg.validate();
    const std::size_t n = problem.h.dim();
    const std::size_t l = problem.g.cols();
    if (problem.g.rows() != n) throw std::invalid_argument("gpi_solve: G row count mismatch");
    if (l < 1 || n < l) throw std::invalid_argument("gpi_solve: need n >= l >= 1");

    const auto t0 = std::chrono::steady_clock::now();
    const NormalizedProblem np = normalize(problem);
    const SymmetricOperator& h = np.problem.h;
    const Matrix& g = np.problem.g;
    const double alpha = h.norm_bound() + cfg.alpha_margin;
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    Rng rng(cfg.seed);
    Matrix neg_g = g;
    neg_g *= -1.0;
    QrResult init = thin_qr(neg_g);
    Matrix u = init.rank == l ? std::move(init.q) : random_orthonormal(n, l, rng);

    SolveReport report;
    report.solver = "gpi";
    report.scale = np.scale;

    double f_prev = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        const Matrix hu = h.apply(u);
        const double f = inner(u, hu) + 2.0 * inner(u, g);

        Matrix stat = hu;
        stat += g;
        Matrix lambda = symmetrize(matmul_tn(u, stat));
        lambda *= -1.0;
        Matrix resid = stat;
        resid += matmul(u, lambda);
        const double kkt = frobenius_norm(resid);

        Checkpoint cp;
        cp.k = it;
        cp.f = f;
        cp.kkt = kkt;
        if (!report.u.empty()) cp.du = frobenius_norm(u - report.u) / sqrt_n;
        cp.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        report.history.push_back(cp);
        report.u = u;
        report.lambda = lambda;
        report.objective = f;
        report.kkt_residual = kkt;

        if (std::abs(f_prev - f) / (1.0 + std::abs(f)) <= cfg.f_tol && it > 0) {
            report.termination = Termination::f_and_U_and_g_converged;
            return report;
        }
        f_prev = f;

        Matrix y = u;
        y *= alpha;
        y -= hu;
        y -= g;
        try {
            u = polar(y).q;
        } catch (const SingularMatrixError&) {
            // rank collapse: restart the iterate with a small random
            // orthonormal perturbation
            std::cerr << "gpi_solve: polar rank deficiency at iteration " << it
                      << ", restarting iterate\n";
            Matrix bump = gaussian_matrix(n, l, rng);
            bump *= 0.01;
            u = thin_qr(u + bump).q;
        }
    }
    report.termination = Termination::k_max;
    return report;
}

/// Full-space dense RTR, the small-instance oracle: runs on the densified
/// operator from `restarts` random starts plus the block Lanczos solution as
/// a warm start, and keeps the best. Guarded to n <= 500.
inline SolveReport dense_rtr_oracle(const QmpoProblem& problem, int restarts = 5,
                                    const std::optional<Matrix>& warm = std::nullopt) {
    const std::size_t n = problem.h.dim();
    const std::size_t l = problem.g.cols();
    if (n > 500) throw std::invalid_argument("dense_rtr_oracle: n > 500 (dense oracle guard)");
    if (problem.g.rows() != n)
        throw std::invalid_argument("dense_rtr_oracle: G row count mismatch");

    const double s = frobenius_norm(problem.g);
    const double scale = s > 0.0 ? s : 1.0;
    const SymmetricOperator h_scaled = problem.h.scaled(1.0 / scale);
    Matrix g_scaled = problem.g;
    g_scaled *= 1.0 / scale;

    ReducedProblem full{h_scaled.densify(), g_scaled};

    StiefelPoint p0;
    if (warm.has_value()) {
        p0.p = *warm;
    } else if (s > 0.0) {
        SolverConfig cfg;
        cfg.rtr.extra_starts = restarts;
        p0.p = solve(problem, cfg).u;
    } else {
        p0.p = Matrix(n, l);
        for (std::size_t i = 0; i < l; ++i) p0.p(i, i) = 1.0;
    }

    RtrConfig rtr_cfg;
    rtr_cfg.extra_starts = restarts;
    rtr_cfg.seed = 0x51efacceull;
    const RtrResult sol = rtr_solve(full, p0, rtr_cfg);

    SolveReport report;
    report.solver = "rtr";
    report.scale = scale;
    report.u = sol.p.p;
    report.lambda = sol.lambda;
    report.objective = sol.objective;
    report.kkt_residual =
        direct_kkt(QmpoProblem{h_scaled, g_scaled, problem.name}, sol.p.p, sol.lambda);
    report.termination = sol.converged ? Termination::f_and_U_and_g_converged : Termination::k_max;
    Checkpoint cp;
    cp.k = static_cast<std::size_t>(sol.outer_iterations);
    cp.f = sol.objective;
    cp.kkt = report.kkt_residual;
    report.history.push_back(cp);
    return report;
}

}  // namespace qmpo
