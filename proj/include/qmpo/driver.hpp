#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qmpo/errors.hpp"
#include "qmpo/lanczos.hpp"
#include "qmpo/matrix.hpp"
#include "qmpo/operator.hpp"
#include "qmpo/rtr.hpp"

namespace qmpo {

struct QmpoProblem {
    SymmetricOperator h;
    Matrix g;  ///< n x l, nonzero
    std::string name;
};

struct SolverConfig {
    double eps_f = 1e-10;
    double eps_u = 1e-6;
    double eps_g = 1e-5;
    std::size_t k_max = 1000;           ///< Lanczos step budget
    std::size_t checkpoint_max = 1000;  ///< reduced-solve budget
    std::size_t solve_every = 5;        ///< reduced-solve cadence in Lanczos steps
    std::size_t m_max = 5000;           ///< cap on the basis dimension k*l
    RtrConfig rtr;
    std::uint64_t seed = 0;

    void validate() const {
        if (eps_f <= 0.0 || eps_u <= 0.0 || eps_g <= 0.0)
            throw std::invalid_argument("SolverConfig: tolerances must be positive");
        if (k_max < 1 || solve_every < 1 || checkpoint_max < 1 || m_max < 1)
            throw std::invalid_argument("SolverConfig: budgets must be at least one");
        rtr.validate();
    }
};

enum class Termination { f_and_U_and_g_converged, k_max, lanczos_terminated };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::f_and_U_and_g_converged: return "f_and_U_and_g_converged";
        case Termination::k_max: return "k_max";
        case Termination::lanczos_terminated: return "lanczos_terminated";
    }
    return "unknown";
}

struct Checkpoint {
    std::size_t k = 0;
    double f = 0.0;
    double kkt = 0.0;
    double du = std::numeric_limits<double>::quiet_NaN();  ///< ||U_k - U_prev||_F / sqrt(n)
    double wall_ms = 0.0;
};

struct SolveReport {
    Matrix u;       ///< n x l, orthonormal columns
    Matrix lambda;  ///< l x l symmetric multiplier
    double objective = 0.0;     ///< of the scaled problem
    double kkt_residual = 0.0;  ///< of the scaled problem
    double scale = 1.0;         ///< s = ||G||_F; f_original = s * f, R_original = s * R
    std::vector<Checkpoint> history;
    Termination termination = Termination::k_max;
    std::size_t lanczos_steps = 0;
    std::string solver = "lanczos";
};

struct NormalizedProblem {
    QmpoProblem problem;
    double scale = 1.0;
};

/// Divides H and G by s = ||G||_F. Everything downstream reports scaled
/// quantities; s is carried for unscaling.
inline NormalizedProblem normalize(const QmpoProblem& problem) {
    const double s = frobenius_norm(problem.g);
    if (s == 0.0)
        throw DegenerateProblemError(
            "normalize: G = 0; solve the eigenvalue problem for H directly instead");
    NormalizedProblem out{{problem.h.scaled(1.0 / s), problem.g, problem.name}, s};
    out.problem.g *= 1.0 / s;
    return out;
}

/// (f_candidate - f_best) / |f_best|, the relative objective difference.
inline double rel_obj_diff(double f_candidate, double f_best) {
    if (f_best == 0.0)
        throw std::invalid_argument("rel_obj_diff: undefined for f_best = 0");
    return (f_candidate - f_best) / std::abs(f_best);
}

/// || H U + U Lambda + G ||_F evaluated literally.
inline double direct_kkt(const QmpoProblem& problem, const Matrix& u, const Matrix& lambda) {
    if (u.rows() != problem.h.dim() || u.cols() != problem.g.cols())
        throw std::invalid_argument("direct_kkt: U shape mismatch");
    if (lambda.rows() != u.cols() || lambda.cols() != u.cols())
        throw std::invalid_argument("direct_kkt: Lambda shape mismatch");
    Matrix r = problem.h.apply(u);
    r += matmul(u, lambda);
    r += problem.g;
    return frobenius_norm(r);
}

/// KKT residual from reduced quantities only:
/// sqrt(||T P + P Lambda + G_k||_F^2 + ||N_k P(last l rows)||_F^2).
/// After termination the boundary term vanishes.
inline double cheap_kkt(const BlockLanczosState& state, const Matrix& p, const Matrix& lambda,
                        const Matrix& g_k) {
    const std::size_t ell = state.block_size();
    Matrix r = matmul(assemble_T(state).dense, p);
    r += matmul(p, lambda);
    r += g_k;
    double acc = frobenius_norm(r);
    acc *= acc;
    if (state.has_boundary()) {
        const Matrix tail = matmul(state.n_block(state.steps() - 1),
                                   rows_slice(p, (state.steps() - 1) * ell, ell));
        const double t = frobenius_norm(tail);
        acc += t * t;
    }
    return std::sqrt(acc);
}

/// U_k = V_k P.
inline Matrix lift(const BlockLanczosState& state, const Matrix& p) { return state.lift(p); }

/// Joint stopping rule over the last two checkpoints:
/// |f_k - f_{k+1}|/(|f_k|+1) <= eps_f, ||U_k - U_{k+1}||_F/sqrt(n) <= eps_U,
/// ||R_k||_F <= eps_g. The first checkpoint can never stop (no differences).
inline bool stopping(const std::vector<Checkpoint>& history, const SolverConfig& cfg) {
    if (history.size() < 2) return false;
    const Checkpoint& prev = history[history.size() - 2];
    const Checkpoint& last = history.back();
    const double f_rel = std::abs(prev.f - last.f) / (std::abs(prev.f) + 1.0);
    return f_rel <= cfg.eps_f && last.du <= cfg.eps_u && last.kkt <= cfg.eps_g;
}

namespace detail {

inline StiefelPoint warm_start(const Matrix& p_prev, std::size_t m, const Matrix& g_k) {
    const std::size_t l = g_k.cols();
    if (p_prev.empty()) {
        Matrix init = g_k;
        init *= -1.0;
        return {thin_qr(init).q};
    }
    Matrix p0(m, l);
    for (std::size_t i = 0; i < p_prev.rows(); ++i)
        for (std::size_t j = 0; j < l; ++j) p0(i, j) = p_prev(i, j);
    return {p0};
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t k) {
    std::uint64_t x = base + 0x9e3779b97f4a7c15ull * (k + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    return x;
}

}  // namespace detail

/// Observer invoked at every checkpoint; used by the verification layer to
/// capture per-step traces without re-running the process.
struct CheckpointView {
    const BlockLanczosState& state;
    const Matrix& p;
    const Matrix& lambda;
    const Matrix& u;
    double f;
    double kkt;
};
using CheckpointObserver = std::function<void(const CheckpointView&)>;

/// Algorithm: grow the block Krylov basis, solve the reduced problem every
/// solve_every steps (warm-started from the previous solution padded with
/// zero rows), stop per the joint criterion or on invariant-subspace
/// termination, and lift the last reduced solution.
inline SolveReport solve(const QmpoProblem& problem, const SolverConfig& cfg = {},
                         const CheckpointObserver& observer = {}) {
    cfg.validate();
    if (problem.g.rows() != problem.h.dim())
        throw std::invalid_argument("solve: G row count mismatch");
    if (problem.g.cols() < 1 || problem.g.cols() >= problem.h.dim())
        throw std::invalid_argument("solve: need n > l >= 1");

    const auto t0 = std::chrono::steady_clock::now();
    const NormalizedProblem np = normalize(problem);
    const std::size_t n = np.problem.h.dim();
    const std::size_t ell = np.problem.g.cols();
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    BlockLanczosState state = lanczos_init(np.problem.h, np.problem.g);

    SolveReport report;
    report.scale = np.scale;
    Matrix p_prev, u_prev;
    Matrix lambda_last;

    for (;;) {
        const std::size_t k = state.steps();
        const bool budget_hit = k >= cfg.k_max || state.basis_dim() + ell > cfg.m_max ||
                                report.history.size() + 1 >= cfg.checkpoint_max;
        const bool forced = !state.can_extend() || budget_hit;

        if (forced || k % cfg.solve_every == 0) {
            const BlockTridiagonal t = assemble_T(state);
            const Matrix g_k = state.reduced_g();
            ReducedProblem reduced{t.dense, g_k};
            RtrConfig rtr_cfg = cfg.rtr;
            rtr_cfg.seed = detail::mix_seed(cfg.seed, k);
            const StiefelPoint p0 = detail::warm_start(p_prev, state.basis_dim(), g_k);
            const RtrResult sol = rtr_solve(reduced, p0, rtr_cfg);

            const Matrix u = state.lift(sol.p.p);
            Checkpoint cp;
            cp.k = k;
            cp.f = sol.objective;
            cp.kkt = cheap_kkt(state, sol.p.p, sol.lambda, g_k);
            if (!u_prev.empty()) cp.du = frobenius_norm(u - u_prev) / sqrt_n;
            cp.wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
            report.history.push_back(cp);

            if (observer) observer(CheckpointView{state, sol.p.p, sol.lambda, u, cp.f, cp.kkt});

            p_prev = sol.p.p;
            u_prev = u;
            lambda_last = sol.lambda;
            report.u = u;
            report.lambda = sol.lambda;
            report.objective = sol.objective;
            report.kkt_residual = cp.kkt;
            report.lanczos_steps = k;

            if (state.terminated()) {
                report.termination = Termination::lanczos_terminated;
                break;
            }
            if (stopping(report.history, cfg)) {
                report.termination = Termination::f_and_U_and_g_converged;
                break;
            }
            if (forced) {
                report.termination = Termination::k_max;
                break;
            }
        }
        lanczos_extend(state, np.problem.h);
    }
    return report;
}

}  // namespace qmpo
