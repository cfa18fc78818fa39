#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qmpo/baselines.hpp"
#include "qmpo/driver.hpp"
#include "qmpo/verification.hpp"

namespace qmpo {

enum class Verdict { pass, fail, skipped };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::skipped: return "skipped";
    }
    return "unknown";
}

struct BoundCheck {
    std::string name;
    Verdict verdict = Verdict::skipped;
    std::string reason;        ///< filled for skipped/fail
    double worst_slack = 0.0;  ///< max over points of measured - bound (pass => <= 0 up to tol)
};

/// Everything measured and bounded at one solver checkpoint.
struct CertificatePoint {
    std::size_t k = 0;
    double eps = 0.0;
    double eps_bound_displayed = 0.0;  ///< J-sum exponent (k - 1)
    double eps_bound_proof = 0.0;      ///< J-sum exponent floor((k+1)/2)
    double eps_bound_derived = 0.0;    ///< degree-correct re-derivation
    double proj_norm2 = 0.0;           ///< ||(I - V V^T) U*||_2 hypothesis value
    double f_gap = 0.0;
    double f_gap_bound = 0.0;
    double u_dist = 0.0;
    double u_dist_bound = 0.0;     ///< sqrt(2(mu1+gamma1)/delta_lb) eps
    double u_dist_bound_pd = 0.0;  ///< sqrt(2 cond) eps, positive definite case
    double kkt = 0.0;
    double lambda_diff = 0.0;
    double kkt_bound_from_u = 0.0;    ///< ||H*||_2 ||U_k - U*||
    double kkt_bound_from_eps = 0.0;  ///< sqrt(2) ||H*||_2 eps
};

struct ConvergenceCertificate {
    std::size_t n = 0, l = 0;
    double scale = 1.0;
    double f_star = 0.0;
    Matrix u_star, lambda_star;
    std::vector<double> mu, gamma;
    bool assumption_ok = false;  ///< Kronecker sum nonsingular within margin
    double margin = 0.0;
    SpectrumClassification cls;  ///< valid iff assumption_ok
    double delta_lb = 0.0;       ///< mu_n + gamma_l
    double hstar_norm2 = 0.0;
    double hstar_cond = 0.0;  ///< valid iff hstar_pd
    bool hstar_pd = false;
    double oracle_necessary = 0.0;  ///< lambda_min(sym(-U*^T G)) at the oracle point
    std::vector<CertificatePoint> points;
    std::vector<BoundCheck> checks;
    SolveReport solver_report;

    bool all_pass_or_skip() const {
        for (const BoundCheck& c : checks)
            if (c.verdict == Verdict::fail) return false;
        return true;
    }
};

struct CertifyConfig {
    int oracle_restarts = 5;
    SolverConfig solver = [] {
        SolverConfig c;
        c.solve_every = 1;  // checkpoint every step for a dense trace
        c.rtr.extra_starts = 5;
        return c;
    }();
};

namespace detail {

struct TracePoint {
    std::size_t k;
    Matrix basis;
    Matrix u;
    Matrix lambda;
    double f;
};

inline void finish_check(ConvergenceCertificate& cert, const std::string& name, bool any_point,
                         bool hypothesis_ever, const std::string& skip_reason, double worst_slack,
                         bool violated) {
    BoundCheck c;
    c.name = name;
    c.worst_slack = worst_slack;
    if (!any_point || !hypothesis_ever) {
        c.verdict = Verdict::skipped;
        c.reason = skip_reason;
    } else if (violated) {
        c.verdict = Verdict::fail;
        c.reason = "measured value exceeded the bound";
    } else {
        c.verdict = Verdict::pass;
    }
    cert.checks.push_back(std::move(c));
}

}  // namespace detail

/// Runs the solver with a per-checkpoint trace, computes the oracle solution
/// (secular for l = 1, dense RTR with restarts otherwise), and evaluates
/// every convergence envelope against the measured series. Hypotheses are
/// themselves verified numerically; an unverifiable hypothesis yields a
/// skipped verdict with its reason, never a silent pass.
inline ConvergenceCertificate certify(const QmpoProblem& problem, const CertifyConfig& cfg = {}) {
    const std::size_t n = problem.h.dim();
    const std::size_t l = problem.g.cols();
    if (n > 500) throw std::invalid_argument("certify: n > 500 (dense oracle guard)");

    ConvergenceCertificate cert;
    cert.n = n;
    cert.l = l;

    std::vector<detail::TracePoint> trace;
    SolverConfig scfg = cfg.solver;
    cert.solver_report = solve(problem, scfg, [&](const CheckpointView& view) {
        trace.push_back({view.state.steps(), view.state.basis(), view.u, view.lambda, view.f});
    });
    cert.scale = cert.solver_report.scale;

    // scaled problem, consistent with every reported solver quantity
    const NormalizedProblem np = normalize(problem);
    const Matrix h_dense = np.problem.h.densify();

    if (l == 1) {
        const TrsSolution trs = trs_secular_oracle(h_dense, np.problem.g);
        cert.u_star = trs.x;
        cert.lambda_star = Matrix(1, 1, {trs.lambda});
        cert.f_star = trs.objective;
    } else {
        const SolveReport oracle =
            dense_rtr_oracle(problem, cfg.oracle_restarts, cert.solver_report.u);
        cert.u_star = oracle.u;
        cert.lambda_star = oracle.lambda;
        cert.f_star = oracle.objective;
    }

    cert.mu = sym_eig(h_dense).values;
    cert.gamma = sym_eig(cert.lambda_star).values;
    const KroneckerSum ks{cert.mu, cert.gamma};
    cert.margin = ks.nonsingularity_margin();
    cert.delta_lb = delta_lower_bound(ks);
    cert.hstar_norm2 = ks.norm2();
    cert.hstar_pd = ks.positive_definite();
    if (cert.hstar_pd) cert.hstar_cond = ks.cond2();
    try {
        cert.cls = classify_spectrum(cert.mu, cert.gamma);
        cert.assumption_ok = true;
    } catch (const AssumptionError&) {
        cert.assumption_ok = false;
    }

    Matrix neg_check = symmetrize(matmul_tn(cert.u_star, np.problem.g));
    neg_check *= -1.0;
    cert.oracle_necessary = sym_eig(neg_check).min();

    const double mu1 = cert.mu.front();
    const double gamma1 = cert.gamma.front();

    for (const detail::TracePoint& tp : trace) {
        CertificatePoint pt;
        pt.k = tp.k;
        pt.eps = subspace_distance(tp.basis, cert.u_star);
        pt.proj_norm2 = subspace_distance_2norm(tp.basis, cert.u_star);
        if (cert.assumption_ok) {
            const EpsBound eb = bound_eps(cert.cls, tp.k);
            pt.eps_bound_displayed = eb.displayed;
            pt.eps_bound_proof = eb.proof;
            pt.eps_bound_derived = eb.derived;
        }
        pt.f_gap = tp.f - cert.f_star;
        pt.f_gap_bound = bound_f_gap(mu1, gamma1, pt.eps);
        pt.u_dist = frobenius_norm(tp.u - cert.u_star);
        if (cert.delta_lb > 0.0) pt.u_dist_bound = bound_u_distance(mu1, gamma1, cert.delta_lb, pt.eps);
        if (cert.hstar_pd) pt.u_dist_bound_pd = bound_u_distance_pd(ks, pt.eps);
        pt.kkt = direct_kkt(np.problem, tp.u, tp.lambda);
        pt.lambda_diff = frobenius_norm(cert.lambda_star - tp.lambda);
        pt.kkt_bound_from_u = bound_kkt_from_u(cert.hstar_norm2, pt.u_dist);
        pt.kkt_bound_from_eps = bound_kkt_from_eps(cert.hstar_norm2, pt.eps);
        cert.points.push_back(pt);
    }

    // verdicts; a point enters a check only when the theorem's hypotheses
    // verify numerically at that point
    const auto dominated = [](double measured, double bound) {
        return measured <= bound * (1.0 + 1e-9) + 1e-12;
    };

    {
        bool ever = cert.assumption_ok, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (cert.assumption_ok)
            for (const CertificatePoint& pt : cert.points) {
                const double bound = std::max(pt.eps_bound_displayed, pt.eps_bound_proof);
                worst = std::max(worst, pt.eps - bound);
                if (!dominated(pt.eps, bound)) bad = true;
            }
        detail::finish_check(cert, "thm3.4_eps", !cert.points.empty(), ever,
                             "Kronecker sum numerically singular", worst, bad);
    }
    {
        bool ever = cert.assumption_ok, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (cert.assumption_ok)
            for (const CertificatePoint& pt : cert.points) {
                worst = std::max(worst, pt.eps - pt.eps_bound_derived);
                if (!dominated(pt.eps, pt.eps_bound_derived)) bad = true;
            }
        detail::finish_check(cert, "thm3.4_eps_derived", !cert.points.empty(), ever,
                             "Kronecker sum numerically singular", worst, bad);
    }
    {
        bool ever = false, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        for (const CertificatePoint& pt : cert.points) {
            if (pt.proj_norm2 >= 1.0) continue;
            ever = true;
            worst = std::max(worst, pt.f_gap - pt.f_gap_bound);
            if (!dominated(pt.f_gap, pt.f_gap_bound)) bad = true;
        }
        detail::finish_check(cert, "thm3.6_f_gap", !cert.points.empty(), ever,
                             "2-norm projection hypothesis never below 1", worst, bad);
    }
    {
        bool ever = false, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (cert.delta_lb > 0.0)
            for (const CertificatePoint& pt : cert.points) {
                if (pt.proj_norm2 >= 1.0) continue;
                ever = true;
                worst = std::max(worst, pt.u_dist - pt.u_dist_bound);
                if (!dominated(pt.u_dist, pt.u_dist_bound)) bad = true;
            }
        detail::finish_check(cert, "thm3.7_u_dist", !cert.points.empty(), ever,
                             "delta lower bound mu_n + gamma_l not positive", worst, bad);
    }
    {
        bool ever = false, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (cert.hstar_pd)
            for (const CertificatePoint& pt : cert.points) {
                if (pt.proj_norm2 >= 1.0) continue;
                ever = true;
                worst = std::max(worst, pt.u_dist - pt.u_dist_bound_pd);
                if (!dominated(pt.u_dist, pt.u_dist_bound_pd)) bad = true;
            }
        detail::finish_check(cert, "thm3.7_u_dist_pd", !cert.points.empty(), ever,
                             "Kronecker sum not positive definite", worst, bad);
    }
    {
        bool ever = cert.assumption_ok, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (cert.assumption_ok)
            for (const CertificatePoint& pt : cert.points) {
                const double m = std::max(pt.kkt, pt.lambda_diff);
                worst = std::max(worst, m - pt.kkt_bound_from_u);
                if (!dominated(m, pt.kkt_bound_from_u)) bad = true;
            }
        detail::finish_check(cert, "thm3.9_i_kkt", !cert.points.empty(), ever,
                             "Kronecker sum numerically singular", worst, bad);
    }
    {
        bool ever = false, bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (cert.hstar_pd)
            for (const CertificatePoint& pt : cert.points) {
                if (pt.proj_norm2 >= 1.0) continue;
                ever = true;
                const double m = std::max(pt.kkt, pt.lambda_diff);
                worst = std::max(worst, m - pt.kkt_bound_from_eps);
                if (!dominated(m, pt.kkt_bound_from_eps)) bad = true;
            }
        detail::finish_check(cert, "thm3.9_ii_kkt", !cert.points.empty(), ever,
                             "Kronecker sum not positive definite", worst, bad);
    }
    {
        // oracle sanity: the solver must never beat the oracle materially,
        // otherwise U* was not a global solution and the envelopes above are
        // not meaningful
        bool bad = false;
        double worst = -std::numeric_limits<double>::infinity();
        for (const CertificatePoint& pt : cert.points) {
            worst = std::max(worst, -pt.f_gap);
            if (pt.f_gap < -1e-6 * (1.0 + std::abs(cert.f_star))) bad = true;
        }
        detail::finish_check(cert, "oracle_gap_nonnegative", !cert.points.empty(), true, "",
                             worst, bad);
    }

    return cert;
}

}  // namespace qmpo
