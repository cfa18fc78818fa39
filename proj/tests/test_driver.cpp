#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "qmpo/baselines.hpp"
#include "qmpo/driver.hpp"
#include "qmpo/problems.hpp"
#include "qmpo/report_io.hpp"
#include "qmpo/verification.hpp"
#include "test_helpers.hpp"

using namespace qmpo;

namespace {

double objective_on(const QmpoProblem& prob, const Matrix& u) {
    return inner(u, prob.h.apply(u)) + 2.0 * inner(u, prob.g);
}

}  // namespace

TEST_CASE("normalize") {
    Rng rng(30);

    SECTION("unit-norm G is unchanged") {
        QmpoProblem p{SymmetricOperator::identity(6), Matrix(6, 1), ""};
        p.g(0, 0) = 1.0;
        const NormalizedProblem np = normalize(p);
        REQUIRE(np.scale == 1.0);
        test::require_close(np.problem.g, p.g, 0.0);
    }

    SECTION("orthonormal block scaled by 2 with l = 4 gives s = 4") {
        Matrix g = random_orthonormal(12, 4, rng);
        g *= 2.0;
        QmpoProblem p{SymmetricOperator::identity(12), g, ""};
        REQUIRE(normalize(p).scale == Catch::Approx(4.0).margin(1e-13));
    }

    SECTION("G = 0 is degenerate") {
        QmpoProblem p{SymmetricOperator::identity(5), Matrix(5, 2), ""};
        REQUIRE_THROWS_AS(normalize(p), DegenerateProblemError);
    }

    SECTION("scaled objective unscales exactly to the original objective") {
        const QmpoProblem p = gen_synthetic(50, 3, 0.2, 77);
        const SolveReport rep = solve(p);
        const double f_orig = objective_on(p, rep.u);
        REQUIRE(rep.objective * rep.scale ==
                Catch::Approx(f_orig).epsilon(1e-10).margin(1e-10));
    }
}

TEST_CASE("rel_obj_diff") {
    REQUIRE(rel_obj_diff(-10.0, -10.0) == 0.0);
    REQUIRE(rel_obj_diff(-9.9, -10.0) == Catch::Approx(0.01));
    REQUIRE(rel_obj_diff(-10.1, -10.0) < 0.0);
    REQUIRE_THROWS_AS(rel_obj_diff(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("direct and cheap KKT") {
    Rng rng(31);

    SECTION("constructed KKT pair evaluates to zero") {
        const std::size_t n = 25, l = 3;
        const Matrix h = random_symmetric(n, rng);
        const Matrix u = random_orthonormal(n, l, rng);
        const Matrix lam = random_symmetric(l, rng);
        Matrix g = matmul(h, u);
        g += matmul(u, lam);
        g *= -1.0;
        QmpoProblem p{SymmetricOperator::dense(h), g, ""};
        REQUIRE(direct_kkt(p, u, lam) <= 1e-12 * (1.0 + frobenius_norm(g)));
    }

    SECTION("zero operator and multiplier leave the norm of G") {
        const std::size_t n = 10, l = 2;
        const Matrix g = gaussian_matrix(n, l, rng);
        QmpoProblem p{SymmetricOperator::dense(Matrix(n, n)), g, ""};
        REQUIRE(direct_kkt(p, random_orthonormal(n, l, rng), Matrix(l, l)) ==
                Catch::Approx(frobenius_norm(g)));
    }

    SECTION("dimension mismatch") {
        QmpoProblem p{SymmetricOperator::identity(5), gaussian_matrix(5, 2, rng), ""};
        REQUIRE_THROWS_AS(direct_kkt(p, Matrix(4, 2), Matrix(2, 2)), std::invalid_argument);
    }

    SECTION("cheap equals direct for arbitrary feasible P and symmetric Lambda") {
        const QmpoProblem prob = gen_synthetic(300, 3, 0.05, 78);
        BlockLanczosState s = lanczos_init(prob.h, prob.g);
        while (s.steps() < 6 && s.can_extend()) lanczos_extend(s, prob.h);
        const Matrix g_k = s.reduced_g();
        for (int t = 0; t < 20; ++t) {
            const Matrix p = random_orthonormal(s.basis_dim(), 3, rng);
            const Matrix lam = random_symmetric(3, rng);
            const double cheap = cheap_kkt(s, p, lam, g_k);
            const double direct = direct_kkt(prob, s.lift(p), lam);
            REQUIRE(std::abs(cheap - direct) <= 1e-10 * direct);
        }
    }
}

TEST_CASE("stopping rule") {
    SolverConfig cfg;  // paper defaults

    SECTION("all three quantities at zero stop") {
        std::vector<Checkpoint> h{{5, -1.0, 0.0, 0.0, 0.0}, {10, -1.0, 0.0, 0.0, 0.0}};
        REQUIRE(stopping(h, cfg));
    }

    SECTION("KKT term failing at the paper threshold keeps going") {
        std::vector<Checkpoint> h{{5, -1.0, 3e-5, 0.0, 0.0},
                                  {10, -1.0 - 1e-11, 2e-5, 1e-7, 0.0}};
        REQUIRE_FALSE(stopping(h, cfg));  // 2e-5 > eps_g = 1e-5
        h.back().kkt = 9e-6;
        REQUIRE(stopping(h, cfg));
    }

    SECTION("a single checkpoint never stops") {
        std::vector<Checkpoint> h{{5, -1.0, 0.0, std::numeric_limits<double>::quiet_NaN(), 0.0}};
        REQUIRE_FALSE(stopping(h, cfg));
    }
}

TEST_CASE("solve end to end") {
    Rng rng(32);

    SECTION("H = I terminates at once and hits the balanced closed form") {
        const std::size_t n = 30, l = 3;
        const Matrix g = gaussian_matrix(n, l, rng);
        QmpoProblem p{SymmetricOperator::identity(n), g, ""};
        SolverConfig cfg;
        cfg.rtr.extra_starts = 4;
        const SolveReport rep = solve(p, cfg);
        REQUIRE(rep.termination == Termination::lanczos_terminated);
        REQUIRE(rep.lanczos_steps == 1);

        // on span(V1) with H = I the objective is l - 2 sum sigma_i(G)
        const Spectrum gram = sym_eig(matmul_tn(g, g));
        double sing_sum = 0.0;
        for (double v : gram.values) sing_sum += std::sqrt(std::max(0.0, v));
        const double f_expected = double(l) - 2.0 * sing_sum;
        REQUIRE(rep.objective * rep.scale == Catch::Approx(f_expected).margin(1e-8));

        const SolveReport oracle = dense_rtr_oracle(p, 5);
        REQUIRE(rep.objective * rep.scale ==
                Catch::Approx(oracle.objective * oracle.scale).margin(1e-8));
    }

    SECTION("low-rank gram operator: exact KKT at invariant-subspace termination") {
        const Matrix data = gaussian_matrix(20, 500, rng);
        const Matrix g = gaussian_matrix(500, 3, rng);
        QmpoProblem p{SymmetricOperator::gram(data), g, ""};
        SolverConfig cfg;
        cfg.rtr.extra_starts = 5;
        const SolveReport rep = solve(p, cfg);
        REQUIRE(rep.termination == Termination::lanczos_terminated);
        REQUIRE(rep.kkt_residual <= 1e-10);

        const NormalizedProblem np = normalize(p);
        REQUIRE(direct_kkt(np.problem, rep.u, rep.lambda) <= 1e-9);
        Matrix neg = symmetrize(matmul_tn(rep.u, np.problem.g));
        neg *= -1.0;
        REQUIRE(sym_eig(neg).min() >= -1e-10);
    }

    SECTION("feasibility, monotone checkpoints, objective consistency") {
        const QmpoProblem p = gen_synthetic(400, 5, 0.03, 79);
        const SolveReport rep = solve(p);
        REQUIRE(orthonormality_error(rep.u) <= 1e-8);
        for (std::size_t i = 1; i < rep.history.size(); ++i)
            REQUIRE(rep.history[i].f <=
                    rep.history[i - 1].f + 1e-12 * (1.0 + std::abs(rep.history[i - 1].f)));
        // lifted objective equals the reduced objective (scaled problem)
        const NormalizedProblem np = normalize(p);
        REQUIRE(objective_on(np.problem, rep.u) ==
                Catch::Approx(rep.objective).epsilon(1e-10).margin(1e-10));
    }

    SECTION("k_max budget is a termination reason, not an error") {
        const QmpoProblem p = gen_synthetic(200, 2, 0.05, 80);
        SolverConfig cfg;
        cfg.k_max = 3;
        const SolveReport rep = solve(p, cfg);
        REQUIRE(rep.termination == Termination::k_max);
        REQUIRE(rep.lanczos_steps <= 3);
    }

    SECTION("basis cap m_max also exits through the budget path") {
        const QmpoProblem p = gen_synthetic(200, 3, 0.05, 81);
        SolverConfig cfg;
        cfg.m_max = 12;
        const SolveReport rep = solve(p, cfg);
        REQUIRE(rep.termination == Termination::k_max);
        REQUIRE(rep.lanczos_steps * 3 <= 12);
    }
}

TEST_CASE("lift") {
    Rng rng(33);
    const QmpoProblem prob = gen_synthetic(200, 3, 0.05, 82);
    BlockLanczosState s = lanczos_init(prob.h, prob.g);

    SECTION("k = 1 with P = I recovers the first block") {
        const Matrix u = s.lift(Matrix::identity(3));
        test::require_close(u, s.v_block(0), 0.0);
    }

    SECTION("lifted objective equals the reduced objective") {
        while (s.steps() < 5 && s.can_extend()) lanczos_extend(s, prob.h);
        const Matrix p = random_orthonormal(s.basis_dim(), 3, rng);
        const ReducedProblem reduced{assemble_T(s).dense, s.reduced_g()};
        const double f_reduced = reduced_objective(reduced, p);
        const double f_full = objective_on(prob, s.lift(p));
        REQUIRE(f_full == Catch::Approx(f_reduced).epsilon(1e-10).margin(1e-9));
        REQUIRE(orthonormality_error(s.lift(p)) <= 1e-9);
    }

    SECTION("zero-padded rows select nothing") {
        while (s.steps() < 4 && s.can_extend()) lanczos_extend(s, prob.h);
        const Matrix p_small = random_orthonormal(3, 3, rng);
        const Matrix u_small = lanczos_init(prob.h, prob.g).lift(p_small);
        Matrix p_padded(s.basis_dim(), 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) p_padded(i, j) = p_small(i, j);
        test::require_close(s.lift(p_padded), u_small, 1e-13);
    }

    SECTION("dimension mismatch") {
        REQUIRE_THROWS_AS(s.lift(Matrix(2, 3)), std::invalid_argument);
    }
}

TEST_CASE("report serialization") {
    const QmpoProblem p = gen_synthetic(60, 2, 0.1, 83);
    const SolveReport rep = solve(p);

    SECTION("JSON carries the schema fields") {
        std::ostringstream os;
        write_report_json(os, rep);
        const std::string s = os.str();
        for (const char* key :
             {"\"solver\"", "\"n\"", "\"l\"", "\"scale\"", "\"objective\"", "\"kkt_residual\"",
              "\"termination\"", "\"lanczos_steps\"", "\"U\"", "\"Lambda\"", "\"history\"",
              "\"k\"", "\"f\"", "\"kkt\"", "\"du\"", "\"wall_ms\""})
            REQUIRE(s.find(key) != std::string::npos);
        REQUIRE(s.find("nan") == std::string::npos);  // NaN du serializes as null
    }

    SECTION("history CSV header") {
        std::ostringstream os;
        write_history_csv(os, rep);
        REQUIRE(os.str().rfind("k,f,kkt,du,wall_ms\n", 0) == 0);
    }
}
