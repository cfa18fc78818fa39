#include <catch2/catch_amalgamated.hpp>

#include "qmpo/lanczos.hpp"
#include "qmpo/problems.hpp"
#include "qmpo/random.hpp"
#include "test_helpers.hpp"

using namespace qmpo;

namespace {

/// Independent scalar Lanczos recurrence (l = 1), the oracle for the
/// hand-run diagonal case.
struct ScalarLanczosOracle {
    std::vector<double> alpha, beta;

    ScalarLanczosOracle(const Matrix& h, Matrix v) {
        v *= 1.0 / frobenius_norm(v);
        Matrix v_prev(v.rows(), 1);
        double b_prev = 0.0;
        for (;;) {
            Matrix w = matmul(h, v);
            const double a = inner(v, w);
            alpha.push_back(a);
            Matrix av = v;
            av *= a;
            w -= av;
            Matrix bv = v_prev;
            bv *= b_prev;
            w -= bv;
            const double b = frobenius_norm(w);
            if (b <= 1e-12) break;
            beta.push_back(b);
            v_prev = v;
            w *= 1.0 / b;
            v = w;
            b_prev = b;
        }
    }
};

BlockLanczosState run_to_termination(const SymmetricOperator& h, const Matrix& g,
                                     std::size_t k_cap = 1000) {
    BlockLanczosState s = lanczos_init(h, g);
    while (s.can_extend() && s.steps() < k_cap) lanczos_extend(s, h);
    return s;
}

}  // namespace

TEST_CASE("lanczos_init") {
    Rng rng(10);

    SECTION("orthonormal G gives V1 = G and K = I under the sign convention") {
        const Matrix g = random_orthonormal(12, 3, rng);
        const BlockLanczosState s = lanczos_init(SymmetricOperator::identity(12), g);
        test::require_close(s.v_block(0), g, 1e-13);
        test::require_close(s.k_factor(), Matrix::identity(3), 1e-13);
        REQUIRE(s.steps() == 1);
    }

    SECTION("H = I gives M1 = I and immediate termination") {
        const Matrix g = gaussian_matrix(10, 2, rng);
        const BlockLanczosState s = lanczos_init(SymmetricOperator::identity(10), g);
        test::require_close(s.m_block(0), Matrix::identity(2), 1e-13);
        REQUIRE(s.terminated());
        REQUIRE(s.steps() == 1);
    }

    SECTION("coordinate start on a diagonal operator") {
        Matrix h(4, 4);
        for (std::size_t i = 0; i < 4; ++i) h(i, i) = double(i + 1);
        Matrix e1(4, 1);
        e1(0, 0) = 1.0;
        const BlockLanczosState s = lanczos_init(SymmetricOperator::dense(h), e1);
        test::require_close(s.v_block(0), e1, 1e-14);
        REQUIRE(s.m_block(0)(0, 0) == Catch::Approx(1.0).margin(1e-14));
        REQUIRE(s.terminated());  // e1 is an eigenvector
    }

    SECTION("G = 0 is a degenerate problem") {
        REQUIRE_THROWS_AS(lanczos_init(SymmetricOperator::identity(5), Matrix(5, 1)),
                          DegenerateProblemError);
    }
}

TEST_CASE("lanczos_extend on the hand-run diagonal case") {
    Matrix h(4, 4);
    for (std::size_t i = 0; i < 4; ++i) h(i, i) = double(i + 1);
    Matrix v1(4, 1);
    for (std::size_t i = 0; i < 4; ++i) v1(i, 0) = 0.5;
    const SymmetricOperator op = SymmetricOperator::dense(h);

    BlockLanczosState s = lanczos_init(op, v1);
    int extensions = 0;
    while (s.can_extend()) {
        lanczos_extend(s, op);
        ++extensions;
    }
    REQUIRE(extensions == 3);
    REQUIRE(s.steps() == 4);
    REQUIRE(s.terminated());

    const ScalarLanczosOracle oracle(h, v1);
    const BlockTridiagonal t = assemble_T(s);
    REQUIRE(oracle.alpha.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE(t.dense(i, i) == Catch::Approx(oracle.alpha[i]).margin(1e-10));
    for (std::size_t i = 0; i + 1 < 4; ++i)
        REQUIRE(t.dense(i + 1, i) == Catch::Approx(oracle.beta[i]).margin(1e-10));

    SECTION("extending past termination is a contract violation") {
        REQUIRE_THROWS_AS(lanczos_extend(s, op), ContractViolation);
    }
}

TEST_CASE("assemble_T") {
    Rng rng(11);

    SECTION("k = 1 is the single diagonal block") {
        const Matrix g = gaussian_matrix(9, 2, rng);
        const Matrix h = random_symmetric(9, rng);
        const BlockLanczosState s = lanczos_init(SymmetricOperator::dense(h), g);
        const BlockTridiagonal t = assemble_T(s);
        REQUIRE(t.order == 2);
        test::require_close(t.dense, s.m_block(0), 0.0);
    }

    SECTION("k = 2 block structure") {
        const Matrix g = gaussian_matrix(9, 2, rng);
        const Matrix h = random_symmetric(9, rng);
        const SymmetricOperator op = SymmetricOperator::dense(h);
        BlockLanczosState s = lanczos_init(op, g);
        lanczos_extend(s, op);
        REQUIRE(s.steps() == 2);
        const BlockTridiagonal t = assemble_T(s);
        REQUIRE(t.order == 4);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) {
                REQUIRE(t.dense(a, b) == s.m_block(0)(a, b));
                REQUIRE(t.dense(2 + a, 2 + b) == s.m_block(1)(a, b));
                REQUIRE(t.dense(2 + a, b) == s.n_block(0)(a, b));
                REQUIRE(t.dense(b, 2 + a) == s.n_block(0)(a, b));
            }
        REQUIRE(asymmetry(t.dense) == 0.0);
    }

    SECTION("T equals the explicit projection on a random sparse operator") {
        const QmpoProblem prob = gen_synthetic(200, 4, 0.05, 42);
        BlockLanczosState s = lanczos_init(prob.h, prob.g);
        for (int i = 0; i < 7 && s.can_extend(); ++i) lanczos_extend(s, prob.h);
        const Matrix basis = s.basis();
        const Matrix projected = matmul_tn(basis, prob.h.apply(basis));
        const BlockTridiagonal t = assemble_T(s);
        REQUIRE(frobenius_norm(t.dense - projected) <= 1e-8);
    }
}

TEST_CASE("relation residual") {
    SECTION("exact on a small case") {
        Rng rng(12);
        const Matrix h = random_symmetric(15, rng);
        const Matrix g = gaussian_matrix(15, 2, rng);
        const SymmetricOperator op = SymmetricOperator::dense(h);
        BlockLanczosState s = lanczos_init(op, g);
        lanczos_extend(s, op);
        lanczos_extend(s, op);
        REQUIRE(relation_residual(s, op) <= 1e-12 * (1.0 + frobenius_norm(h)));
    }

    SECTION("random sparse instance, n = 500, l = 5, k = 10") {
        const QmpoProblem prob = gen_synthetic(500, 5, 0.05, 43);
        BlockLanczosState s = lanczos_init(prob.h, prob.g);
        while (s.steps() < 10 && s.can_extend()) lanczos_extend(s, prob.h);
        const double tnorm = frobenius_norm(assemble_T(s).dense);
        REQUIRE(relation_residual(s, prob.h) <= 1e-8 * tnorm);
    }

    SECTION("after termination the boundary term vanishes") {
        Rng rng(13);
        const Matrix a = gaussian_matrix(6, 40, rng);  // rank 6 gram on R^40
        const SymmetricOperator op = SymmetricOperator::gram(a);
        const Matrix g = gaussian_matrix(40, 2, rng);
        const BlockLanczosState s = run_to_termination(op, g);
        REQUIRE(s.terminated());
        REQUIRE(relation_residual(s, op) <= 1e-8 * (1.0 + op.norm_bound()));
    }
}

TEST_CASE("orthonormality drift and subspace nesting") {
    const QmpoProblem prob = gen_synthetic(800, 3, 0.02, 44);
    BlockLanczosState s = lanczos_init(prob.h, prob.g);
    Matrix prev_basis = s.basis();
    while (s.steps() < 30 && s.can_extend()) {
        lanczos_extend(s, prob.h);
        const Matrix basis = s.basis();
        REQUIRE(orthonormality_error(basis) <= 1e-10);
        // nesting: the previous basis lies in the span of the current one
        Matrix res = prev_basis;
        matmul_sub(res, basis, matmul_tn(basis, prev_basis));
        REQUIRE(frobenius_norm(res) <= 1e-10);
        prev_basis = basis;
    }
}

TEST_CASE("termination bounds") {
    Rng rng(14);

    SECTION("d distinct eigenvalues terminate within d steps") {
        const std::size_t n = 30;
        Matrix h(n, n);
        for (std::size_t i = 0; i < n; ++i) h(i, i) = double(i % 3);  // 3 distinct values
        const Matrix g = gaussian_matrix(n, 2, rng);
        const BlockLanczosState s = run_to_termination(SymmetricOperator::dense(h), g);
        REQUIRE(s.terminated());
        REQUIRE(s.steps() <= 3);
    }

    SECTION("gram rank bound, block size dividing the rank") {
        const std::size_t r = 9, n = 120;
        const Matrix a = gaussian_matrix(r, n, rng);
        const Matrix g = gaussian_matrix(n, 3, rng);
        const BlockLanczosState s = run_to_termination(SymmetricOperator::gram(a), g);
        REQUIRE(s.terminated());
        REQUIRE(s.basis_dim() <= r + 3);
    }

    SECTION("gram rank bound with deflation padding") {
        const std::size_t r = 10, n = 150;  // 10 not divisible by l = 3
        const Matrix a = gaussian_matrix(r, n, rng);
        const Matrix g = gaussian_matrix(n, 3, rng);
        const SymmetricOperator op = SymmetricOperator::gram(a);
        const BlockLanczosState s = run_to_termination(op, g);
        REQUIRE(s.terminated());
        REQUIRE(s.basis_dim() <= r + 2 * 3);
        REQUIRE(orthonormality_error(s.basis()) <= 1e-10);
        REQUIRE(relation_residual(s, op) <= 1e-8 * (1.0 + op.norm_bound()));
        // upper triangular N blocks with nonnegative diagonal survive deflation
        for (std::size_t j = 0; j + 1 < s.steps(); ++j) {
            const Matrix& nb = s.n_block(j);
            for (std::size_t i = 0; i < 3; ++i) {
                REQUIRE(nb(i, i) >= 0.0);
                for (std::size_t c = 0; c < i; ++c) REQUIRE(nb(i, c) == 0.0);
            }
        }
    }
}
