#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qmpo/driver.hpp"
#include "qmpo/matrix_market.hpp"
#include "qmpo/problems.hpp"
#include "test_helpers.hpp"

using namespace qmpo;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qmpo_test_" + name);
}

}  // namespace

TEST_CASE("gen_synthetic") {
    SECTION("deterministic for a fixed seed") {
        const QmpoProblem a = gen_synthetic(100, 3, 0.05, 5);
        const QmpoProblem b = gen_synthetic(100, 3, 0.05, 5);
        REQUIRE(a.h.csr_data().values == b.h.csr_data().values);
        REQUIRE(a.h.csr_data().col_idx == b.h.csr_data().col_idx);
        REQUIRE(frobenius_norm(a.g - b.g) == 0.0);
    }

    SECTION("zero density gives H = 0 and the polar closed form") {
        const QmpoProblem p = gen_synthetic(40, 2, 0.0, 6);
        REQUIRE(p.h.csr_data().nnz() == 0);
        const SolveReport rep = solve(p);
        const Spectrum gram = sym_eig(matmul_tn(p.g, p.g));
        double sing_sum = 0.0;
        for (double v : gram.values) sing_sum += std::sqrt(std::max(0.0, v));
        REQUIRE(rep.objective * rep.scale == Catch::Approx(-2.0 * sing_sum).margin(1e-8));
    }

    SECTION("structure: symmetric sparse with roughly 2 density n^2 entries") {
        const QmpoProblem p = gen_synthetic(200, 4, 0.03, 7);
        const Csr& h = p.h.csr_data();
        const double expected = 2.0 * 0.03 * 200.0 * 200.0;
        REQUIRE(double(h.nnz()) >= 0.8 * expected);
        REQUIRE(double(h.nnz()) <= 1.05 * expected);
        Rng rng(1);
        const Matrix x = gaussian_matrix(200, 2, rng);
        const Matrix y = gaussian_matrix(200, 2, rng);
        REQUIRE(frobenius_norm(matmul_tn(p.h.apply(x), y) - matmul_tn(x, p.h.apply(y))) <=
                1e-10 * frobenius_norm(x) * frobenius_norm(y) * p.h.norm_bound());
    }

    SECTION("parameter validation") {
        REQUIRE_THROWS_AS(gen_synthetic(10, 3, 1.5, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(gen_synthetic(3, 3, 0.5, 0), std::invalid_argument);
    }
}

TEST_CASE("build_olsr") {
    SECTION("two samples, one feature, full split by hand") {
        LabeledDataset ds;
        ds.x = Matrix(1, 2, {1.0, 3.0});
        ds.labels = {1, 2};
        ds.num_classes = 2;
        const QmpoProblem p = build_olsr(ds, 1.0, 0);
        REQUIRE(p.h.kind() == SymmetricOperator::Kind::gram);
        // centered features are (-1, 1), centered indicators are +-1/2
        // G = A~^T B~ = [(-1)(1/2)+(1)(-1/2), (-1)(-1/2)+(1)(1/2)] = [-1, 1]
        REQUIRE(p.g.rows() == 1);
        REQUIRE(p.g.cols() == 2);
        REQUIRE(p.g(0, 0) == Catch::Approx(-1.0));
        REQUIRE(p.g(0, 1) == Catch::Approx(1.0));
        // H = A~^T A~ = (-1)^2 + 1^2 = 2 acting on scalars
        const Matrix one(1, 1, {1.0});
        REQUIRE(p.h.apply(one)(0, 0) == Catch::Approx(2.0));
    }

    SECTION("centering is idempotent") {
        Rng rng(50);
        const Matrix x = gaussian_matrix(9, 4, rng);
        const Matrix once = detail::center_columns_over_samples(x);
        const Matrix twice = detail::center_columns_over_samples(once);
        REQUIRE(frobenius_norm(once - twice) <= 1e-14 * (1.0 + frobenius_norm(once)));
    }

    SECTION("low-rank gram triggers invariant-subspace termination") {
        Rng rng(51);
        LabeledDataset ds;
        const std::size_t features = 500, samples = 20;
        ds.x = gaussian_matrix(features, samples, rng);
        ds.labels.resize(samples);
        for (std::size_t i = 0; i < samples; ++i) ds.labels[i] = 1 + int(i % 3);
        ds.num_classes = 3;
        const QmpoProblem p = build_olsr(ds, 1.0, 3);
        const SolveReport rep = solve(p);
        REQUIRE(rep.termination == Termination::lanczos_terminated);
        REQUIRE(rep.lanczos_steps * 3 <= samples + 2 * 3);
    }

    SECTION("single-class split raises a resample error") {
        LabeledDataset ds;
        ds.x = Matrix(2, 4);
        ds.labels = {1, 1, 1, 2};
        ds.num_classes = 2;
        // a quarter split selects exactly one sample, hence one class
        REQUIRE_THROWS_WITH(build_olsr(ds, 0.25, 0),
                            Catch::Matchers::ContainsSubstring("seed"));
    }
}

TEST_CASE("build_gcsed") {
    SECTION("two identical points by hand") {
        LabeledDataset ds;
        ds.x = Matrix(2, 2);  // identical zero points
        ds.labels = {1, 2};
        ds.num_classes = 2;
        Matrix y(2, 2);
        y(0, 0) = 1.0;
        y(1, 1) = 1.0;
        const QmpoProblem p = build_gcsed(ds, {0.5, 1.0}, y);
        // W is all ones, D = 2I, W_hat is all 1/2, so H = -W_hat
        const Matrix h = p.h.dense_data();
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) REQUIRE(h(i, j) == Catch::Approx(-0.5));
        Matrix w_hat = h;
        w_hat *= -1.0;
        const Spectrum es = sym_eig(w_hat);
        REQUIRE(es.values[0] == Catch::Approx(1.0).margin(1e-13));
        REQUIRE(es.values[1] == Catch::Approx(0.0).margin(1e-13));
    }

    SECTION("C has orthonormal columns through the degree weighting") {
        Rng rng(52);
        LabeledDataset ds;
        ds.x = gaussian_matrix(3, 12, rng);
        ds.labels.resize(12);
        for (std::size_t i = 0; i < 12; ++i) ds.labels[i] = 1 + int(i % 3);
        ds.num_classes = 3;
        Matrix y(12, 3);
        for (std::size_t i = 0; i < 12; ++i) y(i, i % 3) = 1.0;
        const GraphConfig cfg{1.0, 0.7};
        const QmpoProblem p = build_gcsed(ds, cfg, y);
        Matrix c = p.g;
        c *= -1.0 / cfg.gamma;
        REQUIRE(orthonormality_error(c) <= 1e-10);
    }

    SECTION("normalized adjacency spectrum stays below one") {
        Rng rng(53);
        for (int t = 0; t < 5; ++t) {
            LabeledDataset ds;
            ds.x = gaussian_matrix(2, 10, rng);
            ds.labels.assign(10, 1);
            for (std::size_t i = 0; i < 5; ++i) ds.labels[i] = 2;
            ds.num_classes = 2;
            Matrix y(10, 2);
            for (std::size_t i = 0; i < 10; ++i) y(i, ds.labels[i] - 1) = 1.0;
            const QmpoProblem p = build_gcsed(ds, {0.7, 0.1}, y);
            Matrix w_hat = p.h.dense_data();
            w_hat *= -1.0;
            REQUIRE(sym_eig(w_hat).max() <= 1.0 + 1e-10);
        }
    }

    SECTION("indicator validation") {
        LabeledDataset ds;
        ds.x = Matrix(2, 3);
        ds.labels = {1, 1, 2};
        ds.num_classes = 2;
        Matrix bad(3, 2);
        bad(0, 0) = 1.0;  // second row has no 1
        bad(2, 1) = 1.0;
        REQUIRE_THROWS_AS(build_gcsed(ds, {0.5, 0.5}, bad), std::invalid_argument);
    }
}

TEST_CASE("matrix market io") {
    namespace fs = std::filesystem;

    SECTION("1x1 array file") {
        const auto path = temp_file("a11.mtx");
        {
            std::ofstream out(path);
            out << "%%MatrixMarket matrix array real general\n1 1\n3.5\n";
        }
        const MtxData d = read_matrix_market(path.string());
        REQUIRE_FALSE(d.sparse);
        REQUIRE(d.to_dense()(0, 0) == 3.5);
        fs::remove(path);
    }

    SECTION("symmetric coordinate entries are mirrored") {
        const auto path = temp_file("sym.mtx");
        {
            std::ofstream out(path);
            out << "%%MatrixMarket matrix coordinate real symmetric\n"
                   "% comment line\n"
                   "2 2 1\n"
                   "2 1 -4.25\n";
        }
        const MtxData d = read_matrix_market(path.string());
        REQUIRE(d.sparse);
        const Matrix m = d.to_dense();
        REQUIRE(m(1, 0) == -4.25);
        REQUIRE(m(0, 1) == -4.25);
        fs::remove(path);
    }

    SECTION("round trip of a random sparse operator is exact") {
        const QmpoProblem p = gen_synthetic(60, 2, 0.1, 60);
        const auto path = temp_file("h.mtx");
        write_matrix_market(path.string(), p.h.csr_data());
        const Csr back = read_matrix_market(path.string()).to_csr();
        REQUIRE(back.row_ptr == p.h.csr_data().row_ptr);
        REQUIRE(back.col_idx == p.h.csr_data().col_idx);
        REQUIRE(back.values == p.h.csr_data().values);
        fs::remove(path);
    }

    SECTION("dense round trip is exact") {
        Rng rng(61);
        const Matrix g = gaussian_matrix(7, 3, rng);
        const auto path = temp_file("g.mtx");
        write_matrix_market(path.string(), g);
        const Matrix back = read_matrix_market(path.string()).to_dense();
        REQUIRE(frobenius_norm(back - g) == 0.0);
        fs::remove(path);
    }

    SECTION("parse errors carry line numbers") {
        const auto path = temp_file("bad.mtx");
        {
            std::ofstream out(path);
            out << "%%NotMatrixMarket nope\n";
        }
        try {
            read_matrix_market(path.string());
            FAIL("expected MtxParseError");
        } catch (const MtxParseError& e) {
            REQUIRE(e.line() == 1);
        }
        {
            std::ofstream out(path);
            out << "%%MatrixMarket matrix coordinate real general\n3 3 1\n4 1 2.0\n";
        }
        try {
            read_matrix_market(path.string());
            FAIL("expected MtxParseError");
        } catch (const MtxParseError& e) {
            REQUIRE(e.line() == 3);
        }
        {
            std::ofstream out(path);
            out << "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 2.0 0.0\n";
        }
        REQUIRE_THROWS_AS(read_matrix_market(path.string()), MtxParseError);
        fs::remove(path);
    }

    SECTION("label files") {
        const auto path = temp_file("labels.txt");
        {
            std::ofstream out(path);
            out << "1\n2\n\n3\n";
        }
        const std::vector<int> labels = read_labels(path.string());
        REQUIRE(labels == std::vector<int>{1, 2, 3});
        fs::remove(path);
    }
}
