#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qmpo/baselines.hpp"
#include "qmpo/certificate.hpp"
#include "qmpo/driver.hpp"
#include "qmpo/matrix_market.hpp"
#include "qmpo/problems.hpp"
#include "qmpo/report_io.hpp"

namespace qmpo::cli {

namespace detail {

inline int worker_count() {
    if (const char* env = std::getenv("QMPO_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline SymmetricOperator load_operator(const std::string& path) {
    const MtxData data = read_matrix_market(path);
    if (data.rows != data.cols)
        throw std::invalid_argument("H must be square: " + path);
    SymmetricOperator op = data.sparse ? SymmetricOperator::sparse(data.to_csr())
                                       : SymmetricOperator::dense(data.to_dense());
    // spot check the action symmetry so bad inputs fail loudly
    Rng rng(0x5eedull);
    const Matrix x = gaussian_matrix(op.dim(), 2, rng);
    const Matrix y = gaussian_matrix(op.dim(), 2, rng);
    const Matrix lhs = matmul_tn(op.apply(x), y);
    const Matrix rhs = matmul_tn(x, op.apply(y));
    if (frobenius_norm(lhs - rhs) >
        1e-8 * (1.0 + frobenius_norm(x) * frobenius_norm(y)) * (1.0 + op.norm_bound()))
        throw std::invalid_argument("H does not act symmetrically: " + path);
    return op;
}

inline QmpoProblem load_problem(const std::string& h_path, const std::string& gram_path,
                                const std::string& g_path) {
    const Matrix g = read_matrix_market(g_path).to_dense();
    if (!gram_path.empty()) {
        const Matrix a = read_matrix_market(gram_path).to_dense();
        return {SymmetricOperator::gram(a), g, gram_path};
    }
    return {load_operator(h_path), g, h_path};
}

inline LabeledDataset load_dataset(const std::string& data_path, const std::string& label_path) {
    LabeledDataset ds;
    ds.x = read_matrix_market(data_path).to_dense();
    ds.labels = read_labels(label_path);
    int classes = 0;
    for (int lab : ds.labels) classes = std::max(classes, lab);
    ds.num_classes = classes;
    ds.validate();
    return ds;
}

inline Matrix indicator_from_labels(const std::vector<int>& labels, int classes) {
    Matrix y(labels.size(), static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        y(i, static_cast<std::size_t>(labels[i] - 1)) = 1.0;
    return y;
}

struct CompareRow {
    std::string solver;
    double f = 0.0;
    double f_err = 0.0;
    double kkt = 0.0;
    double wall_ms = 0.0;
};

inline void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "solver,f,f_err_rel,kkt,wall_ms\n";
    char buf[256];
    for (const CompareRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", r.solver.c_str(), r.f,
                      r.f_err, r.kkt, r.wall_ms);
        out << buf;
    }
}

}  // namespace detail

/// Entry point behind main(). Exit codes: 0 success (budget exhaustion
/// included), 1 parse/IO/usage errors, 2 degenerate solver input.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Block Krylov solver for quadratic minimization with orthogonality constraints"};
    app.require_subcommand(1);
    // plain --help everywhere; the short -h slot belongs to the H matrix flag
    app.set_help_flag("--help", "print usage");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a problem and write H.mtx / G.mtx");
    gen->set_help_flag("--help", "print usage");
    std::size_t gen_n = 2000, gen_l = 10;
    double gen_density = 0.05, gen_train = 0.30, gen_t = 0.1, gen_gamma = 0.1;
    std::uint64_t gen_seed = 0;
    std::string gen_out = ".", gen_model = "synthetic", gen_data, gen_labels;
    gen->add_option("--n", gen_n, "dimension");
    gen->add_option("--l", gen_l, "number of columns");
    gen->add_option("--density", gen_density, "sparsity of the synthetic generator");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--model", gen_model, "synthetic | olsr | gcsed");
    gen->add_option("--data", gen_data, "dataset matrix (features x samples, Matrix Market)");
    gen->add_option("--labels", gen_labels, "dataset labels (one integer per line)");
    gen->add_option("--train-frac", gen_train, "olsr training fraction");
    gen->add_option("--t", gen_t, "gcsed heat kernel width");
    gen->add_option("--gamma", gen_gamma, "gcsed trade-off");

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "Run the block Lanczos solver");
    solve_cmd->set_help_flag("--help", "print usage");
    std::string so_h, so_gram, so_g, so_report, so_history;
    SolverConfig so_cfg;
    int so_restarts = 0;
    solve_cmd->add_option("--h", so_h, "H in Matrix Market form");
    solve_cmd->add_option("--gram", so_gram, "data matrix A for H = A^T A");
    solve_cmd->add_option("--g", so_g, "G in Matrix Market form")->required();
    solve_cmd->add_option("--eps-f", so_cfg.eps_f, "objective-difference tolerance");
    solve_cmd->add_option("--eps-u", so_cfg.eps_u, "iterate-difference tolerance");
    solve_cmd->add_option("--eps-g", so_cfg.eps_g, "KKT residual tolerance");
    solve_cmd->add_option("--kmax", so_cfg.k_max, "Lanczos step budget");
    solve_cmd->add_option("--every", so_cfg.solve_every, "reduced-solve cadence");
    solve_cmd->add_option("--mmax", so_cfg.m_max, "basis dimension cap");
    solve_cmd->add_option("--restarts", so_restarts, "extra reduced-solve starts");
    solve_cmd->add_option("--seed", so_cfg.seed, "RNG seed");
    solve_cmd->add_option("--report", so_report, "JSON report path");
    solve_cmd->add_option("--history", so_history, "history CSV path");

    // compare
    auto* cmp = app.add_subcommand("compare", "Head-to-head solver comparison");
    cmp->set_help_flag("--help", "print usage");
    std::string cmp_h, cmp_gram, cmp_g, cmp_out, cmp_solvers = "lanczos,gpi";
    int cmp_restarts = 5;
    std::uint64_t cmp_seed = 0;
    cmp->add_option("--h", cmp_h, "H in Matrix Market form");
    cmp->add_option("--gram", cmp_gram, "data matrix A for H = A^T A");
    cmp->add_option("--g", cmp_g, "G in Matrix Market form")->required();
    cmp->add_option("--solvers", cmp_solvers, "comma list from lanczos,gpi,rtr");
    cmp->add_option("--out", cmp_out, "CSV output path")->required();
    cmp->add_option("--restarts", cmp_restarts, "restarts for the rtr oracle");
    cmp->add_option("--seed", cmp_seed, "RNG seed");

    // verify
    auto* ver = app.add_subcommand("verify", "Certify the convergence bounds on a small instance");
    ver->set_help_flag("--help", "print usage");
    std::size_t ver_n = 60, ver_l = 2;
    double ver_density = 0.2;
    std::uint64_t ver_seed = 1;
    int ver_restarts = 5;
    std::string ver_out, ver_csv;
    ver->add_option("--n", ver_n, "dimension (<= 500)");
    ver->add_option("--l", ver_l, "columns");
    ver->add_option("--density", ver_density, "synthetic density");
    ver->add_option("--seed", ver_seed, "RNG seed");
    ver->add_option("--restarts", ver_restarts, "oracle restarts");
    ver->add_option("--out", ver_out, "certificate JSON path");
    ver->add_option("--csv", ver_csv, "certificate CSV path");

    // bench
    auto* bench = app.add_subcommand("bench", "Sweep the synthetic grid");
    bench->set_help_flag("--help", "print usage");
    std::string bench_sizes = "500,1000", bench_seeds = "1", bench_out, bench_solvers = "lanczos";
    std::size_t bench_l = 10;
    double bench_density = 0.05;
    bench->add_option("--sizes", bench_sizes, "comma list of n values");
    bench->add_option("--l", bench_l, "columns");
    bench->add_option("--density", bench_density, "density");
    bench->add_option("--seeds", bench_seeds, "comma list of seeds");
    bench->add_option("--solvers", bench_solvers, "comma list from lanczos,gpi");
    bench->add_option("--out", bench_out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        namespace fs = std::filesystem;
        if (*gen) {
            fs::create_directories(gen_out);
            if (gen_model == "synthetic") {
                const QmpoProblem p = gen_synthetic(gen_n, gen_l, gen_density, gen_seed);
                write_matrix_market((fs::path(gen_out) / "H.mtx").string(), p.h.csr_data());
                write_matrix_market((fs::path(gen_out) / "G.mtx").string(), p.g);
            } else if (gen_model == "olsr") {
                const LabeledDataset ds = detail::load_dataset(gen_data, gen_labels);
                const QmpoProblem p = build_olsr(ds, gen_train, gen_seed);
                write_matrix_market((fs::path(gen_out) / "A.mtx").string(), p.h.gram_data());
                write_matrix_market((fs::path(gen_out) / "G.mtx").string(), p.g);
            } else if (gen_model == "gcsed") {
                const LabeledDataset ds = detail::load_dataset(gen_data, gen_labels);
                const Matrix y = detail::indicator_from_labels(ds.labels, ds.num_classes);
                const QmpoProblem p = build_gcsed(ds, {gen_t, gen_gamma}, y);
                write_matrix_market((fs::path(gen_out) / "H.mtx").string(), p.h.dense_data());
                write_matrix_market((fs::path(gen_out) / "G.mtx").string(), p.g);
            } else {
                std::cerr << "unknown model '" << gen_model << "'\n";
                return 1;
            }
            return 0;
        }

        if (*solve_cmd) {
            if (so_h.empty() == so_gram.empty()) {
                std::cerr << "solve: exactly one of --h / --gram is required\n";
                return 1;
            }
            const QmpoProblem problem = detail::load_problem(so_h, so_gram, so_g);
            so_cfg.rtr.extra_starts = so_restarts;
            const SolveReport report = solve(problem, so_cfg);
            if (!so_report.empty()) write_report_json(so_report, report);
            if (!so_history.empty()) write_history_csv(so_history, report);
            std::cout << "termination: " << to_string(report.termination)
                      << "  k: " << report.lanczos_steps << "  f: " << report.objective
                      << "  kkt: " << report.kkt_residual << "\n";
            return 0;
        }

        if (*cmp) {
            if (cmp_h.empty() == cmp_gram.empty()) {
                std::cerr << "compare: exactly one of --h / --gram is required\n";
                return 1;
            }
            const QmpoProblem problem = detail::load_problem(cmp_h, cmp_gram, cmp_g);
            std::vector<detail::CompareRow> rows;
            for (const std::string& name : detail::split_list(cmp_solvers)) {
                detail::CompareRow row;
                row.solver = name;
                const auto t0 = std::chrono::steady_clock::now();
                SolveReport rep;
                if (name == "lanczos") {
                    SolverConfig c;
                    c.seed = cmp_seed;
                    rep = solve(problem, c);
                } else if (name == "gpi") {
                    BaselineConfig c;
                    c.seed = cmp_seed;
                    rep = gpi_solve(problem, c);
                } else if (name == "rtr") {
                    rep = dense_rtr_oracle(problem, cmp_restarts);
                } else {
                    std::cerr << "unknown solver '" << name << "'\n";
                    return 1;
                }
                row.wall_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
                row.f = rep.objective * rep.scale;
                row.kkt = rep.kkt_residual;
                rows.push_back(row);
            }
            double f_best = rows.front().f;
            for (const auto& r : rows) f_best = std::min(f_best, r.f);
            for (auto& r : rows) r.f_err = f_best == 0.0 ? 0.0 : rel_obj_diff(r.f, f_best);
            detail::write_compare_csv(cmp_out, rows);
            for (const auto& r : rows)
                std::cout << r.solver << "  f_err: " << r.f_err << "  kkt: " << r.kkt
                          << "  wall_ms: " << r.wall_ms << "\n";
            return 0;
        }

        if (*ver) {
            const QmpoProblem problem = gen_synthetic(ver_n, ver_l, ver_density, ver_seed);
            CertifyConfig ccfg;
            ccfg.oracle_restarts = ver_restarts;
            ccfg.solver.rtr.extra_starts = ver_restarts;
            const ConvergenceCertificate cert = certify(problem, ccfg);
            if (!ver_out.empty()) write_certificate_json(ver_out, cert);
            if (!ver_csv.empty()) write_certificate_csv(ver_csv, cert);
            for (const BoundCheck& c : cert.checks) {
                std::cout << c.name << ": " << to_string(c.verdict);
                if (!c.reason.empty()) std::cout << " (" << c.reason << ")";
                std::cout << "\n";
            }
            std::cout << (cert.all_pass_or_skip() ? "certificate: ok" : "certificate: FAILED")
                      << "\n";
            return 0;
        }

        if (*bench) {
            struct Job {
                std::size_t n;
                std::uint64_t seed;
            };
            std::vector<Job> jobs;
            for (const std::string& s : detail::split_list(bench_sizes))
                for (const std::string& seed : detail::split_list(bench_seeds))
                    jobs.push_back({static_cast<std::size_t>(std::stoull(s)),
                                    static_cast<std::uint64_t>(std::stoull(seed))});
            const std::vector<std::string> solvers = detail::split_list(bench_solvers);

            struct Row {
                Job job;
                std::string solver;
                double f, kkt, wall_ms;
                std::string termination;
                std::size_t steps;
            };
            std::vector<std::vector<Row>> results(jobs.size());
            std::atomic<std::size_t> next{0};
            auto work = [&] {
                for (;;) {
                    const std::size_t idx = next.fetch_add(1);
                    if (idx >= jobs.size()) return;
                    const Job& job = jobs[idx];
                    const QmpoProblem problem =
                        gen_synthetic(job.n, bench_l, bench_density, job.seed);
                    for (const std::string& name : solvers) {
                        const auto t0 = std::chrono::steady_clock::now();
                        SolveReport rep;
                        if (name == "lanczos")
                            rep = solve(problem);
                        else if (name == "gpi")
                            rep = gpi_solve(problem);
                        else
                            throw std::invalid_argument("bench: unknown solver '" + name + "'");
                        const double ms = std::chrono::duration<double, std::milli>(
                                              std::chrono::steady_clock::now() - t0)
                                              .count();
                        results[idx].push_back({job, name, rep.objective * rep.scale,
                                                rep.kkt_residual, ms,
                                                to_string(rep.termination), rep.lanczos_steps});
                    }
                }
            };
            const int workers = std::min<int>(detail::worker_count(), int(jobs.size()));
            std::vector<std::thread> pool;
            for (int w = 1; w < workers; ++w) pool.emplace_back(work);
            work();
            for (auto& t : pool) t.join();

            std::ofstream out(bench_out);
            if (!out) throw std::runtime_error("cannot write '" + bench_out + "'");
            out << "n,l,density,seed,solver,f,f_err_rel,kkt,wall_ms,termination,steps\n";
            char buf[320];
            for (const auto& rows : results) {
                double f_best = rows.front().f;
                for (const auto& r : rows) f_best = std::min(f_best, r.f);
                for (const auto& r : rows) {
                    const double ferr = f_best == 0.0 ? 0.0 : rel_obj_diff(r.f, f_best);
                    std::snprintf(buf, sizeof buf,
                                  "%zu,%zu,%.17g,%llu,%s,%.17g,%.17g,%.17g,%.17g,%s,%zu\n",
                                  r.job.n, bench_l, bench_density,
                                  static_cast<unsigned long long>(r.job.seed), r.solver.c_str(),
                                  r.f, ferr, r.kkt, r.wall_ms, r.termination.c_str(), r.steps);
                    out << buf;
                }
            }
            return 0;
        }
        return 0;
    } catch (const DegenerateProblemError& e) {
        std::cerr << "degenerate problem: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace qmpo::cli
