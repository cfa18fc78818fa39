#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "qmpo/certificate.hpp"
#include "qmpo/driver.hpp"

namespace qmpo {
namespace detail {

/// IEEE-754 doubles printed with 17 significant digits (lossless round
/// trip); non-finite values become JSON null.
inline std::string json_num(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void json_matrix(std::ostream& os, const Matrix& m) {
    os << "[";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        os << (i ? ",[" : "[");
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) os << ",";
            os << json_num(m(i, j));
        }
        os << "]";
    }
    os << "]";
}

template <typename Series>
inline void json_series(std::ostream& os, const Series& vals) {
    os << "[";
    bool first = true;
    for (double v : vals) {
        if (!first) os << ",";
        os << json_num(v);
        first = false;
    }
    os << "]";
}

}  // namespace detail

inline void write_report_json(std::ostream& os, const SolveReport& r) {
    os << "{\n";
    os << "  \"solver\": \"" << r.solver << "\",\n";
    os << "  \"n\": " << r.u.rows() << ",\n";
    os << "  \"l\": " << r.u.cols() << ",\n";
    os << "  \"scale\": " << detail::json_num(r.scale) << ",\n";
    os << "  \"objective\": " << detail::json_num(r.objective) << ",\n";
    os << "  \"kkt_residual\": " << detail::json_num(r.kkt_residual) << ",\n";
    os << "  \"termination\": \"" << to_string(r.termination) << "\",\n";
    os << "  \"lanczos_steps\": " << r.lanczos_steps << ",\n";
    os << "  \"U\": ";
    detail::json_matrix(os, r.u);
    os << ",\n  \"Lambda\": ";
    detail::json_matrix(os, r.lambda);
    os << ",\n  \"history\": [";
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        const Checkpoint& c = r.history[i];
        os << (i ? "," : "") << "\n    {\"k\": " << c.k << ", \"f\": " << detail::json_num(c.f)
           << ", \"kkt\": " << detail::json_num(c.kkt) << ", \"du\": " << detail::json_num(c.du)
           << ", \"wall_ms\": " << detail::json_num(c.wall_ms) << "}";
    }
    os << "\n  ]\n}\n";
}

inline void write_report_json(const std::string& path, const SolveReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_report_json(out, r);
}

inline void write_history_csv(std::ostream& os, const SolveReport& r) {
    os << "k,f,kkt,du,wall_ms\n";
    char buf[160];
    for (const Checkpoint& c : r.history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", c.k, c.f, c.kkt, c.du,
                      c.wall_ms);
        os << buf;
    }
}

inline void write_history_csv(const std::string& path, const SolveReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_history_csv(out, r);
}

inline void write_certificate_json(std::ostream& os, const ConvergenceCertificate& c) {
    using detail::json_num;
    os << "{\n";
    os << "  \"n\": " << c.n << ",\n  \"l\": " << c.l << ",\n";
    os << "  \"scale\": " << json_num(c.scale) << ",\n";
    os << "  \"f_star\": " << json_num(c.f_star) << ",\n";
    os << "  \"assumption_ok\": " << (c.assumption_ok ? "true" : "false") << ",\n";
    os << "  \"margin\": " << json_num(c.margin) << ",\n";
    os << "  \"delta_lower_bound\": " << json_num(c.delta_lb) << ",\n";
    os << "  \"hstar_norm2\": " << json_num(c.hstar_norm2) << ",\n";
    os << "  \"hstar_positive_definite\": " << (c.hstar_pd ? "true" : "false") << ",\n";
    os << "  \"hstar_cond\": " << json_num(c.hstar_pd ? c.hstar_cond : 0.0) << ",\n";
    os << "  \"oracle_necessary_lambda_min\": " << json_num(c.oracle_necessary) << ",\n";
    os << "  \"mu\": ";
    detail::json_series(os, c.mu);
    os << ",\n  \"gamma\": ";
    detail::json_series(os, c.gamma);
    os << ",\n  \"U_star\": ";
    detail::json_matrix(os, c.u_star);
    os << ",\n  \"Lambda_star\": ";
    detail::json_matrix(os, c.lambda_star);
    if (c.assumption_ok) {
        os << ",\n  \"classification\": {\"I\": [";
        for (std::size_t i = 0; i < c.cls.set_I.size(); ++i)
            os << (i ? "," : "") << c.cls.set_I[i] + 1;
        os << "], \"J\": [";
        for (std::size_t i = 0; i < c.cls.set_J.size(); ++i)
            os << (i ? "," : "") << c.cls.set_J[i] + 1;
        os << "], \"kappa\": ";
        detail::json_series(os, c.cls.kappa);
        os << ", \"phi\": ";
        detail::json_series(os, c.cls.phi);
        os << ", \"a\": ";
        detail::json_series(os, c.cls.a);
        os << ", \"b\": ";
        detail::json_series(os, c.cls.b);
        os << "}";
    }
    os << ",\n  \"points\": [";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const CertificatePoint& p = c.points[i];
        os << (i ? "," : "") << "\n    {\"k\": " << p.k << ", \"eps\": " << json_num(p.eps)
           << ", \"eps_bound_displayed\": " << json_num(p.eps_bound_displayed)
           << ", \"eps_bound_proof\": " << json_num(p.eps_bound_proof)
           << ", \"eps_bound_derived\": " << json_num(p.eps_bound_derived)
           << ", \"proj_norm2\": " << json_num(p.proj_norm2)
           << ", \"f_gap\": " << json_num(p.f_gap)
           << ", \"f_gap_bound\": " << json_num(p.f_gap_bound)
           << ", \"u_dist\": " << json_num(p.u_dist)
           << ", \"u_dist_bound\": " << json_num(p.u_dist_bound)
           << ", \"u_dist_bound_pd\": " << json_num(p.u_dist_bound_pd)
           << ", \"kkt\": " << json_num(p.kkt)
           << ", \"lambda_diff\": " << json_num(p.lambda_diff)
           << ", \"kkt_bound_from_u\": " << json_num(p.kkt_bound_from_u)
           << ", \"kkt_bound_from_eps\": " << json_num(p.kkt_bound_from_eps) << "}";
    }
    os << "\n  ],\n  \"checks\": [";
    for (std::size_t i = 0; i < c.checks.size(); ++i) {
        const BoundCheck& ch = c.checks[i];
        os << (i ? "," : "") << "\n    {\"name\": \"" << ch.name << "\", \"verdict\": \""
           << to_string(ch.verdict) << "\", \"reason\": \"" << ch.reason
           << "\", \"worst_slack\": " << json_num(ch.worst_slack) << "}";
    }
    os << "\n  ]\n}\n";
}

inline void write_certificate_json(const std::string& path, const ConvergenceCertificate& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_certificate_json(out, c);
}

inline void write_certificate_csv(std::ostream& os, const ConvergenceCertificate& c) {
    os << "k,eps,eps_bound_displayed,eps_bound_proof,eps_bound_derived,proj_norm2,f_gap,f_gap_bound,"
          "u_dist,u_dist_bound,u_dist_bound_pd,kkt,lambda_diff,kkt_bound_from_u,"
          "kkt_bound_from_eps\n";
    char buf[512];
    for (const CertificatePoint& p : c.points) {
        std::snprintf(buf, sizeof buf,
                      "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                      "%.17g,%.17g,%.17g\n",
                      p.k, p.eps, p.eps_bound_displayed, p.eps_bound_proof, p.eps_bound_derived,
                      p.proj_norm2, p.f_gap,
                      p.f_gap_bound, p.u_dist, p.u_dist_bound, p.u_dist_bound_pd, p.kkt,
                      p.lambda_diff, p.kkt_bound_from_u, p.kkt_bound_from_eps);
        os << buf;
    }
}

inline void write_certificate_csv(const std::string& path, const ConvergenceCertificate& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_certificate_csv(out, c);
}

}  // namespace qmpo
