#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qmpo/errors.hpp"
#include "qmpo/matrix.hpp"
#include "qmpo/operator.hpp"

namespace qmpo {

/// Contents of a Matrix Market file. Coordinate files land in `triplets`
/// (symmetric storage already expanded), array files in `dense`.
struct MtxData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool sparse = false;
    Matrix dense;
    std::vector<std::size_t> ti, tj;
    std::vector<double> tv;

    Csr to_csr() const {
        if (!sparse) throw std::invalid_argument("to_csr: array file");
        if (rows != cols) throw std::invalid_argument("to_csr: square matrix required");
        return Csr::from_triplets(rows, ti, tj, tv);
    }

    Matrix to_dense() const {
        if (!sparse) return dense;
        Matrix m(rows, cols);
        for (std::size_t t = 0; t < tv.size(); ++t) m(ti[t], tj[t]) += tv[t];
        return m;
    }
};

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace detail

/// Reads coordinate or array files, real or integer field, general or
/// symmetric. Symmetric coordinate entries are mirrored into both triangles;
/// symmetric array files carry the lower triangle column by column.
inline MtxData read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MtxParseError("cannot open '" + path + "'", 0);

    long line_no = 0;
    std::string line;
    if (!std::getline(in, line)) throw MtxParseError("empty file", 1);
    ++line_no;

    std::istringstream head(line);
    std::string banner, object, format, field, symmetry;
    head >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") throw MtxParseError("missing %%MatrixMarket banner", line_no);
    if (detail::lower(object) != "matrix") throw MtxParseError("unsupported object", line_no);
    format = detail::lower(format);
    field = detail::lower(field);
    symmetry = detail::lower(symmetry);
    if (format != "coordinate" && format != "array")
        throw MtxParseError("unsupported format '" + format + "'", line_no);
    if (field != "real" && field != "integer")
        throw MtxParseError("unsupported field '" + field + "' (real or integer required)",
                            line_no);
    if (symmetry != "general" && symmetry != "symmetric")
        throw MtxParseError("unsupported symmetry '" + symmetry + "'", line_no);
    const bool symmetric = symmetry == "symmetric";

    // skip comments
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line[0] != '%') break;
    }
    if (in.fail() && line.empty()) throw MtxParseError("missing size line", line_no);

    MtxData out;
    std::istringstream size_line(line);
    if (format == "coordinate") {
        long r = 0, c = 0, nnz = 0;
        if (!(size_line >> r >> c >> nnz) || r < 0 || c < 0 || nnz < 0)
            throw MtxParseError("malformed size line", line_no);
        out.rows = static_cast<std::size_t>(r);
        out.cols = static_cast<std::size_t>(c);
        out.sparse = true;
        out.ti.reserve(nnz);
        out.tj.reserve(nnz);
        out.tv.reserve(nnz);
        for (long t = 0; t < nnz; ++t) {
            if (!std::getline(in, line)) throw MtxParseError("unexpected end of file", line_no);
            ++line_no;
            std::istringstream ls(line);
            long i = 0, j = 0;
            double v = 0.0;
            if (!(ls >> i >> j >> v)) throw MtxParseError("malformed entry", line_no);
            if (i < 1 || j < 1 || i > r || j > c)
                throw MtxParseError("index out of bounds", line_no);
            out.ti.push_back(static_cast<std::size_t>(i - 1));
            out.tj.push_back(static_cast<std::size_t>(j - 1));
            out.tv.push_back(v);
            if (symmetric && i != j) {
                out.ti.push_back(static_cast<std::size_t>(j - 1));
                out.tj.push_back(static_cast<std::size_t>(i - 1));
                out.tv.push_back(v);
            }
        }
    } else {
        long r = 0, c = 0;
        if (!(size_line >> r >> c) || r < 0 || c < 0)
            throw MtxParseError("malformed size line", line_no);
        out.rows = static_cast<std::size_t>(r);
        out.cols = static_cast<std::size_t>(c);
        out.dense = Matrix(out.rows, out.cols);
        auto read_value = [&]() -> double {
            double v = 0.0;
            if (!(in >> v)) throw MtxParseError("missing array value", line_no);
            return v;
        };
        if (symmetric) {
            if (r != c) throw MtxParseError("symmetric array must be square", line_no);
            for (long j = 0; j < c; ++j)
                for (long i = j; i < r; ++i) {
                    const double v = read_value();
                    out.dense(i, j) = v;
                    out.dense(j, i) = v;
                }
        } else {
            for (long j = 0; j < c; ++j)
                for (long i = 0; i < r; ++i) out.dense(i, j) = read_value();
        }
    }
    return out;
}

inline void write_matrix_market(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "%%MatrixMarket matrix array real general\n";
    out << m.rows() << " " << m.cols() << "\n";
    char buf[40];
    for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g\n", m(i, j));
            out << buf;
        }
}

inline void write_matrix_market(const std::string& path, const Csr& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.n << " " << m.n << " " << m.nnz() << "\n";
    char buf[64];
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t t = m.row_ptr[i]; t < m.row_ptr[i + 1]; ++t) {
            std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", i + 1, m.col_idx[t] + 1,
                          m.values[t]);
            out << buf;
        }
}

/// One integer label per line, 1-based class ids.
inline std::vector<int> read_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MtxParseError("cannot open '" + path + "'", 0);
    std::vector<int> labels;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        int v = 0;
        if (!(ls >> v)) throw MtxParseError("malformed label", line_no);
        labels.push_back(v);
    }
    return labels;
}

}  // namespace qmpo
