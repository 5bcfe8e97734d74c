#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "adasense/numerics.hpp"

namespace adasense {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest round-trippable decimal representation (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Whitespace-separated text matrix: first line "rows cols", then row-major
/// values, one row per line.
inline void write_matrix(std::ostream& os, const Mat& m) {
    os << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) os << ' ';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

inline void write_matrix_file(const std::filesystem::path& path, const Mat& m) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_matrix(os, m);
}

inline void write_vector_file(const std::filesystem::path& path, const Vec& v) {
    write_matrix_file(path, Mat(v.transpose()));
}

inline Mat read_matrix(std::istream& is) {
    Index rows = 0, cols = 0;
    if (!(is >> rows >> cols) || rows < 0 || cols < 0)
        throw IoError("matrix text: bad header");
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            if (!(is >> m(i, j))) throw IoError("matrix text: truncated data");
    return m;
}

inline Mat read_matrix_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return read_matrix(is);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace adasense
