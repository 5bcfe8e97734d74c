#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adasense {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Mat& a) { return a.allFinite(); }

inline void require_finite(const Mat& a, const char* what) {
    if (!a.allFinite())
        throw InvalidInputError(std::string(what) + ": non-finite entries");
}

/// Eigen-decomposition of a symmetric PSD matrix, eigenvalues descending,
/// eigenvectors sign-normalized so the largest-magnitude entry of each
/// column is positive (ties broken by earliest index).
struct EigPairs {
    Vec values;   // descending
    Mat vectors;  // orthonormal columns, vectors.col(i) <-> values(i)
};

namespace detail {

// Flip column signs so the entry of largest magnitude is positive.
// Earliest index wins on magnitude ties.
inline void sign_normalize_columns(Mat& v) {
    for (Index j = 0; j < v.cols(); ++j) {
        Index best = 0;
        double mag = std::abs(v(0, j));
        for (Index i = 1; i < v.rows(); ++i) {
            if (std::abs(v(i, j)) > mag) {
                mag = std::abs(v(i, j));
                best = i;
            }
        }
        if (v(best, j) < 0.0) v.col(j) = -v.col(j);
    }
}

inline void sign_normalize_rows(Mat& v) {
    Mat t = v.transpose();
    sign_normalize_columns(t);
    v = t.transpose();
}

}  // namespace detail

inline EigPairs sym_eig(const Mat& a) {
    if (a.rows() != a.cols())
        throw DimensionError("sym_eig: matrix must be square");
    require_finite(a, "sym_eig");
    // Symmetrize; empirical covariances accumulate roundoff asymmetry.
    Mat s = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    if (es.info() != Eigen::Success)
        throw InvalidInputError("sym_eig: eigensolver failed to converge");
    // Eigen returns ascending order.
    EigPairs out;
    const Index n = s.rows();
    out.values = es.eigenvalues().reverse();
    out.vectors = es.eigenvectors().rowwise().reverse().eval();
    (void)n;
    detail::sign_normalize_columns(out.vectors);
    return out;
}

/// Top r right singular vectors of a, returned as r x cols with orthonormal
/// rows, same sign convention as sym_eig.
inline Mat top_right_singular(const Mat& a, Index r) {
    if (r > std::min(a.rows(), a.cols()))
        throw DimensionError("top_right_singular: r exceeds min(rows, cols)");
    require_finite(a, "top_right_singular");
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinV);
    Mat rows = svd.matrixV().leftCols(r).transpose();
    detail::sign_normalize_rows(rows);
    return rows;
}

/// Moore-Penrose pseudo-inverse with relative rank cutoff 1e-12 * sigma_max.
inline Mat pinv(const Mat& a) {
    require_finite(a, "pinv");
    if (a.rows() == 0 || a.cols() == 0) return Mat::Zero(a.cols(), a.rows());
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    const double cutoff = 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
    Vec inv = Vec::Zero(sv.size());
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Orthogonal projector onto the row space of a: pinv(a) * a.
inline Mat row_space_projector(const Mat& a) {
    return pinv(a) * a;
}

inline bool rows_orthonormal(const Mat& a, double tol = 1e-8) {
    if (a.rows() == 0) return true;
    Mat g = a * a.transpose();
    return (g - Mat::Identity(a.rows(), a.rows())).cwiseAbs().maxCoeff() < tol;
}

/// Largest principal angle (radians) between the row spaces of a and b.
inline double max_principal_angle(const Mat& a, const Mat& b) {
    if (a.rows() == 0 && b.rows() == 0) return 0.0;
    Eigen::HouseholderQR<Mat> qa(a.transpose()), qb(b.transpose());
    Mat ua = Mat(qa.householderQ()).leftCols(a.rows());
    Mat ub = Mat(qb.householderQ()).leftCols(b.rows());
    Eigen::JacobiSVD<Mat> svd(ua.transpose() * ub);
    double c = svd.singularValues().minCoeff();
    c = std::min(1.0, std::max(-1.0, c));
    return std::acos(c);
}

}  // namespace adasense
