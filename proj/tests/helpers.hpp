#pragma once

// Shared fixtures and statistics helpers for the test suite.

#include <cmath>
#include <vector>

#include "adasense/numerics.hpp"
#include "adasense/priors.hpp"
#include "adasense/rng.hpp"

namespace testutil {

using adasense::Index;
using adasense::Mat;
using adasense::RngStream;
using adasense::Vec;

inline Mat random_matrix(RngStream& rng, Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

/// Random symmetric PSD matrix B^T B (full rank almost surely).
inline Mat random_psd(RngStream& rng, Index d) {
    Mat b = random_matrix(rng, d + 2, d);
    return b.transpose() * b;
}

/// Random matrix with orthonormal rows (QR of a Gaussian draw).
inline Mat random_orthonormal_rows(RngStream& rng, Index rows, Index d) {
    Mat g = random_matrix(rng, d, rows);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = Mat(qr.householderQ()).leftCols(rows);
    return q.transpose();
}

/// PSD matrix with a prescribed spectrum in a random orthonormal frame.
inline Mat psd_with_spectrum(RngStream& rng, const Vec& spectrum) {
    const Index d = spectrum.size();
    Mat q = random_orthonormal_rows(rng, d, d).transpose();  // d x d orthogonal
    return q * spectrum.asDiagonal() * q.transpose();
}

inline double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

/// One-sided paired t statistic for H1: mean(a - b) > 0.
inline double paired_t(const std::vector<double>& a,
                       const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double se = stderr_of(d);
    return se > 0.0 ? mean_of(d) / se : 0.0;
}

/// Two-component GMM in 2-D: well-separated means on the first axis.
inline adasense::GmmPrior gmm_2d_fixture() {
    adasense::GmmPrior p;
    p.weights = Vec::Constant(2, 0.5);
    Vec mu(2);
    mu << 3.0, 0.0;
    Mat c(2, 2);
    c << 0.01, 0.0, 0.0, 1.0;
    p.components.push_back({mu, c});
    p.components.push_back({Vec(-mu), c});
    return p;
}

/// Three-dimensional GMM whose second measurement direction depends on the
/// sign of the first coordinate.
inline adasense::GmmPrior gmm_3d_fixture() {
    const double eps = 1e-4;
    adasense::GmmPrior p;
    p.weights = Vec::Constant(2, 0.5);
    Vec mu(3);
    mu << 3.0, 0.0, 0.0;
    Vec d1(3), d2(3);
    d1 << eps, 1.0, eps;
    d2 << eps, eps, 1.0;
    p.components.push_back({mu, Mat(d1.asDiagonal())});
    p.components.push_back({Vec(-mu), Mat(d2.asDiagonal())});
    return p;
}

}  // namespace testutil
