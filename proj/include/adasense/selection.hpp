#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "adasense/numerics.hpp"
#include "adasense/priors.hpp"
#include "adasense/samplers.hpp"

namespace adasense {

struct ExhaustedCandidatesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CandidateFamily { Pixel, Fourier, Hadamard, Radon, Explicit };

/// Enumerable family of feasible sensing row-blocks. Member order is fixed;
/// all tie-breaking is by lowest member index.
struct CandidateSet {
    CandidateFamily family = CandidateFamily::Explicit;
    Index block_size = 1;      // rows per member
    std::vector<Mat> members;  // each block_size x D, rows unit-norm
    Index dim = 0;

    std::size_t size() const { return members.size(); }
};

// ---- family constructors ----------------------------------------------------

inline CandidateSet pixel_candidates(Index d) {
    CandidateSet cs;
    cs.family = CandidateFamily::Pixel;
    cs.dim = d;
    for (Index i = 0; i < d; ++i) {
        Mat row = Mat::Zero(1, d);
        row(0, i) = 1.0;
        cs.members.push_back(row);
    }
    return cs;
}

namespace detail {

/// Orthonormal DCT-II matrix, row k = frequency k.
inline Mat dct_matrix(Index d) {
    Mat c(d, d);
    for (Index k = 0; k < d; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / d) : std::sqrt(2.0 / d);
        for (Index n = 0; n < d; ++n)
            c(k, n) = scale * std::cos(M_PI * (n + 0.5) * k / d);
    }
    return c;
}

}  // namespace detail

/// 1-D frequency rows (real DCT basis), one row per candidate.
inline CandidateSet fourier_candidates(Index d) {
    CandidateSet cs;
    cs.family = CandidateFamily::Fourier;
    cs.dim = d;
    Mat c = detail::dct_matrix(d);
    for (Index k = 0; k < d; ++k) cs.members.push_back(c.row(k));
    return cs;
}

/// Column-frequency blocks over a width x width image: candidate k holds the
/// width separable-DCT rows with horizontal frequency k.
inline CandidateSet fourier_column_candidates(Index width) {
    CandidateSet cs;
    cs.family = CandidateFamily::Fourier;
    cs.block_size = width;
    cs.dim = width * width;
    Mat c = detail::dct_matrix(width);
    for (Index kx = 0; kx < width; ++kx) {
        Mat block(width, cs.dim);
        for (Index ky = 0; ky < width; ++ky)
            for (Index py = 0; py < width; ++py)
                for (Index px = 0; px < width; ++px)
                    block(ky, py * width + px) = c(ky, py) * c(kx, px);
        cs.members.push_back(block);
    }
    return cs;
}

/// Rows of the normalized Walsh-Hadamard matrix; d must be a power of two.
inline CandidateSet hadamard_candidates(Index d) {
    if (d < 1 || (d & (d - 1)) != 0)
        throw InvalidInputError("hadamard_candidates: dim must be a power of 2");
    Mat h(1, 1);
    h(0, 0) = 1.0;
    while (h.rows() < d) {
        Mat next(2 * h.rows(), 2 * h.cols());
        next << h, h, h, -h;
        h = next;
    }
    h /= std::sqrt(static_cast<double>(d));
    CandidateSet cs;
    cs.family = CandidateFamily::Hadamard;
    cs.dim = d;
    for (Index i = 0; i < d; ++i) cs.members.push_back(h.row(i));
    return cs;
}

/// Discrete parallel-beam line integrals over a width x width pixel grid.
/// One member per evenly spaced angle; its rows are the unit-normalized
/// offset bins of that angle (a sinogram column).
inline CandidateSet radon_candidates(Index width, Index n_angles) {
    CandidateSet cs;
    cs.family = CandidateFamily::Radon;
    cs.dim = width * width;
    cs.block_size = width;
    for (Index a = 0; a < n_angles; ++a) {
        const double theta = M_PI * static_cast<double>(a) / n_angles;
        const double ct = std::cos(theta), st = std::sin(theta);
        Mat block = Mat::Zero(width, cs.dim);
        const double half = 0.5 * (width - 1);
        for (Index py = 0; py < width; ++py) {
            for (Index px = 0; px < width; ++px) {
                // Signed distance of the pixel center from the center line.
                const double proj = (px - half) * ct + (py - half) * st;
                Index bin = static_cast<Index>(std::floor(proj + half + 0.5));
                bin = std::max<Index>(0, std::min(width - 1, bin));
                block(bin, py * width + px) = 1.0;
            }
        }
        // Unit-normalize each nonzero row.
        for (Index i = 0; i < block.rows(); ++i) {
            const double nrm = block.row(i).norm();
            if (nrm > 0.0) block.row(i) /= nrm;
        }
        cs.members.push_back(block);
    }
    return cs;
}

inline CandidateSet explicit_candidates(std::vector<Mat> members) {
    CandidateSet cs;
    cs.family = CandidateFamily::Explicit;
    if (!members.empty()) {
        cs.dim = members.front().cols();
        cs.block_size = members.front().rows();
        for (const auto& m : members)
            if (m.cols() != cs.dim)
                throw DimensionError("explicit_candidates: inconsistent dims");
    }
    cs.members = std::move(members);
    return cs;
}

inline CandidateSet candidate_set_from_json(const nlohmann::json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "pixel") return pixel_candidates(j.at("dim").get<Index>());
    if (family == "fourier") {
        if (j.value("block", "") == std::string("column"))
            return fourier_column_candidates(j.at("image_width").get<Index>());
        return fourier_candidates(j.at("dim").get<Index>());
    }
    if (family == "hadamard") return hadamard_candidates(j.at("dim").get<Index>());
    if (family == "radon")
        return radon_candidates(j.at("image_width").get<Index>(),
                                j.value("angles", Index{16}));
    if (family == "explicit") {
        std::vector<Mat> members;
        for (const auto& rj : j.at("rows")) members.push_back(mat_from_json(rj));
        return explicit_candidates(std::move(members));
    }
    throw InvalidInputError("candidate set JSON: unknown family '" + family + "'");
}

// ---- covariance source ------------------------------------------------------

/// Either a centered posterior sample batch or an exact posterior covariance.
struct CovarianceSource {
    std::optional<PosteriorBatch> batch;  // centered
    std::optional<Mat> exact_cov;

    static CovarianceSource empirical(PosteriorBatch centered_batch) {
        if (!centered_batch.centered)
            throw InvalidInputError("CovarianceSource: batch must be centered");
        CovarianceSource s;
        s.batch = std::move(centered_batch);
        return s;
    }
    static CovarianceSource exact(Mat cov) {
        CovarianceSource s;
        s.exact_cov = std::move(cov);
        return s;
    }
};

// ---- selection criteria -----------------------------------------------------

struct SelectionResult {
    Mat rows;
    bool degenerate = false;
};

/// Top-r directions of remaining posterior uncertainty: eigenvectors of the
/// exact covariance, or right singular vectors of the centered sample matrix
/// (the empirical covariance is never materialized).
inline SelectionResult select_unconstrained(const CovarianceSource& cov,
                                            Index r) {
    SelectionResult res;
    if (cov.exact_cov) {
        const Mat& c = *cov.exact_cov;
        if (r > c.cols()) throw DimensionError("select_unconstrained: r > D");
        EigPairs ep = sym_eig(c);
        res.rows = ep.vectors.leftCols(r).transpose();
        if (ep.values(0) <= 1e-14) {
            res.rows = Mat::Identity(r, c.cols());
            res.degenerate = true;
        }
        return res;
    }
    if (!cov.batch) throw InvalidInputError("select_unconstrained: empty source");
    const Mat& x = cov.batch->samples;
    if (r > x.cols()) throw DimensionError("select_unconstrained: r > D");
    if (x.cwiseAbs().maxCoeff() <= 1e-14) {
        // Collapsed posterior: fall back to canonical rows, flagged.
        res.rows = Mat::Identity(r, x.cols());
        res.degenerate = true;
        return res;
    }
    Eigen::JacobiSVD<Mat> svd(x, Eigen::ComputeFullV);
    res.rows = svd.matrixV().leftCols(r).transpose();
    detail::sign_normalize_rows(res.rows);
    return res;
}

/// Exact constrained criterion tr{H S^2 H^T (H S H^T + eps I)^-1}.
/// Returns NaN when the Gram matrix stays singular after jitter.
inline double score_constrained_exact(const Mat& candidate, const Mat& cov) {
    const Index r = candidate.rows();
    Mat gram = candidate * cov * candidate.transpose();
    const double eps = r > 0 ? 1e-9 * gram.trace() / static_cast<double>(r) : 0.0;
    gram.diagonal().array() += eps;
    Eigen::FullPivLU<Mat> lu(gram);
    if (!lu.isInvertible()) return std::numeric_limits<double>::quiet_NaN();
    Mat num = candidate * cov * cov * candidate.transpose();
    return (num * lu.inverse()).trace();
}

/// Empirical variant built from H * samples Gram matrices only (no D x D
/// covariance is formed).
inline double score_constrained_exact_empirical(const Mat& candidate,
                                                const PosteriorBatch& batch) {
    if (!batch.centered)
        throw InvalidInputError("score_constrained_exact_empirical: batch not centered");
    const double s = static_cast<double>(batch.size());
    Mat hx = batch.samples * candidate.transpose();  // s x r
    Mat gram = hx.transpose() * hx / s;              // H S H^T
    Mat inner = batch.samples * batch.samples.transpose() / s;  // s x s
    Mat num = hx.transpose() * inner * hx / s;       // H S^2 H^T
    const Index r = candidate.rows();
    const double eps = r > 0 ? 1e-9 * gram.trace() / static_cast<double>(r) : 0.0;
    gram.diagonal().array() += eps;
    Eigen::FullPivLU<Mat> lu(gram);
    if (!lu.isInvertible()) return std::numeric_limits<double>::quiet_NaN();
    return (num * lu.inverse()).trace();
}

/// Pseudo-inverse heuristic sum_i xbar_i^T Hd H xbar_i over a centered batch.
inline double score_constrained_heuristic(const Mat& candidate,
                                          const PosteriorBatch& batch) {
    if (!batch.centered)
        throw InvalidInputError("score_constrained_heuristic: batch not centered");
    if (rows_orthonormal(candidate)) {
        // Hd = H^T, so the score is sum ||H xbar_i||^2.
        return (batch.samples * candidate.transpose()).squaredNorm();
    }
    Mat proj = pinv(candidate) * candidate;
    Mat px = batch.samples * proj.transpose();
    return (batch.samples.array() * px.array()).sum();
}

enum class ConstrainedCriterion { Exact, Heuristic };

struct ConstrainedSelection {
    Mat rows;                        // stacked top blocks
    std::vector<std::size_t> picked; // member indices, best first
    std::vector<double> scores;      // score per scanned member (NaN = skipped)
};

/// Exhaustively score all non-excluded members and stack the top r_blocks.
/// Ties break toward the lowest member index.
inline ConstrainedSelection select_constrained(
    const CandidateSet& candidates, const CovarianceSource& source,
    ConstrainedCriterion criterion, Index r_blocks,
    const std::vector<bool>& excluded = {}) {
    if (candidates.members.empty())
        throw ExhaustedCandidatesError("select_constrained: no candidates");

    ConstrainedSelection out;
    out.scores.assign(candidates.size(),
                      std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> avail;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i < excluded.size() && excluded[i]) continue;
        avail.push_back(i);
        const Mat& cand = candidates.members[i];
        double sc;
        if (criterion == ConstrainedCriterion::Exact) {
            sc = source.exact_cov
                     ? score_constrained_exact(cand, *source.exact_cov)
                     : score_constrained_exact_empirical(cand, *source.batch);
        } else {
            if (!source.batch)
                throw InvalidInputError(
                    "select_constrained: heuristic criterion needs a sample batch");
            sc = score_constrained_heuristic(cand, *source.batch);
        }
        out.scores[i] = sc;
    }
    if (static_cast<Index>(avail.size()) < r_blocks)
        throw ExhaustedCandidatesError(
            "select_constrained: fewer remaining candidates than requested blocks");

    // Stable top-k by (score desc, index asc); NaN scores sort last.
    std::vector<std::size_t> order = avail;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         const double sa = out.scores[a], sb = out.scores[b];
                         const bool fa = std::isfinite(sa), fb = std::isfinite(sb);
                         if (fa != fb) return fa;
                         return sa > sb;
                     });
    Index rows_total = 0;
    for (Index b = 0; b < r_blocks; ++b) {
        out.picked.push_back(order[b]);
        rows_total += candidates.members[order[b]].rows();
    }
    out.rows.resize(rows_total, candidates.dim);
    Index at = 0;
    for (std::size_t idx : out.picked) {
        const Mat& m = candidates.members[idx];
        out.rows.middleRows(at, m.rows()) = m;
        at += m.rows();
    }
    return out;
}

/// Non-adaptive optimum: top-d eigenvectors of the overall prior covariance.
inline Mat offline_pca(const Prior& prior, Index d) {
    Vec mean;
    Mat cov;
    prior_moments(prior, mean, cov);
    if (d > cov.cols()) throw DimensionError("offline_pca: d > D");
    EigPairs ep = sym_eig(cov);
    return ep.vectors.leftCols(d).transpose();
}

/// Reconstructor hook: maps (H, y) to a signal estimate.
using Reconstructor = std::function<Vec(const Mat&, const Vec&)>;

/// Ground-truth-aware upper-bound baseline: picks the candidate whose
/// hypothetical addition minimizes actual reconstruction MSE.
inline std::size_t greedy_oracle(const CandidateSet& candidates,
                                 const Vec& ground_truth, const Mat& h_current,
                                 const Reconstructor& reconstruct,
                                 const std::vector<bool>& excluded = {}) {
    std::optional<std::size_t> best;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i < excluded.size() && excluded[i]) continue;
        const Mat& cand = candidates.members[i];
        Mat h_try(h_current.rows() + cand.rows(), candidates.dim);
        h_try << h_current, cand;
        Vec y_try = h_try * ground_truth;
        Vec est = reconstruct(h_try, y_try);
        const double err = (est - ground_truth).squaredNorm() /
                           static_cast<double>(ground_truth.size());
        if (err < best_err - 1e-15) {
            best_err = err;
            best = i;
        } else if (!best) {
            best_err = err;
            best = i;
        }
    }
    if (!best) throw ExhaustedCandidatesError("greedy_oracle: no candidates left");
    return *best;
}

}  // namespace adasense
