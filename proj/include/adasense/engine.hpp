#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <vector>

#include "adasense/numerics.hpp"
#include "adasense/priors.hpp"
#include "adasense/samplers.hpp"
#include "adasense/selection.hpp"

namespace adasense {

/// Measurement rows accumulated so far, with orthogonality bookkeeping.
/// While every appended block stays orthonormal and orthogonal to the
/// existing rows, the pseudo-inverse is just the transpose and no
/// factorization is ever computed.
struct SensingMatrix {
    Mat rows_matrix;  // k x D
    bool orthonormal = true;
    Mat cached_pinv;  // D x k

    Index row_count() const { return rows_matrix.rows(); }
    Index dim() const { return rows_matrix.cols(); }

    static SensingMatrix empty(Index d) {
        SensingMatrix s;
        s.rows_matrix = Mat(0, d);
        s.cached_pinv = Mat(d, 0);
        return s;
    }
};

enum class SelectionMode {
    UnconstrainedEmpirical,
    UnconstrainedExact,
    ConstrainedExact,
    ConstrainedHeuristic,
    GreedyOracle,
};

inline bool mode_is_constrained(SelectionMode m) {
    return m == SelectionMode::ConstrainedExact ||
           m == SelectionMode::ConstrainedHeuristic ||
           m == SelectionMode::GreedyOracle;
}

inline bool mode_is_exact(SelectionMode m) {
    return m == SelectionMode::UnconstrainedExact ||
           m == SelectionMode::ConstrainedExact;
}

enum class RunStatus { Ok, CollapsedPosterior, ExhaustedCandidates };

struct StepRecord {
    Index step = 0;
    Mat selected_rows;
    std::vector<std::size_t> picked_candidates;  // constrained modes only
    std::vector<double> scores;                  // per-candidate, NaN = skipped
    bool degenerate = false;
    double max_overlap_with_previous = 0.0;
    double wall_time_ms = 0.0;
};

struct AcquisitionConfig {
    Index steps = 1;            // N
    Index rows_per_step = 1;    // r
    std::size_t samples = 2;    // s
};

struct AcquisitionState {
    SensingMatrix sensing;
    Vec measurements;  // grows with the sensing rows
    Index step = 0;
    AcquisitionConfig config;
    std::vector<StepRecord> history;
    RunStatus status = RunStatus::Ok;
    std::vector<bool> used_candidates;  // constrained modes
};

/// Max |<new row, old row>| over all pairs; reporting only.
inline double verify_orthogonality(const AcquisitionState& state,
                                   const Mat& new_rows) {
    if (state.sensing.row_count() == 0 || new_rows.rows() == 0) return 0.0;
    return (new_rows * state.sensing.rows_matrix.transpose())
        .cwiseAbs()
        .maxCoeff();
}

/// Append rows and the corresponding measurements of the ground truth,
/// maintaining the orthonormal flag and the cached pseudo-inverse.
inline void append_measurement(AcquisitionState& state, const Mat& new_rows,
                               const Vec& ground_truth) {
    if (new_rows.cols() != state.sensing.dim() || !new_rows.allFinite())
        throw DimensionError("append_measurement: bad new rows");

    const Index k0 = state.sensing.row_count();
    const Index kn = new_rows.rows();
    bool still_orthonormal = state.sensing.orthonormal &&
                             rows_orthonormal(new_rows) &&
                             (k0 == 0 || verify_orthogonality(state, new_rows) < 1e-8);

    Mat grown(k0 + kn, state.sensing.dim());
    grown << state.sensing.rows_matrix, new_rows;
    state.sensing.rows_matrix = std::move(grown);
    state.sensing.orthonormal = still_orthonormal;
    if (still_orthonormal) {
        state.sensing.cached_pinv = state.sensing.rows_matrix.transpose();
    } else {
        state.sensing.cached_pinv = pinv(state.sensing.rows_matrix);
    }

    Vec y_new = new_rows * ground_truth;
    Vec grown_y(k0 + kn);
    grown_y << state.measurements, y_new;
    state.measurements = std::move(grown_y);
}

struct RunSpec {
    Prior prior;
    PosteriorSamplerSpec sampler;
    SelectionMode mode = SelectionMode::UnconstrainedEmpirical;
    std::optional<CandidateSet> candidates;  // constrained modes
    AcquisitionConfig config;
    Reconstructor oracle_reconstructor;  // GreedyOracle only
};

namespace detail {

inline Mat exact_posterior_cov(const Prior& prior, const Mat& h, const Vec& y) {
    if (const auto* g = std::get_if<GaussianPrior>(&prior))
        return condition_gaussian(*g, h, y).cov;
    GmmPosterior post = condition_gmm(std::get<GmmPrior>(prior), h, y);
    Vec mean;
    Mat cov;
    posterior_moments(post, mean, cov);
    return cov;
}

}  // namespace detail

/// The greedy acquisition loop: N steps of sample-center-select-measure.
inline AcquisitionState run_adasense(const RunSpec& spec, const Vec& ground_truth,
                                     const RngStream& rng) {
    const Index d = prior_dim(spec.prior);
    if (ground_truth.size() != d)
        throw DimensionError("run_adasense: ground truth dim != prior dim");
    const auto& cfg = spec.config;
    if (!mode_is_constrained(spec.mode) && cfg.steps * cfg.rows_per_step > d)
        throw InvalidInputError("run_adasense: N*r exceeds signal dimension");
    if (mode_is_constrained(spec.mode)) {
        if (!spec.candidates)
            throw InvalidInputError("run_adasense: constrained mode needs candidates");
        if (static_cast<Index>(spec.candidates->size()) < cfg.steps)
            throw ExhaustedCandidatesError(
                "run_adasense: not enough candidates for all steps");
    }

    AcquisitionState state;
    state.sensing = SensingMatrix::empty(d);
    state.measurements = Vec(0);
    state.config = cfg;
    if (spec.candidates)
        state.used_candidates.assign(spec.candidates->size(), false);

    for (Index n = 0; n < cfg.steps; ++n) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream step_rng = rng.child(static_cast<std::uint64_t>(n));
        StepRecord rec;
        rec.step = n;

        CovarianceSource source = [&] {
            if (mode_is_exact(spec.mode)) {
                return CovarianceSource::exact(detail::exact_posterior_cov(
                    spec.prior, state.sensing.rows_matrix, state.measurements));
            }
            PosteriorBatch batch = sample_posterior(
                spec.prior, state.sensing.rows_matrix, state.measurements,
                cfg.samples, spec.sampler, step_rng);
            return CovarianceSource::empirical(center(batch));
        }();

        Mat new_rows;
        switch (spec.mode) {
            case SelectionMode::UnconstrainedEmpirical:
            case SelectionMode::UnconstrainedExact: {
                // Collapsed posterior: stop early rather than measure noise.
                const bool collapsed =
                    source.exact_cov
                        ? sym_eig(*source.exact_cov).values(0) <= 1e-12
                        : source.batch->samples.cwiseAbs().maxCoeff() <= 1e-12;
                if (collapsed) {
                    state.status = RunStatus::CollapsedPosterior;
                    return state;
                }
                SelectionResult sel =
                    select_unconstrained(source, cfg.rows_per_step);
                rec.degenerate = sel.degenerate;
                new_rows = sel.rows;
                break;
            }
            case SelectionMode::ConstrainedExact:
            case SelectionMode::ConstrainedHeuristic: {
                const auto crit = spec.mode == SelectionMode::ConstrainedExact
                                      ? ConstrainedCriterion::Exact
                                      : ConstrainedCriterion::Heuristic;
                ConstrainedSelection sel =
                    select_constrained(*spec.candidates, source, crit,
                                       /*r_blocks=*/1, state.used_candidates);
                rec.picked_candidates = sel.picked;
                rec.scores = sel.scores;
                for (std::size_t idx : sel.picked)
                    state.used_candidates[idx] = true;
                new_rows = sel.rows;
                break;
            }
            case SelectionMode::GreedyOracle: {
                if (!spec.oracle_reconstructor)
                    throw InvalidInputError(
                        "run_adasense: greedy oracle needs a reconstructor");
                std::size_t idx = greedy_oracle(
                    *spec.candidates, ground_truth, state.sensing.rows_matrix,
                    spec.oracle_reconstructor, state.used_candidates);
                rec.picked_candidates = {idx};
                state.used_candidates[idx] = true;
                new_rows = spec.candidates->members[idx];
                break;
            }
        }

        rec.max_overlap_with_previous = verify_orthogonality(state, new_rows);
        rec.selected_rows = new_rows;
        append_measurement(state, new_rows, ground_truth);
        state.step = n + 1;
        rec.wall_time_ms =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - t0)
                .count();
        state.history.push_back(std::move(rec));
    }
    return state;
}

}  // namespace adasense
