#pragma once

#include <cmath>
#include <limits>

#include "adasense/engine.hpp"
#include "adasense/priors.hpp"
#include "adasense/samplers.hpp"

namespace adasense {

enum class RestorationMode { Linear, Sample, Mean };

struct RestorationSpec {
    RestorationMode mode = RestorationMode::Linear;
    std::size_t mean_count = 16;  // draws averaged in Mean mode
    PosteriorSamplerSpec sampler;
};

/// Optimal affine decoder for the acquired rows: Hd y + (I - Hd H) mu.
/// For orthonormal rows the cached pseudo-inverse is the transpose.
inline Vec restore_linear(const AcquisitionState& state, const Vec& prior_mean) {
    if (state.sensing.row_count() == 0) return prior_mean;
    const Mat& hp = state.sensing.cached_pinv;
    return hp * state.measurements +
           (prior_mean - hp * (state.sensing.rows_matrix * prior_mean));
}

/// One posterior draw given the acquired measurements.
inline Vec restore_sample(const AcquisitionState& state, const Prior& prior,
                          const PosteriorSamplerSpec& sampler,
                          const RngStream& rng) {
    PosteriorBatch batch = sample_posterior(
        prior, state.sensing.rows_matrix, state.measurements, 1, sampler, rng);
    return batch.samples.row(0).transpose();
}

/// Average of s_final posterior draws: a posterior-mean estimate.
inline Vec restore_mean(const AcquisitionState& state, const Prior& prior,
                        const PosteriorSamplerSpec& sampler,
                        std::size_t s_final, const RngStream& rng) {
    if (s_final < 1) throw InvalidInputError("restore_mean: s_final < 1");
    PosteriorBatch batch =
        sample_posterior(prior, state.sensing.rows_matrix, state.measurements,
                         s_final, sampler, rng);
    return batch.samples.colwise().mean().transpose();
}

inline Vec restore(const AcquisitionState& state, const Prior& prior,
                   const RestorationSpec& spec, const RngStream& rng) {
    switch (spec.mode) {
        case RestorationMode::Linear: {
            Vec mean;
            Mat cov;
            prior_moments(prior, mean, cov);
            return restore_linear(state, mean);
        }
        case RestorationMode::Sample:
            return restore_sample(state, prior, spec.sampler, rng);
        case RestorationMode::Mean:
            return restore_mean(state, prior, spec.sampler, spec.mean_count, rng);
    }
    throw InvalidInputError("restore: unknown mode");
}

inline double mse(const Vec& reference, const Vec& estimate) {
    if (reference.size() != estimate.size())
        throw DimensionError("mse: dimension mismatch");
    if (reference.size() == 0) return 0.0;
    return (reference - estimate).squaredNorm() /
           static_cast<double>(reference.size());
}

/// 10 log10(peak^2 / mse); +inf sentinel for a perfect match.
inline double psnr(const Vec& reference, const Vec& estimate, double peak) {
    if (peak <= 0.0) throw InvalidInputError("psnr: peak must be positive");
    const double m = mse(reference, estimate);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

}  // namespace adasense
