#pragma once

#include <cmath>
#include <vector>

#include "adasense/numerics.hpp"
#include "adasense/priors.hpp"
#include "adasense/rng.hpp"

namespace adasense {

enum class SamplerKind { Exact, Ddrm };

/// Diffusion-style sampler settings. The sigma schedule is geometric from
/// sigma_max_scale * sqrt(lambda_max(Cov[x])) down to sigma_min_ratio times
/// that, with a final exact-consistency level of 0 appended. eta interpolates
/// between a deterministic flow (0) and full per-step re-noising (1).
struct PosteriorSamplerSpec {
    SamplerKind kind = SamplerKind::Exact;
    int steps = 25;
    double sigma_max_scale = 1.0;
    double sigma_min_ratio = 1e-3;
    double eta = 0.0;
};

inline void validate_sampler_spec(const PosteriorSamplerSpec& spec) {
    if (spec.kind == SamplerKind::Ddrm) {
        if (spec.steps < 1) throw InvalidInputError("sampler spec: steps < 1");
        if (spec.sigma_max_scale <= 0.0 || spec.sigma_min_ratio <= 0.0 ||
            spec.sigma_min_ratio >= 1.0)
            throw InvalidInputError("sampler spec: bad sigma schedule bounds");
        if (spec.eta < 0.0 || spec.eta > 1.0)
            throw InvalidInputError("sampler spec: eta outside [0, 1]");
    }
}

/// Strictly decreasing noise levels sigma_T .. sigma_1, then 0.
inline std::vector<double> sigma_schedule(const PosteriorSamplerSpec& spec,
                                          double lambda_max) {
    const double st = spec.sigma_max_scale * std::sqrt(std::max(lambda_max, 0.0));
    std::vector<double> sched;
    sched.reserve(spec.steps + 1);
    if (st <= 0.0) {
        // Degenerate prior: all-zero schedule collapses the chain to the mean.
        sched.assign(spec.steps + 1, 0.0);
        return sched;
    }
    for (int t = 0; t < spec.steps; ++t) {
        const double frac =
            spec.steps > 1 ? static_cast<double>(t) / (spec.steps - 1) : 1.0;
        sched.push_back(st * std::pow(spec.sigma_min_ratio, frac));
    }
    sched.push_back(0.0);
    return sched;
}

/// s posterior samples conditioned on Hx = y, one row per sample.
struct PosteriorBatch {
    Mat samples;  // s x D
    Mat h;
    Vec y;
    bool centered = false;
    Vec mean;  // original sample mean, kept through centering

    std::size_t size() const { return static_cast<std::size_t>(samples.rows()); }
};

inline PosteriorBatch sample_exact(const Prior& prior, const Mat& h,
                                   const Vec& y, std::size_t s,
                                   const RngStream& rng) {
    const Index d = prior_dim(prior);
    PosteriorBatch batch;
    batch.h = h;
    batch.y = y;
    batch.samples.resize(static_cast<Index>(s), d);

    if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
        ConditionalGaussian post = condition_gaussian(*g, h, y);
        EigPairs ep = sym_eig(post.cov);
        for (std::size_t i = 0; i < s; ++i) {
            RngStream r = rng.child(i);
            Vec z = r.normal_vec(d);
            for (Index j = 0; j < d; ++j)
                z(j) *= std::sqrt(std::max(ep.values(j), 0.0));
            batch.samples.row(static_cast<Index>(i)) =
                (post.mean + ep.vectors * z).transpose();
        }
    } else {
        const auto& m = std::get<GmmPrior>(prior);
        GmmPosterior post = condition_gmm(m, h, y);
        for (std::size_t i = 0; i < s; ++i) {
            RngStream r = rng.child(i);
            std::size_t k = r.categorical(post.weights);
            batch.samples.row(static_cast<Index>(i)) =
                sample_gaussian(post.components[k].mean, post.components[k].cov,
                                r)
                    .transpose();
        }
    }
    return batch;
}

namespace detail {

inline Vec ddrm_chain(const Prior& prior, const Mat& proj_null,
                      const Vec& consistent_part, const Vec& prior_draw,
                      const std::vector<double>& sched, double eta,
                      RngStream& rng) {
    const Index d = prior_dim(prior);
    const double sigma_t0 = sched.front();
    Vec x = consistent_part + proj_null * prior_draw +
            sigma_t0 * rng.normal_vec(d);
    const double mom = std::sqrt(std::max(1.0 - eta * eta, 0.0));
    for (std::size_t t = 0; t + 1 < sched.size(); ++t) {
        const double s = sched[t];
        const double sn = sched[t + 1];
        Vec x0 = mmse_denoise(prior, x, s);
        Vec drift = x0;
        if (s > 0.0 && sn > 0.0) drift += mom * (sn / s) * (x - x0);
        x = proj_null * drift + consistent_part;
        if (eta > 0.0 && sn > 0.0) x += eta * sn * rng.normal_vec(d);
    }
    return x;
}

}  // namespace detail

/// Toy diffusion posterior sampler: projection-consistent reverse process
/// driven by the analytic MMSE denoiser. The final noise level is 0, so
/// every sample satisfies Hx = y to machine precision.
inline PosteriorBatch sample_ddrm(const Prior& prior, const Mat& h,
                                  const Vec& y, std::size_t s,
                                  const PosteriorSamplerSpec& spec,
                                  const RngStream& rng) {
    validate_sampler_spec(spec);
    const Index d = prior_dim(prior);
    if (h.rows() > 0 && h.cols() != d)
        throw DimensionError("sample_ddrm: H column count != prior dim");

    Mat hp = pinv(h.rows() > 0 ? h : Mat::Zero(0, d));
    Mat proj_null = Mat::Identity(d, d);
    Vec consistent_part = Vec::Zero(d);
    if (h.rows() > 0) {
        proj_null -= hp * h;
        consistent_part = hp * y;
    }

    Vec pmean;
    Mat pcov;
    prior_moments(prior, pmean, pcov);
    const double lambda_max = sym_eig(pcov).values(0);
    std::vector<double> sched = sigma_schedule(spec, lambda_max);

    PosteriorBatch batch;
    batch.h = h;
    batch.y = y;
    batch.samples.resize(static_cast<Index>(s), d);
    for (std::size_t i = 0; i < s; ++i) {
        RngStream r = rng.child(i);
        Vec draw = sample_prior(prior, 1, r).front();
        batch.samples.row(static_cast<Index>(i)) =
            detail::ddrm_chain(prior, proj_null, consistent_part, draw, sched,
                               spec.eta, r)
                .transpose();
    }
    return batch;
}

inline PosteriorBatch sample_posterior(const Prior& prior, const Mat& h,
                                       const Vec& y, std::size_t s,
                                       const PosteriorSamplerSpec& spec,
                                       const RngStream& rng) {
    return spec.kind == SamplerKind::Exact
               ? sample_exact(prior, h, y, s, rng)
               : sample_ddrm(prior, h, y, s, spec, rng);
}

/// Subtract the sample mean. A single-sample batch centers to all zeros;
/// downstream selection treats that as the degenerate case.
inline PosteriorBatch center(const PosteriorBatch& batch) {
    if (batch.size() < 1) throw InvalidInputError("center: empty batch");
    PosteriorBatch out = batch;
    out.mean = batch.samples.colwise().mean().transpose();
    out.samples.rowwise() -= out.mean.transpose();
    out.centered = true;
    return out;
}

/// max_i ||H x_i - y||_inf / (1 + ||y||_inf)
inline double max_consistency_violation(const PosteriorBatch& batch) {
    if (batch.h.rows() == 0) return 0.0;
    const double scale = 1.0 + batch.y.cwiseAbs().maxCoeff();
    Mat resid = batch.samples * batch.h.transpose();
    resid.rowwise() -= batch.y.transpose();
    return resid.cwiseAbs().maxCoeff() / scale;
}

}  // namespace adasense
