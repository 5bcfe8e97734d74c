#pragma once

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adasense/numerics.hpp"
#include "adasense/rng.hpp"

namespace adasense {

struct InfeasibleMeasurementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GaussianPrior {
    Vec mean;
    Mat cov;  // symmetric PSD

    Index dim() const { return mean.size(); }
};

struct GmmPrior {
    Vec weights;  // nonnegative, sums to 1
    std::vector<GaussianPrior> components;

    Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

using Prior = std::variant<GaussianPrior, GmmPrior>;

inline Index prior_dim(const Prior& p) {
    return std::visit([](const auto& q) { return q.dim(); }, p);
}

/// Gaussian conditioned on exact linear measurements Hx = y. The covariance
/// support lies in null(H); it may be rank deficient.
struct ConditionalGaussian {
    Vec mean;
    Mat cov;
};

struct GmmPosterior {
    Vec weights;
    std::vector<ConditionalGaussian> components;
};

inline void validate_gaussian(const GaussianPrior& p) {
    if (p.cov.rows() != p.cov.cols() || p.cov.rows() != p.mean.size())
        throw DimensionError("GaussianPrior: mean/cov dimension mismatch");
    require_finite(p.cov, "GaussianPrior.cov");
    require_finite(p.mean, "GaussianPrior.mean");
    if ((p.cov - p.cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw InvalidInputError("GaussianPrior: covariance not symmetric");
}

inline void validate_gmm(const GmmPrior& p) {
    if (p.weights.size() != static_cast<Index>(p.components.size()))
        throw DimensionError("GmmPrior: weights/components count mismatch");
    if (p.components.empty()) throw InvalidInputError("GmmPrior: no components");
    if (p.weights.minCoeff() < 0.0)
        throw InvalidInputError("GmmPrior: negative weight");
    if (std::abs(p.weights.sum() - 1.0) > 1e-12)
        throw InvalidInputError("GmmPrior: weights must sum to 1");
    const Index d = p.components.front().dim();
    for (const auto& c : p.components) {
        validate_gaussian(c);
        if (c.dim() != d)
            throw DimensionError("GmmPrior: component dimension mismatch");
    }
}

namespace detail {

/// log N(y; m, C) with a pre-regularized covariance C.
inline double log_gaussian_density(const Vec& y, const Vec& m, const Mat& c) {
    const Index d = y.size();
    Eigen::LLT<Mat> llt(c);
    if (llt.info() != Eigen::Success) {
        // Fall back to eigendecomposition for semidefinite C.
        EigPairs ep = sym_eig(c);
        double logdet = 0.0, quad = 0.0;
        Vec r = ep.vectors.transpose() * (y - m);
        const double floor = 1e-300;
        for (Index i = 0; i < d; ++i) {
            const double lam = std::max(ep.values(i), floor);
            logdet += std::log(lam);
            quad += r(i) * r(i) / lam;
        }
        return -0.5 * (d * std::log(2.0 * M_PI) + logdet + quad);
    }
    Vec r = y - m;
    Vec z = llt.matrixL().solve(r);
    double logdet = 0.0;
    for (Index i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (d * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

inline double conditioning_jitter(const Mat& gram, Index d) {
    return d > 0 ? 1e-9 * gram.trace() / static_cast<double>(d) : 0.0;
}

}  // namespace detail

/// Exact noiseless conditioning of a Gaussian on Hx = y.
inline ConditionalGaussian condition_gaussian(const GaussianPrior& prior,
                                              const Mat& h, const Vec& y) {
    const Index d = h.rows();
    if (h.cols() != prior.dim() && d > 0)
        throw DimensionError("condition_gaussian: H column count != prior dim");
    if (y.size() != d)
        throw DimensionError("condition_gaussian: y size != H row count");
    if (d == 0) return {prior.mean, prior.cov};
    require_finite(h, "condition_gaussian: H");
    require_finite(y, "condition_gaussian: y");

    Mat gram = h * prior.cov * h.transpose();
    const double eps = detail::conditioning_jitter(gram, d);
    gram.diagonal().array() += eps;
    Mat gain = prior.cov * h.transpose() * gram.inverse();
    ConditionalGaussian out;
    out.mean = prior.mean + gain * (y - h * prior.mean);
    out.cov = prior.cov - gain * h * prior.cov;
    out.cov = 0.5 * (out.cov + out.cov.transpose());

    // Degenerate priors can make the requested measurement unreachable.
    const double scale = 1.0 + y.cwiseAbs().maxCoeff();
    if (((h * out.mean - y).cwiseAbs().maxCoeff() / scale) > 1e-6)
        throw InfeasibleMeasurementError(
            "condition_gaussian: y not attainable under the prior support");
    return out;
}

/// Exact conditioning of a mixture: per-component conditioning plus
/// responsibility reweighting by the marginal measurement likelihood.
inline GmmPosterior condition_gmm(const GmmPrior& prior, const Mat& h,
                                  const Vec& y) {
    const std::size_t k = prior.components.size();
    GmmPosterior post;
    post.weights = prior.weights;
    if (h.rows() == 0) {
        for (const auto& c : prior.components)
            post.components.push_back({c.mean, c.cov});
        return post;
    }

    std::vector<double> logw(k, -std::numeric_limits<double>::infinity());
    std::vector<bool> feasible(k, false);
    post.components.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = prior.components[i];
        Mat gram = h * c.cov * h.transpose();
        const double eps = detail::conditioning_jitter(gram, h.rows());
        Mat reg = gram;
        reg.diagonal().array() += eps;
        try {
            post.components[i] = condition_gaussian(c, h, y);
            feasible[i] = true;
            logw[i] = std::log(std::max(prior.weights(i), 1e-300)) +
                      detail::log_gaussian_density(y, h * c.mean, reg);
        } catch (const InfeasibleMeasurementError&) {
            post.components[i] = {c.mean, c.cov};  // placeholder, weight 0
        }
    }

    double lmax = -std::numeric_limits<double>::infinity();
    for (double lw : logw) lmax = std::max(lmax, lw);
    if (!std::isfinite(lmax)) {
        // All likelihoods underflowed: uniform over feasible components.
        std::size_t nfeas = 0;
        for (bool f : feasible) nfeas += f ? 1 : 0;
        if (nfeas == 0)
            throw InfeasibleMeasurementError(
                "condition_gmm: measurement infeasible for every component");
        for (std::size_t i = 0; i < k; ++i)
            post.weights(i) = feasible[i] ? 1.0 / static_cast<double>(nfeas) : 0.0;
        return post;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        post.weights(i) = std::exp(logw[i] - lmax);
        total += post.weights(i);
    }
    post.weights /= total;
    return post;
}

/// Mean and covariance of a mixture of Gaussians.
inline void mixture_moments(const Vec& weights,
                            const std::vector<ConditionalGaussian>& comps,
                            Vec& mean, Mat& cov) {
    const Index d = comps.front().mean.size();
    mean = Vec::Zero(d);
    for (Index i = 0; i < weights.size(); ++i)
        mean += weights(i) * comps[i].mean;
    cov = Mat::Zero(d, d);
    for (Index i = 0; i < weights.size(); ++i) {
        Vec dm = comps[i].mean - mean;
        cov += weights(i) * (comps[i].cov + dm * dm.transpose());
    }
    cov = 0.5 * (cov + cov.transpose());
}

inline void posterior_moments(const GmmPosterior& post, Vec& mean, Mat& cov) {
    mixture_moments(post.weights, post.components, mean, cov);
}

/// Overall moments of a prior (GMM folds component spread into covariance).
inline void prior_moments(const Prior& prior, Vec& mean, Mat& cov) {
    if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
        mean = g->mean;
        cov = g->cov;
        return;
    }
    const auto& m = std::get<GmmPrior>(prior);
    std::vector<ConditionalGaussian> comps;
    for (const auto& c : m.components) comps.push_back({c.mean, c.cov});
    mixture_moments(m.weights, comps, mean, cov);
}

/// MMSE denoiser for the variance-exploding observation x_noisy = x0 + sigma z.
inline Vec mmse_denoise(const GaussianPrior& prior, const Vec& x_noisy,
                        double sigma) {
    if (x_noisy.size() != prior.dim())
        throw DimensionError("mmse_denoise: dimension mismatch");
    if (sigma < 0.0) throw InvalidInputError("mmse_denoise: sigma < 0");
    if (sigma == 0.0) return x_noisy;
    const Index d = prior.dim();
    Mat a = prior.cov + sigma * sigma * Mat::Identity(d, d);
    return prior.mean + prior.cov * a.llt().solve(x_noisy - prior.mean);
}

inline Vec mmse_denoise(const GmmPrior& prior, const Vec& x_noisy,
                        double sigma) {
    if (x_noisy.size() != prior.dim())
        throw DimensionError("mmse_denoise: dimension mismatch");
    if (sigma < 0.0) throw InvalidInputError("mmse_denoise: sigma < 0");
    if (sigma == 0.0) return x_noisy;
    const Index d = prior.dim();
    const std::size_t k = prior.components.size();
    std::vector<double> logr(k);
    std::vector<Vec> means(k);
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = prior.components[i];
        Mat a = c.cov + sigma * sigma * Mat::Identity(d, d);
        logr[i] = std::log(std::max(prior.weights(i), 1e-300)) +
                  detail::log_gaussian_density(x_noisy, c.mean, a);
        means[i] = c.mean + c.cov * a.llt().solve(x_noisy - c.mean);
        lmax = std::max(lmax, logr[i]);
    }
    double total = 0.0;
    Vec out = Vec::Zero(d);
    for (std::size_t i = 0; i < k; ++i) {
        const double r = std::exp(logr[i] - lmax);
        total += r;
        out += r * means[i];
    }
    return out / total;
}

inline Vec mmse_denoise(const Prior& prior, const Vec& x_noisy, double sigma) {
    return std::visit(
        [&](const auto& p) { return mmse_denoise(p, x_noisy, sigma); }, prior);
}

/// Draw from N(mean, cov) through an eigen factor; negative roundoff
/// eigenvalues are clamped to zero so degenerate covariances are fine.
inline Vec sample_gaussian(const Vec& mean, const Mat& cov, RngStream& rng) {
    EigPairs ep = sym_eig(cov);
    Vec z = rng.normal_vec(mean.size());
    Vec scaled(z.size());
    for (Index i = 0; i < z.size(); ++i)
        scaled(i) = std::sqrt(std::max(ep.values(i), 0.0)) * z(i);
    return mean + ep.vectors * scaled;
}

inline std::vector<Vec> sample_prior(const GaussianPrior& prior, std::size_t n,
                                     RngStream& rng) {
    std::vector<Vec> out;
    out.reserve(n);
    EigPairs ep = sym_eig(prior.cov);
    for (std::size_t i = 0; i < n; ++i) {
        Vec z = rng.normal_vec(prior.dim());
        for (Index j = 0; j < z.size(); ++j)
            z(j) *= std::sqrt(std::max(ep.values(j), 0.0));
        out.push_back(prior.mean + ep.vectors * z);
    }
    return out;
}

inline std::vector<Vec> sample_prior(const GmmPrior& prior, std::size_t n,
                                     RngStream& rng) {
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = rng.categorical(prior.weights);
        out.push_back(sample_gaussian(prior.components[k].mean,
                                      prior.components[k].cov, rng));
    }
    return out;
}

inline std::vector<Vec> sample_prior(const Prior& prior, std::size_t n,
                                     RngStream& rng) {
    return std::visit(
        [&](const auto& p) { return sample_prior(p, n, rng); }, prior);
}

// ---- JSON loading -----------------------------------------------------------

inline Vec vec_from_json(const nlohmann::json& j) {
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

inline Mat mat_from_json(const nlohmann::json& j) {
    const Index rows = static_cast<Index>(j.size());
    if (rows == 0) return Mat(0, 0);
    const Index cols = static_cast<Index>(j[0].size());
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j[i].size()) != cols)
            throw InvalidInputError("matrix JSON: ragged rows");
        for (Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

inline Prior prior_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "gaussian") {
        GaussianPrior p{vec_from_json(j.at("mean")), mat_from_json(j.at("cov"))};
        validate_gaussian(p);
        return p;
    }
    if (type == "gmm") {
        GmmPrior p;
        p.weights = vec_from_json(j.at("weights"));
        for (const auto& cj : j.at("components"))
            p.components.push_back(
                {vec_from_json(cj.at("mean")), mat_from_json(cj.at("cov"))});
        validate_gmm(p);
        return p;
    }
    throw InvalidInputError("prior JSON: unknown type '" + type + "'");
}

}  // namespace adasense
