#include <catch2/catch_amalgamated.hpp>

#include "adasense/restoration.hpp"
#include "helpers.hpp"

using namespace adasense;
using testutil::random_orthonormal_rows;
using testutil::random_psd;

namespace {

AcquisitionState state_with(const Mat& h, const Vec& x) {
    AcquisitionState state;
    state.sensing = SensingMatrix::empty(h.cols());
    state.measurements = Vec(0);
    append_measurement(state, h, x);
    return state;
}

}  // namespace

TEST_CASE("restore_linear fills unmeasured coordinates from the prior mean") {
    Vec x(3);
    x << 2.0, 5.0, 9.0;
    AcquisitionState state = state_with(Mat::Identity(3, 3).topRows(2), x);
    Vec out = restore_linear(state, Vec::Zero(3));
    REQUIRE(out(0) == Catch::Approx(2.0));
    REQUIRE(out(1) == Catch::Approx(5.0));
    REQUIRE(out(2) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("restore_linear with no measurements returns the prior mean") {
    AcquisitionState state;
    state.sensing = SensingMatrix::empty(3);
    state.measurements = Vec(0);
    Vec mu = Vec::Constant(3, 1.5);
    REQUIRE(restore_linear(state, mu) == mu);
}

TEST_CASE("restore_linear matches the least-squares oracle") {
    RngStream rng(41);
    Mat h = random_orthonormal_rows(rng, 2, 5);
    Vec x = rng.normal_vec(5);
    Vec mu = rng.normal_vec(5);
    AcquisitionState state = state_with(h, x);
    Vec out = restore_linear(state, mu);
    // Oracle: projection of x onto span(H) plus the complement of mu.
    Mat p = h.transpose() * h;
    Vec expected = p * x + (Mat::Identity(5, 5) - p) * mu;
    REQUIRE((out - expected).cwiseAbs().maxCoeff() < 1e-9);
    // Measurement-consistency for orthonormal rows.
    REQUIRE((h * out - state.measurements).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("restore_linear beats random affine decoders") {
    RngStream rng(42);
    Prior prior = GaussianPrior{rng.normal_vec(4), random_psd(rng, 4)};
    Mat h = random_orthonormal_rows(rng, 2, 4);
    Vec mean;
    Mat cov;
    prior_moments(prior, mean, cov);

    const int trials = 300;
    std::vector<Vec> xs, ys;
    for (int t = 0; t < trials; ++t) {
        RngStream r = rng.child(t);
        Vec x = sample_prior(prior, 1, r).front();
        xs.push_back(x);
        ys.push_back(h * x);
    }
    double linear_err = 0.0;
    for (int t = 0; t < trials; ++t) {
        AcquisitionState state = state_with(h, xs[t]);
        linear_err += (restore_linear(state, mean) - xs[t]).squaredNorm();
    }
    for (int k = 0; k < 100; ++k) {
        RngStream r = rng.child(10000 + k);
        Mat u = testutil::random_matrix(r, 4, 2);
        Vec b = r.normal_vec(4);
        double err = 0.0;
        for (int t = 0; t < trials; ++t)
            err += (u * ys[t] + b - xs[t]).squaredNorm();
        REQUIRE(linear_err <= err + 1e-9);
    }
}

TEST_CASE("restore_sample is exact when the posterior is fully determined") {
    RngStream rng(43);
    Prior prior = GaussianPrior{Vec::Zero(3), random_psd(rng, 3)};
    Vec x = sample_prior(prior, 1, rng).front();
    AcquisitionState state = state_with(Mat::Identity(3, 3), x);
    PosteriorSamplerSpec sampler;
    Vec out = restore_sample(state, prior, sampler, RngStream(44));
    REQUIRE((out - x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("restore_sample with no measurements is a prior draw") {
    Vec d(2);
    d << 4.0, 1.0;
    Prior prior = GaussianPrior{Vec::Zero(2), Mat(d.asDiagonal())};
    AcquisitionState state;
    state.sensing = SensingMatrix::empty(2);
    state.measurements = Vec(0);
    PosteriorSamplerSpec sampler;
    const int n = 20000;
    Vec sum2 = Vec::Zero(2);
    for (int i = 0; i < n; ++i) {
        Vec s = restore_sample(state, prior, sampler, RngStream(45).child(i));
        sum2 += s.cwiseProduct(s);
    }
    REQUIRE(std::abs(sum2(0) / n - 4.0) < 0.3);
    REQUIRE(std::abs(sum2(1) / n - 1.0) < 0.1);
}

TEST_CASE("restore_sample empirical mean matches the analytic posterior mean") {
    RngStream rng(46);
    GaussianPrior g{rng.normal_vec(3), random_psd(rng, 3)};
    Mat h = testutil::random_matrix(rng, 1, 3);
    Vec x = sample_prior(Prior(g), 1, rng).front();
    AcquisitionState state = state_with(h, x);
    ConditionalGaussian post = condition_gaussian(g, h, state.measurements);

    PosteriorSamplerSpec sampler;
    const int n = 10000;
    Vec sum = Vec::Zero(3);
    for (int i = 0; i < n; ++i)
        sum += restore_sample(state, Prior(g), sampler, rng.child(i));
    Vec emp = sum / n;
    for (Index i = 0; i < 3; ++i) {
        const double se = std::sqrt(std::max(post.cov(i, i), 1e-30) / n);
        REQUIRE(std::abs(emp(i) - post.mean(i)) < 3.0 * se + 1e-9);
    }
}

TEST_CASE("restore_mean with one draw coincides with restore_sample") {
    Vec d(2);
    d << 4.0, 1.0;
    Prior prior = GaussianPrior{Vec::Zero(2), Mat(d.asDiagonal())};
    Mat h(1, 2);
    h << 1.0, 0.0;
    Vec x(2);
    x << 2.0, 0.7;
    AcquisitionState state = state_with(h, x);
    PosteriorSamplerSpec sampler;
    Vec a = restore_sample(state, prior, sampler, RngStream(47));
    Vec b = restore_mean(state, prior, sampler, 1, RngStream(47));
    REQUIRE(a == b);
    REQUIRE_THROWS_AS(restore_mean(state, prior, sampler, 0, RngStream(47)),
                      InvalidInputError);
}

TEST_CASE("restore_mean converges to the posterior mean as draws grow") {
    RngStream rng(48);
    GaussianPrior g{Vec::Zero(3), random_psd(rng, 3)};
    Mat h = testutil::random_matrix(rng, 1, 3);
    Vec x = sample_prior(Prior(g), 1, rng).front();
    AcquisitionState state = state_with(h, x);
    ConditionalGaussian post = condition_gaussian(g, h, state.measurements);
    PosteriorSamplerSpec sampler;

    // Error should shrink roughly like 1/sqrt(s): average over repeats.
    const int reps = 40;
    double err_small = 0.0, err_large = 0.0;
    for (int i = 0; i < reps; ++i) {
        err_small += (restore_mean(state, Prior(g), sampler, 4, rng.child(i)) -
                      post.mean)
                         .squaredNorm();
        err_large +=
            (restore_mean(state, Prior(g), sampler, 256, rng.child(1000 + i)) -
             post.mean)
                .squaredNorm();
    }
    // 64x more draws: expect about 64x smaller squared error; accept 8x.
    REQUIRE(err_large < err_small / 8.0);
}

TEST_CASE("mse and psnr formulas") {
    Vec a(2), b(2);
    a << 1.0, 2.0;
    b << 1.0, 2.0;
    REQUIRE(mse(a, b) == 0.0);
    REQUIRE(std::isinf(psnr(a, b, 1.0)));

    Vec c(2);
    c << 1.1, 1.9;  // mse 0.01
    REQUIRE(mse(a, c) == Catch::Approx(0.01));
    REQUIRE(psnr(a, c, 1.0) == Catch::Approx(20.0));

    RngStream rng(49);
    Vec u = rng.normal_vec(6), v = rng.normal_vec(6);
    double two_pass = 0.0;
    for (Index i = 0; i < 6; ++i)
        two_pass += (u(i) - v(i)) * (u(i) - v(i));
    two_pass /= 6.0;
    REQUIRE(mse(u, v) == Catch::Approx(two_pass).epsilon(1e-12));

    REQUIRE_THROWS_AS(mse(Vec::Zero(2), Vec::Zero(3)), DimensionError);
    REQUIRE_THROWS_AS(psnr(a, c, 0.0), InvalidInputError);
}

TEST_CASE("restore dispatch honors the spec mode") {
    Vec d(2);
    d << 4.0, 1.0;
    Prior prior = GaussianPrior{Vec::Zero(2), Mat(d.asDiagonal())};
    Mat h(1, 2);
    h << 1.0, 0.0;
    Vec x(2);
    x << 2.0, -0.4;
    AcquisitionState state = state_with(h, x);
    RestorationSpec spec;
    spec.mode = RestorationMode::Linear;
    Vec lin = restore(state, prior, spec, RngStream(50));
    REQUIRE(lin(0) == Catch::Approx(2.0));
    REQUIRE(lin(1) == Catch::Approx(0.0).margin(1e-12));
    spec.mode = RestorationMode::Mean;
    spec.mean_count = 8;
    Vec mean_est = restore(state, prior, spec, RngStream(50));
    REQUIRE(mean_est(0) == Catch::Approx(2.0).margin(1e-8));
}
