#pragma once

#include <cstdint>
#include <random>

#include "adasense/numerics.hpp"

namespace adasense {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Seeded random stream with deterministic child derivation, so that
/// per-sample / per-trial streams do not depend on evaluation order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    RngStream child(std::uint64_t index) const {
        return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(index + 1)));
    }

    double normal() { return normal_(gen_); }

    double uniform() { return uniform_(gen_); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
        return d(gen_);
    }

    Vec normal_vec(Index n) {
        Vec v(n);
        for (Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    /// Categorical draw from (unnormalized, nonnegative) weights.
    std::size_t categorical(const Vec& weights) {
        const double total = weights.sum();
        double u = uniform() * total;
        for (Index k = 0; k < weights.size(); ++k) {
            u -= weights(k);
            if (u <= 0.0) return static_cast<std::size_t>(k);
        }
        return static_cast<std::size_t>(weights.size() - 1);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace adasense
