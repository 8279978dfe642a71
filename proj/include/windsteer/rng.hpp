#pragma once

// Deterministic RNG wrapper. mt19937_64 with explicit uniform/normal
// transforms so streams are reproducible across platforms and compilers
// (std::normal_distribution is not portable).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "windsteer/common.hpp"

namespace windsteer {

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal via Box-Muller. No caching: exactly two draws per call.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Uniform integer in [0, n).
    uint64_t integer(uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::integer: n must be > 0");
        // rejection sampling to avoid modulo bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(integer(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace windsteer
