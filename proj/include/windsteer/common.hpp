#pragma once

// Shared small utilities: angles, hashing, simple parallel map.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace windsteer {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wrap an angle in degrees to [0, 360).
inline double wrap_deg(double d) {
    double w = std::fmod(d, 360.0);
    if (w < 0.0) w += 360.0;
    return w;
}

// Signed smallest difference a - b in degrees, result in (-180, 180].
inline double angle_diff_deg(double a, double b) {
    double d = std::fmod(a - b, 360.0);
    if (d <= -180.0) d += 360.0;
    if (d > 180.0) d -= 360.0;
    return d;
}

// Circular mean of angles in degrees, result in [0, 360).
inline double circular_mean_deg(const std::vector<double>& angles) {
    if (angles.empty()) throw std::invalid_argument("circular_mean_deg: empty input");
    double s = 0.0, c = 0.0;
    for (double a : angles) {
        s += std::sin(deg2rad(a));
        c += std::cos(deg2rad(a));
    }
    return wrap_deg(rad2deg(std::atan2(s, c)));
}

// Affine map of x from [lo, hi] to [-1, 1], clipped to the box.
inline double normalize_feature(double x, double lo, double hi) {
    double z = 2.0 * (x - lo) / (hi - lo) - 1.0;
    return z < -1.0 ? -1.0 : (z > 1.0 ? 1.0 : z);
}

inline double denormalize_feature(double z, double lo, double hi) {
    return lo + 0.5 * (z + 1.0) * (hi - lo);
}

inline std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) throw std::invalid_argument("linspace: need n >= 2");
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] = a + (b - a) * static_cast<double>(i) / (n - 1);
    return out;
}

// FNV-1a, used for config fingerprints and seed derivation.
inline uint64_t fnv1a64(std::string_view s, uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

// Derive a child seed from a base seed, a tag and an index.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t h = fnv1a64(tag);
    h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    // final avalanche (splitmix64 tail)
    h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27; h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

// Run fn(i) for i in [0, n) on up to `workers` threads. Falls back to the
// calling thread when workers <= 1. fn must be safe to call concurrently.
inline void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t nthreads = std::min<size_t>(static_cast<size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::vector<std::exception_ptr> errors(nthreads);
    for (size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (size_t i = t; i < n; i += nthreads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace windsteer
