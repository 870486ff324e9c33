// Shared scalar types, errors and small utilities used across the library.

#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nfbeam {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.77245385090551602730;
// Rounded propagation speed so the default profile has lambda = 3 mm and
// d = 1.5 mm exactly.
inline constexpr double kSpeedOfLight = 3e8;

// e^{j*3*pi/4}, the ray direction every closed-form expression evaluates
// erf along.
inline const cdouble kRay34 = cdouble(-0.70710678118654752440,
                                      0.70710678118654752440);

// Raised when a sweep contains no usable signal (nothing above threshold).
class no_signal_error : public std::runtime_error {
public:
    explicit no_signal_error(const std::string& what)
        : std::runtime_error(what) {}
};

// Raised when a noise index region is too small for estimation.
class insufficient_noise_region_error : public std::runtime_error {
public:
    explicit insufficient_noise_region_error(const std::string& what)
        : std::runtime_error(what) {}
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// splitmix64; used to derive independent per-trial seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to pre-sized slots so the outcome is independent of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace nfbeam
