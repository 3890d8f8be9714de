#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the scoring and evaluation pipeline.
//
// Every kernel is defined by the *scalar reference algorithm* in
// kernels_scalar.cpp. Reductions use four independent accumulators striding
// over blocks of four elements, combined as (l0 + l1) + (l2 + l3), with the
// tail folded in sequentially afterwards. The SIMD backends implement the
// same operation sequence (no FMA contraction), so all backends return
// bit-identical results and outputs do not depend on which backend the host
// selects at runtime.
namespace imts::kernels {

enum class Backend { scalar, avx2, neon };

struct Ops {
    // sum of xs[0..n)
    double (*sum)(const double* xs, std::size_t n);
    // sum of (xs[i] - mean)^2
    double (*sum_sq_dev)(const double* xs, std::size_t n, double mean);
    // sum of (a[i] - b[i])^2
    double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
    // out[i] = (xs[i+1] - xs[i]) * inv_eps, n-1 outputs
    void (*divided_differences)(const double* xs, std::size_t n, double inv_eps, double* out);
    // xs[i] = xs[i] * scale + shift, in place
    void (*scale_shift)(double* xs, std::size_t n, double scale, double shift);
    // number of elements with xs[i] < lo or xs[i] > hi (strict)
    std::size_t (*count_outside)(const double* xs, std::size_t n, double lo, double hi);
};

bool backend_available(Backend b);
const Ops& backend_ops(Backend b);  // throws std::invalid_argument if unavailable
std::string_view backend_name(Backend b);

// Active backend: best available at startup, overridable via the
// IMTS_FORGE_KERNELS environment variable (scalar|avx2|neon) or force_backend.
Backend active_backend();
void force_backend(Backend b);
const Ops& active();

// Convenience wrappers over the active backend.
inline double sum(std::span<const double> xs) {
    return active().sum(xs.data(), xs.size());
}

inline double mean(std::span<const double> xs) {
    return sum(xs) / static_cast<double>(xs.size());
}

// population standard deviation (divide by n)
inline double population_std(std::span<const double> xs) {
    const double m = mean(xs);
    return std::sqrt(active().sum_sq_dev(xs.data(), xs.size(), m) / static_cast<double>(xs.size()));
}

inline double sum_sq_dev(std::span<const double> xs, double m) {
    return active().sum_sq_dev(xs.data(), xs.size(), m);
}

inline double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    return active().sum_sq_diff(a.data(), b.data(), a.size());
}

inline void divided_differences(std::span<const double> xs, double inv_eps, std::span<double> out) {
    active().divided_differences(xs.data(), xs.size(), inv_eps, out.data());
}

inline void scale_shift(std::span<double> xs, double scale, double shift) {
    active().scale_shift(xs.data(), xs.size(), scale, shift);
}

inline std::size_t count_outside(std::span<const double> xs, double lo, double hi) {
    return active().count_outside(xs.data(), xs.size(), lo, hi);
}

namespace detail {
const Ops& scalar_ops();
#if defined(__x86_64__) || defined(__amd64__)
const Ops& avx2_ops();
#endif
#if defined(__aarch64__)
const Ops& neon_ops();
#endif
}  // namespace detail

}  // namespace imts::kernels
