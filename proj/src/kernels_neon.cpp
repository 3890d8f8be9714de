#include "imtsforge/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

// NEON kernels. float64x2_t is two lanes wide, so a pair of registers
// carries the four reference lanes: acc01 holds lanes 0/1, acc23 lanes 2/3.
namespace imts::kernels::detail {
namespace {

double reduce_lanes(float64x2_t acc01, float64x2_t acc23) {
    return vaddvq_f64(acc01) + vaddvq_f64(acc23);
}

double sum_impl(const double* xs, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        acc01 = vaddq_f64(acc01, vld1q_f64(xs + i));
        acc23 = vaddq_f64(acc23, vld1q_f64(xs + i + 2));
    }
    double s = reduce_lanes(acc01, acc23);
    for (; i < n; ++i) s += xs[i];
    return s;
}

double sum_sq_dev_impl(const double* xs, std::size_t n, double mean) {
    const float64x2_t vmean = vdupq_n_f64(mean);
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const float64x2_t d01 = vsubq_f64(vld1q_f64(xs + i), vmean);
        const float64x2_t d23 = vsubq_f64(vld1q_f64(xs + i + 2), vmean);
        acc01 = vaddq_f64(acc01, vmulq_f64(d01, d01));
        acc23 = vaddq_f64(acc23, vmulq_f64(d23, d23));
    }
    double s = reduce_lanes(acc01, acc23);
    for (; i < n; ++i) {
        const double d = xs[i] - mean;
        s += d * d;
    }
    return s;
}

double sum_sq_diff_impl(const double* a, const double* b, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const float64x2_t d01 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        const float64x2_t d23 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
        acc01 = vaddq_f64(acc01, vmulq_f64(d01, d01));
        acc23 = vaddq_f64(acc23, vmulq_f64(d23, d23));
    }
    double s = reduce_lanes(acc01, acc23);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void divided_differences_impl(const double* xs, std::size_t n, double inv_eps, double* out) {
    if (n < 2) return;
    const std::size_t k = n - 1;
    const float64x2_t vinv = vdupq_n_f64(inv_eps);
    std::size_t i = 0;
    const std::size_t k2 = k & ~std::size_t{1};
    for (; i < k2; i += 2) {
        const float64x2_t hi = vld1q_f64(xs + i + 1);
        const float64x2_t lo = vld1q_f64(xs + i);
        vst1q_f64(out + i, vmulq_f64(vsubq_f64(hi, lo), vinv));
    }
    for (; i < k; ++i) out[i] = (xs[i + 1] - xs[i]) * inv_eps;
}

void scale_shift_impl(double* xs, std::size_t n, double scale, double shift) {
    const float64x2_t vscale = vdupq_n_f64(scale);
    const float64x2_t vshift = vdupq_n_f64(shift);
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t{1};
    for (; i < n2; i += 2) {
        const float64x2_t v = vld1q_f64(xs + i);
        vst1q_f64(xs + i, vaddq_f64(vmulq_f64(v, vscale), vshift));
    }
    for (; i < n; ++i) xs[i] = xs[i] * scale + shift;
}

std::size_t count_outside_impl(const double* xs, std::size_t n, double lo, double hi) {
    const float64x2_t vlo = vdupq_n_f64(lo);
    const float64x2_t vhi = vdupq_n_f64(hi);
    std::size_t count = 0;
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t{1};
    for (; i < n2; i += 2) {
        const float64x2_t v = vld1q_f64(xs + i);
        const uint64x2_t outside = vorrq_u64(vcltq_f64(v, vlo), vcgtq_f64(v, vhi));
        count += (vgetq_lane_u64(outside, 0) & 1u) + (vgetq_lane_u64(outside, 1) & 1u);
    }
    for (; i < n; ++i) {
        if (xs[i] < lo || xs[i] > hi) ++count;
    }
    return count;
}

}  // namespace

const Ops& neon_ops() {
    static const Ops ops{
        sum_impl,          sum_sq_dev_impl, sum_sq_diff_impl,
        divided_differences_impl, scale_shift_impl, count_outside_impl,
    };
    return ops;
}

}  // namespace imts::kernels::detail

#endif  // aarch64
