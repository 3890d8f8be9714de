#include "imtsforge/kernels.hpp"

// Reference kernels. These define the exact operation order every other
// backend must reproduce bit-for-bit; keep them free of FMA contraction
// (enforced by -ffp-contract=off on this translation unit).
namespace imts::kernels::detail {
namespace {

double sum_impl(const double* xs, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        a0 += xs[i];
        a1 += xs[i + 1];
        a2 += xs[i + 2];
        a3 += xs[i + 3];
    }
    double s = (a0 + a1) + (a2 + a3);
    for (; i < n; ++i) s += xs[i];
    return s;
}

double sum_sq_dev_impl(const double* xs, std::size_t n, double mean) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const double d0 = xs[i] - mean;
        const double d1 = xs[i + 1] - mean;
        const double d2 = xs[i + 2] - mean;
        const double d3 = xs[i + 3] - mean;
        a0 += d0 * d0;
        a1 += d1 * d1;
        a2 += d2 * d2;
        a3 += d3 * d3;
    }
    double s = (a0 + a1) + (a2 + a3);
    for (; i < n; ++i) {
        const double d = xs[i] - mean;
        s += d * d;
    }
    return s;
}

double sum_sq_diff_impl(const double* a, const double* b, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const double d0 = a[i] - b[i];
        const double d1 = a[i + 1] - b[i + 1];
        const double d2 = a[i + 2] - b[i + 2];
        const double d3 = a[i + 3] - b[i + 3];
        a0 += d0 * d0;
        a1 += d1 * d1;
        a2 += d2 * d2;
        a3 += d3 * d3;
    }
    double s = (a0 + a1) + (a2 + a3);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void divided_differences_impl(const double* xs, std::size_t n, double inv_eps, double* out) {
    if (n < 2) return;
    const std::size_t k = n - 1;
    for (std::size_t i = 0; i < k; ++i) out[i] = (xs[i + 1] - xs[i]) * inv_eps;
}

void scale_shift_impl(double* xs, std::size_t n, double scale, double shift) {
    for (std::size_t i = 0; i < n; ++i) xs[i] = xs[i] * scale + shift;
}

std::size_t count_outside_impl(const double* xs, std::size_t n, double lo, double hi) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (xs[i] < lo || xs[i] > hi) ++count;
    }
    return count;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{
        sum_impl,          sum_sq_dev_impl, sum_sq_diff_impl,
        divided_differences_impl, scale_shift_impl, count_outside_impl,
    };
    return ops;
}

}  // namespace imts::kernels::detail
