#include "imtsforge/kernels.hpp"

#if defined(__x86_64__) || defined(__amd64__)

#include <immintrin.h>

// AVX2 kernels. A __m256d holds the four reference lanes; mul/add stay
// separate (no vfmadd) so each lane computes exactly the scalar sequence.
namespace imts::kernels::detail {
namespace {

double reduce_lanes(__m256d acc) {
    double lanes[4];
    _mm256_storeu_pd(lanes, acc);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum_impl(const double* xs, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(xs + i));
    double s = reduce_lanes(acc);
    for (; i < n; ++i) s += xs[i];
    return s;
}

double sum_sq_dev_impl(const double* xs, std::size_t n, double mean) {
    const __m256d vmean = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vmean);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = reduce_lanes(acc);
    for (; i < n; ++i) {
        const double d = xs[i] - mean;
        s += d * d;
    }
    return s;
}

double sum_sq_diff_impl(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = reduce_lanes(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void divided_differences_impl(const double* xs, std::size_t n, double inv_eps, double* out) {
    if (n < 2) return;
    const std::size_t k = n - 1;
    const __m256d vinv = _mm256_set1_pd(inv_eps);
    std::size_t i = 0;
    const std::size_t k4 = k & ~std::size_t{3};
    for (; i < k4; i += 4) {
        const __m256d hi = _mm256_loadu_pd(xs + i + 1);
        const __m256d lo = _mm256_loadu_pd(xs + i);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(hi, lo), vinv));
    }
    for (; i < k; ++i) out[i] = (xs[i + 1] - xs[i]) * inv_eps;
}

void scale_shift_impl(double* xs, std::size_t n, double scale, double shift) {
    const __m256d vscale = _mm256_set1_pd(scale);
    const __m256d vshift = _mm256_set1_pd(shift);
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const __m256d v = _mm256_loadu_pd(xs + i);
        _mm256_storeu_pd(xs + i, _mm256_add_pd(_mm256_mul_pd(v, vscale), vshift));
    }
    for (; i < n; ++i) xs[i] = xs[i] * scale + shift;
}

std::size_t count_outside_impl(const double* xs, std::size_t n, double lo, double hi) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    std::size_t count = 0;
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const __m256d v = _mm256_loadu_pd(xs + i);
        const __m256d below = _mm256_cmp_pd(v, vlo, _CMP_LT_OQ);
        const __m256d above = _mm256_cmp_pd(v, vhi, _CMP_GT_OQ);
        const int mask = _mm256_movemask_pd(_mm256_or_pd(below, above));
        count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
    }
    for (; i < n; ++i) {
        if (xs[i] < lo || xs[i] > hi) ++count;
    }
    return count;
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{
        sum_impl,          sum_sq_dev_impl, sum_sq_diff_impl,
        divided_differences_impl, scale_shift_impl, count_outside_impl,
    };
    return ops;
}

}  // namespace imts::kernels::detail

#endif  // x86_64
