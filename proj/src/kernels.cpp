#include "imtsforge/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace imts::kernels {
namespace {

Backend detect_best() {
#if defined(__x86_64__) || defined(__amd64__)
    if (__builtin_cpu_supports("avx2")) return Backend::avx2;
#elif defined(__aarch64__)
    return Backend::neon;
#endif
    return Backend::scalar;
}

Backend initial_backend() {
    if (const char* env = std::getenv("IMTS_FORGE_KERNELS")) {
        const std::string_view name(env);
        for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
            if (name == backend_name(b) && backend_available(b)) return b;
        }
    }
    return detect_best();
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> backend{initial_backend()};
    return backend;
}

}  // namespace

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(__amd64__)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const Ops& backend_ops(Backend b) {
    if (!backend_available(b)) {
        throw std::invalid_argument("kernel backend unavailable on this host: " +
                                    std::string(backend_name(b)));
    }
    switch (b) {
        case Backend::scalar:
            return detail::scalar_ops();
        case Backend::avx2:
#if defined(__x86_64__) || defined(__amd64__)
            return detail::avx2_ops();
#else
            break;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return detail::neon_ops();
#else
            break;
#endif
    }
    return detail::scalar_ops();
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void force_backend(Backend b) {
    backend_ops(b);  // validate availability
    current().store(b, std::memory_order_relaxed);
}

const Ops& active() { return backend_ops(active_backend()); }

}  // namespace imts::kernels
