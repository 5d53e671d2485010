#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "dseg/kernels.hpp"

namespace dseg::kernels {

namespace avx2 {
bool supported() {
#if defined(DSEG_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

#if !defined(DSEG_HAVE_AVX2)
// Never reached: supported() is false, so dispatch stays on the scalar path.
void gemm(Trans, Trans, int, int, int, float, const float*, int, const float*, int, float, float*, int) {
    throw std::logic_error("AVX2 kernels not built");
}
void gemm(Trans, Trans, int, int, int, double, const double*, int, const double*, int, double, double*, int) {
    throw std::logic_error("AVX2 kernels not built");
}
void axpy(std::size_t, float, const float*, float*) { throw std::logic_error("AVX2 kernels not built"); }
void add(std::size_t, const float*, const float*, float*) { throw std::logic_error("AVX2 kernels not built"); }
void mul(std::size_t, const float*, const float*, float*) { throw std::logic_error("AVX2 kernels not built"); }
void relu(std::size_t, const float*, float*) { throw std::logic_error("AVX2 kernels not built"); }
float dot(std::size_t, const float*, const float*) { throw std::logic_error("AVX2 kernels not built"); }
#endif
}  // namespace avx2

namespace {

Isa initial_isa() {
    if (const char* env = std::getenv("DSEG_ISA"); env && std::string(env) == "scalar") {
        return Isa::scalar;
    }
    return detected_isa();
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

bool use_avx2() { return active().load(std::memory_order_relaxed) == Isa::avx2; }

}  // namespace

Isa detected_isa() { return avx2::supported() ? Isa::avx2 : Isa::scalar; }

Isa active_isa() { return active().load(); }

void set_isa(Isa isa) {
    if (isa == Isa::avx2 && !avx2::supported()) {
        throw std::runtime_error("set_isa: AVX2/FMA not supported on this CPU");
    }
    active().store(isa);
}

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

template <>
void gemm<float>(Trans ta, Trans tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    if (use_avx2()) return avx2::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    ref::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(Trans ta, Trans tb, int m, int n, int k, double alpha, const double* a,
                  int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    if (use_avx2()) return avx2::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    ref::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void axpy<float>(std::size_t n, float alpha, const float* x, float* y) {
    if (use_avx2()) return avx2::axpy(n, alpha, x, y);
    ref::axpy(n, alpha, x, y);
}
template <>
void axpy<double>(std::size_t n, double alpha, const double* x, double* y) {
    ref::axpy(n, alpha, x, y);
}

template <>
void add<float>(std::size_t n, const float* a, const float* b, float* out) {
    if (use_avx2()) return avx2::add(n, a, b, out);
    ref::add(n, a, b, out);
}
template <>
void add<double>(std::size_t n, const double* a, const double* b, double* out) {
    ref::add(n, a, b, out);
}

template <>
void mul<float>(std::size_t n, const float* a, const float* b, float* out) {
    if (use_avx2()) return avx2::mul(n, a, b, out);
    ref::mul(n, a, b, out);
}
template <>
void mul<double>(std::size_t n, const double* a, const double* b, double* out) {
    ref::mul(n, a, b, out);
}

template <>
void relu<float>(std::size_t n, const float* x, float* out) {
    if (use_avx2()) return avx2::relu(n, x, out);
    ref::relu(n, x, out);
}
template <>
void relu<double>(std::size_t n, const double* x, double* out) {
    ref::relu(n, x, out);
}

template <>
float dot<float>(std::size_t n, const float* x, const float* y) {
    if (use_avx2()) return avx2::dot(n, x, y);
    return ref::dot(n, x, y);
}
template <>
double dot<double>(std::size_t n, const double* x, const double* y) {
    return ref::dot(n, x, y);
}

}  // namespace dseg::kernels
