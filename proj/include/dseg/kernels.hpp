#pragma once

// Dense arithmetic kernels behind the tensor ops.
//
// Every kernel has a portable scalar reference in `ref::` and, for float,
// a vectorized variant selected at runtime from the host's capabilities.
// The dispatching entry points in `dseg::kernels` are what the rest of the
// library calls; the per-ISA namespaces are exposed for equivalence tests.

#include <cstddef>
#include <string_view>

namespace dseg::kernels {

enum class Isa { scalar, avx2 };

enum class Trans { no, yes };

/// Best ISA supported by this CPU (and compiled in).
Isa detected_isa();
/// ISA currently used by the dispatching entry points.
Isa active_isa();
/// Forces an ISA; throws if the host cannot run it. Honors DSEG_ISA=scalar at startup.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

/// RAII override of the active ISA, for tests and benchmarks.
class IsaScope {
public:
    explicit IsaScope(Isa isa) : saved_(active_isa()) { set_isa(isa); }
    ~IsaScope() { set_isa(saved_); }
    IsaScope(const IsaScope&) = delete;
    IsaScope& operator=(const IsaScope&) = delete;

private:
    Isa saved_;
};

// Row-major C[m x n] = alpha * op(A) * op(B) + beta * C. When beta == 0 the
// prior contents of C are never read.
template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc);

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y);  // y += alpha * x
template <class T>
void add(std::size_t n, const T* a, const T* b, T* out);
template <class T>
void mul(std::size_t n, const T* a, const T* b, T* out);
template <class T>
void relu(std::size_t n, const T* x, T* out);
template <class T>
T dot(std::size_t n, const T* x, const T* y);

namespace ref {
template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc);
template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
template <class T>
void add(std::size_t n, const T* a, const T* b, T* out);
template <class T>
void mul(std::size_t n, const T* a, const T* b, T* out);
template <class T>
void relu(std::size_t n, const T* x, T* out);
template <class T>
T dot(std::size_t n, const T* x, const T* y);
}  // namespace ref

namespace avx2 {
bool supported();
void gemm(Trans ta, Trans tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(Trans ta, Trans tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void add(std::size_t n, const float* a, const float* b, float* out);
void mul(std::size_t n, const float* a, const float* b, float* out);
void relu(std::size_t n, const float* x, float* out);
float dot(std::size_t n, const float* x, const float* y);
}  // namespace avx2

}  // namespace dseg::kernels
