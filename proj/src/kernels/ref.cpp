#include "dseg/kernels.hpp"

#include <algorithm>

namespace dseg::kernels::ref {

template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * ldc;
        if (beta == T(0)) {
            std::fill(crow, crow + n, T(0));
        } else if (beta != T(1)) {
            for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
        for (int p = 0; p < k; ++p) {
            const T av = ta == Trans::no ? a[static_cast<std::size_t>(i) * lda + p]
                                         : a[static_cast<std::size_t>(p) * lda + i];
            const T s = alpha * av;
            if (s == T(0)) continue;
            if (tb == Trans::no) {
                const T* brow = b + static_cast<std::size_t>(p) * ldb;
                for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
            } else {
                for (int j = 0; j < n; ++j) crow[j] += s * b[static_cast<std::size_t>(j) * ldb + p];
            }
        }
    }
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void add(std::size_t n, const T* a, const T* b, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void mul(std::size_t n, const T* a, const T* b, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void relu(std::size_t n, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

#define DSEG_REF_INSTANTIATE(T)                                                            \
    template void gemm<T>(Trans, Trans, int, int, int, T, const T*, int, const T*, int, T, \
                          T*, int);                                                        \
    template void axpy<T>(std::size_t, T, const T*, T*);                                   \
    template void add<T>(std::size_t, const T*, const T*, T*);                             \
    template void mul<T>(std::size_t, const T*, const T*, T*);                             \
    template void relu<T>(std::size_t, const T*, T*);                                      \
    template T dot<T>(std::size_t, const T*, const T*);

DSEG_REF_INSTANTIATE(float)
DSEG_REF_INSTANTIATE(double)

}  // namespace dseg::kernels::ref
