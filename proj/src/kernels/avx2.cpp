// AVX2 + FMA kernels (GEMM in float and double, elementwise in float). This translation unit is compiled with
// -mavx2 -mfma; nothing here may run before avx2::supported() is checked.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "dseg/kernels.hpp"

namespace dseg::kernels::avx2 {

namespace {

constexpr int kMr = 6;
constexpr int kMc = 144;
constexpr int kKc = 256;
constexpr int kNc = 2048;

// Register tile width: two vectors per row of the 6-row tile.
template <class T>
constexpr int kNr = 16;
template <>
constexpr int kNr<double> = 8;

// A sliver layout: [kc][kMr], alpha folded in, rows past m zero-filled.
template <class T>
void pack_a(Trans ta, const T* a, int lda, int i0, int mc, int p0, int kc, int m, T alpha, T* out) {
    for (int s = 0; s < mc; s += kMr) {
        const int rows = std::min({kMr, mc - s, m - i0 - s});
        if (ta == Trans::no) {
            for (int r = 0; r < rows; ++r) {
                const T* src = a + static_cast<std::size_t>(i0 + s + r) * lda + p0;
                for (int p = 0; p < kc; ++p) out[p * kMr + r] = alpha * src[p];
            }
        } else {
            for (int p = 0; p < kc; ++p) {
                const T* src = a + static_cast<std::size_t>(p0 + p) * lda + i0 + s;
                for (int r = 0; r < rows; ++r) out[p * kMr + r] = alpha * src[r];
            }
        }
        for (int r = std::max(rows, 0); r < kMr; ++r) {
            for (int p = 0; p < kc; ++p) out[p * kMr + r] = T(0);
        }
        out += static_cast<std::size_t>(kc) * kMr;
    }
}

// B sliver layout: [kc][kNr], columns past n zero-filled.
template <class T>
void pack_b(Trans tb, const T* b, int ldb, int p0, int kc, int j0, int nc, T* out) {
    constexpr int nr = kNr<T>;
    for (int s = 0; s < nc; s += nr) {
        const int cols = std::min(nr, nc - s);
        if (tb == Trans::no) {
            for (int p = 0; p < kc; ++p) {
                const T* src = b + static_cast<std::size_t>(p0 + p) * ldb + j0 + s;
                T* dst = out + static_cast<std::size_t>(p) * nr;
                std::copy_n(src, cols, dst);
                std::fill(dst + cols, dst + nr, T(0));
            }
        } else {
            // Walk each source row contiguously; the sliver is written column-wise.
            for (int c = 0; c < cols; ++c) {
                const T* src = b + static_cast<std::size_t>(j0 + s + c) * ldb + p0;
                for (int p = 0; p < kc; ++p) out[static_cast<std::size_t>(p) * nr + c] = src[p];
            }
            for (int c = cols; c < nr; ++c) {
                for (int p = 0; p < kc; ++p) out[static_cast<std::size_t>(p) * nr + c] = T(0);
            }
        }
        out += static_cast<std::size_t>(kc) * nr;
    }
}

// Writes a finished tile: C = acc + scale * C (scale 0 means overwrite).
template <class T>
void store_tile(const T (&tmp)[kMr][kNr<T>], T* c, int ldc, T scale, int mr, int nr) {
    for (int r = 0; r < mr; ++r) {
        T* crow = c + static_cast<std::size_t>(r) * ldc;
        for (int j = 0; j < nr; ++j) crow[j] = scale == T(0) ? tmp[r][j] : tmp[r][j] + scale * crow[j];
    }
}

void micro_kernel(int kc, const float* ap, const float* bp, float* c, int ldc, float scale, int mr, int nr) {
    __m256 acc[kMr][2];
    for (auto& row : acc) row[0] = row[1] = _mm256_setzero_ps();

    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_loadu_ps(bp);
        const __m256 b1 = _mm256_loadu_ps(bp + 8);
        for (int r = 0; r < kMr; ++r) {
            const __m256 av = _mm256_broadcast_ss(ap + r);
            acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
        }
        ap += kMr;
        bp += 16;
    }

    if (mr == kMr && nr == 16) {
        const __m256 vs = _mm256_set1_ps(scale);
        for (int r = 0; r < kMr; ++r) {
            float* crow = c + static_cast<std::size_t>(r) * ldc;
            if (scale == 0.0f) {
                _mm256_storeu_ps(crow, acc[r][0]);
                _mm256_storeu_ps(crow + 8, acc[r][1]);
            } else {
                _mm256_storeu_ps(crow, _mm256_fmadd_ps(vs, _mm256_loadu_ps(crow), acc[r][0]));
                _mm256_storeu_ps(crow + 8, _mm256_fmadd_ps(vs, _mm256_loadu_ps(crow + 8), acc[r][1]));
            }
        }
        return;
    }
    alignas(32) float tmp[kMr][16];
    for (int r = 0; r < kMr; ++r) {
        _mm256_store_ps(tmp[r], acc[r][0]);
        _mm256_store_ps(tmp[r] + 8, acc[r][1]);
    }
    store_tile<float>(tmp, c, ldc, scale, mr, nr);
}

void micro_kernel(int kc, const double* ap, const double* bp, double* c, int ldc, double scale, int mr,
                  int nr) {
    __m256d acc[kMr][2];
    for (auto& row : acc) row[0] = row[1] = _mm256_setzero_pd();

    for (int p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        for (int r = 0; r < kMr; ++r) {
            const __m256d av = _mm256_broadcast_sd(ap + r);
            acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
        }
        ap += kMr;
        bp += 8;
    }

    if (mr == kMr && nr == 8) {
        const __m256d vs = _mm256_set1_pd(scale);
        for (int r = 0; r < kMr; ++r) {
            double* crow = c + static_cast<std::size_t>(r) * ldc;
            if (scale == 0.0) {
                _mm256_storeu_pd(crow, acc[r][0]);
                _mm256_storeu_pd(crow + 4, acc[r][1]);
            } else {
                _mm256_storeu_pd(crow, _mm256_fmadd_pd(vs, _mm256_loadu_pd(crow), acc[r][0]));
                _mm256_storeu_pd(crow + 4, _mm256_fmadd_pd(vs, _mm256_loadu_pd(crow + 4), acc[r][1]));
            }
        }
        return;
    }
    alignas(32) double tmp[kMr][8];
    for (int r = 0; r < kMr; ++r) {
        _mm256_store_pd(tmp[r], acc[r][0]);
        _mm256_store_pd(tmp[r] + 4, acc[r][1]);
    }
    store_tile<double>(tmp, c, ldc, scale, mr, nr);
}

template <class T>
void gemm_blocked(Trans ta, Trans tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
                  T beta, T* c, int ldc) {
    constexpr int nr_max = kNr<T>;
    if (m <= 0 || n <= 0) return;
    if (k <= 0 || alpha == T(0)) {
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::size_t>(i) * ldc;
            for (int j = 0; j < n; ++j) crow[j] = beta == T(0) ? T(0) : beta * crow[j];
        }
        return;
    }

    thread_local std::vector<T> a_pack;
    thread_local std::vector<T> b_pack;
    a_pack.resize(static_cast<std::size_t>(kMc) * kKc);
    b_pack.resize(static_cast<std::size_t>(kKc) * (kNc + nr_max));

    for (int jc = 0; jc < n; jc += kNc) {
        const int nc = std::min(kNc, n - jc);
        for (int pc = 0; pc < k; pc += kKc) {
            const int kc = std::min(kKc, k - pc);
            const T scale = pc == 0 ? beta : T(1);
            pack_b(tb, b, ldb, pc, kc, jc, nc, b_pack.data());
            for (int ic = 0; ic < m; ic += kMc) {
                const int mc = std::min(kMc, m - ic);
                pack_a(ta, a, lda, ic, mc, pc, kc, m, alpha, a_pack.data());
                for (int jr = 0; jr < nc; jr += nr_max) {
                    const int nr = std::min(nr_max, nc - jr);
                    const T* bp = b_pack.data() + static_cast<std::size_t>(jr) * kc;
                    for (int ir = 0; ir < mc; ir += kMr) {
                        const int mr = std::min(kMr, mc - ir);
                        const T* ap = a_pack.data() + static_cast<std::size_t>(ir) * kc;
                        T* cp = c + static_cast<std::size_t>(ic + ir) * ldc + jc + jr;
                        micro_kernel(kc, ap, bp, cp, ldc, scale, mr, nr);
                    }
                }
            }
        }
    }
}

}  // namespace

void gemm(Trans ta, Trans tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
    gemm_blocked(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(Trans ta, Trans tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    gemm_blocked(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add(std::size_t n, const float* a, const float* b, float* out) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(std::size_t n, const float* a, const float* b, float* out) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu(std::size_t n, const float* x, float* out) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

float dot(std::size_t n, const float* x, const float* y) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    acc0 = _mm256_add_ps(acc0, acc1);
    __m128 lo = _mm_add_ps(_mm256_castps256_ps128(acc0), _mm256_extractf128_ps(acc0, 1));
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    float s = _mm_cvtss_f32(lo);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace dseg::kernels::avx2
