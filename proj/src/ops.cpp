#include "dseg/ops.hpp"

#include <cmath>
#include <limits>

#include "dseg/kernels.hpp"

namespace dseg::ops {

namespace {

using kernels::Trans;

template <class T>
void im2col(const T* src, int channels, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* cols) {
    for (int c = 0; c < channels; ++c) {
        const T* plane = src + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    T* dst = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, T(0));
                        continue;
                    }
                    const T* srow = plane + static_cast<std::size_t>(iy) * w;
                    if (stride == 1) {
                        // Contiguous interior run, zero-padded at both ends.
                        const int lo = std::max(0, pad - kx);
                        const int hi = std::min(wo, w + pad - kx);
                        std::fill(dst, dst + std::max(lo, 0), T(0));
                        if (hi > lo) std::copy(srow + lo - pad + kx, srow + hi - pad + kx, dst + lo);
                        if (hi < wo) std::fill(dst + std::max(hi, lo), dst + wo, T(0));
                    } else {
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            dst[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* cols, int channels, int h, int w, int k, int stride, int pad, int ho,
                int wo, T* dst) {
    for (int c = 0; c < channels; ++c) {
        T* plane = dst + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ho * wo;
                // Output columns whose source column ox * stride - pad + kx lies inside the image.
                const int lo = std::max(0, (pad - kx + stride - 1) / stride);
                const int hi = std::min(wo, (w - 1 + pad - kx) / stride + 1);
                if (hi <= lo) continue;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* drow = plane + static_cast<std::size_t>(iy) * w - pad + kx;
                    const T* srow = row + static_cast<std::size_t>(oy) * wo;
                    if (stride == 1) {
                        for (int ox = lo; ox < hi; ++ox) drow[ox] += srow[ox];
                    } else {
                        for (int ox = lo; ox < hi; ++ox) drow[ox * stride] += srow[ox];
                    }
                }
            }
        }
    }
}

/// Per-thread buffer reused across calls; contents are not preserved.
template <class T>
T* scratch(std::size_t n) {
    thread_local std::vector<T, DefaultInitAllocator<T>> buf;
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

template <class T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src, T alpha = T(1)) {
    kernels::axpy(dst.numel(), alpha, src.data(), dst.data());
}

void check_same(const Shape& a, const Shape& b, const char* what) {
    DSEG_CHECK(a == b, std::string(what) + " shape mismatch " + a.str() + " vs " + b.str());
}

struct Lerp {
    int i0, i1;
    double t;
};

// Half-pixel source coordinates, clamped like the common deep-learning resize.
std::vector<Lerp> lerp_table(int in, int out) {
    std::vector<Lerp> table(out);
    const double ratio = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * ratio - 0.5;
        if (src < 0) src = 0;
        int i0 = static_cast<int>(src);
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = std::min(i0 + 1, in - 1);
        table[o] = {i0, i1, src - i0};
    }
    return table;
}

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    DSEG_CHECK(ws.c == xs.c, "input channels " + std::to_string(xs.c) + " vs weight " + ws.str());
    DSEG_CHECK(ws.h == ws.w, "square kernels only");
    DSEG_CHECK(stride >= 1 && pad >= 0, "bad stride/pad");
    const int k = ws.h;
    const int ho = (xs.h + 2 * pad - k) / stride + 1;
    const int wo = (xs.w + 2 * pad - k) / stride + 1;
    DSEG_CHECK(ho > 0 && wo > 0, "input " + xs.str() + " too small for kernel");
    const Shape os{xs.n, ws.n, ho, wo};
    MacCounter::record(static_cast<std::uint64_t>(os.numel()) * xs.c * k * k);
    if (x.is_meta() || weight.is_meta()) return Var<T>(Tensor<T>::meta(os));
    if (bias.defined()) DSEG_CHECK(bias.value().numel() == static_cast<std::size_t>(ws.n), "bias size");

    const int kdim = xs.c * k * k;
    const int pix = ho * wo;
    const bool direct = k == 1 && stride == 1 && pad == 0;
    auto y = Tensor<T>::uninit(os);
    T* cols = direct ? nullptr : scratch<T>(static_cast<std::size_t>(kdim) * pix);
    const Tensor<T>& xv = x.value();
    const T* wv = weight.value().data();
    for (int n = 0; n < xs.n; ++n) {
        const T* src = xv.plane(n, 0);
        if (!direct) {
            im2col(src, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, cols);
            src = cols;
        }
        T* dst = y.plane(n, 0);
        kernels::gemm(Trans::no, Trans::no, ws.n, pix, kdim, T(1), wv, kdim, src, pix, T(0), dst,
                      pix);
        if (bias.defined()) {
            const T* bv = bias.value().data();
            for (int c = 0; c < ws.n; ++c) {
                T* p = dst + static_cast<std::size_t>(c) * pix;
                for (int i = 0; i < pix; ++i) p[i] += bv[c];
            }
        }
    }

    std::vector<Var<T>> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_result<T>(std::move(y), std::move(parents), [x, weight, bias, stride, pad, k, ho,
                                                               wo, direct](Node<T>& out) {
        const Shape xs = x.shape();
        const Shape ws = weight.shape();
        const int kdim = xs.c * k * k;
        const int pix = ho * wo;
        const Tensor<T>& gy = out.grad;
        const bool need_x = x.requires_grad();
        const bool need_w = weight.requires_grad();
        const bool need_b = bias.defined() && bias.requires_grad();
        T* gw = need_w ? weight.node()->grad_buffer().data() : nullptr;
        T* gb = need_b ? bias.node()->grad_buffer().data() : nullptr;
        Tensor<T>* gx = need_x ? &x.node()->grad_buffer() : nullptr;
        T* cols = direct ? nullptr : scratch<T>(static_cast<std::size_t>(kdim) * pix);
        const T* wv = weight.value().data();
        for (int n = 0; n < xs.n; ++n) {
            const T* gyn = gy.plane(n, 0);
            if (need_w) {
                const T* src = x.value().plane(n, 0);
                if (!direct) {
                    im2col(src, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, cols);
                    src = cols;
                }
                kernels::gemm(Trans::no, Trans::yes, ws.n, kdim, pix, T(1), gyn, pix, src, pix,
                              T(1), gw, kdim);
            }
            if (need_x) {
                T* gxn = gx->plane(n, 0);
                if (direct) {
                    kernels::gemm(Trans::yes, Trans::no, kdim, pix, ws.n, T(1), wv, kdim, gyn, pix,
                                  T(1), gxn, pix);
                } else {
                    kernels::gemm(Trans::yes, Trans::no, kdim, pix, ws.n, T(1), wv, kdim, gyn, pix,
                                  T(0), cols, pix);
                    col2im_add(cols, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, gxn);
                }
            }
            if (need_b) {
                for (int c = 0; c < ws.n; ++c) {
                    const T* p = gyn + static_cast<std::size_t>(c) * pix;
                    T s = 0;
                    for (int i = 0; i < pix; ++i) s += p[i];
                    gb[c] += s;
                }
            }
        }
    });
}

template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormStats<T>& stats, bool training, T momentum, T eps, bool fuse_relu) {
    const Shape xs = x.shape();
    DSEG_CHECK(gamma.value().numel() == static_cast<std::size_t>(xs.c), "gamma size");
    if (x.is_meta()) return Var<T>(Tensor<T>::meta(xs));
    if (stats.mean.numel() != static_cast<std::size_t>(xs.c)) {
        stats.mean = Tensor<T>(1, xs.c, 1, 1, T(0));
        stats.var = Tensor<T>(1, xs.c, 1, 1, T(1));
    }
    const std::size_t hw = xs.plane();
    const std::size_t count = hw * xs.n;
    std::vector<T> mean(xs.c), invstd(xs.c);
    const Tensor<T>& xv = x.value();
    if (training) {
        for (int c = 0; c < xs.c; ++c) {
            double s = 0, s2 = 0;
            for (int n = 0; n < xs.n; ++n) {
                const T* p = xv.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) s += p[i];
            }
            const double m = s / static_cast<double>(count);
            for (int n = 0; n < xs.n; ++n) {
                const T* p = xv.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) {
                    const double d = p[i] - m;
                    s2 += d * d;
                }
            }
            const double var = s2 / static_cast<double>(count);
            mean[c] = static_cast<T>(m);
            invstd[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
            const double unbiased = count > 1 ? var * count / (count - 1) : var;
            stats.mean[c] = static_cast<T>((1 - momentum) * stats.mean[c] + momentum * m);
            stats.var[c] = static_cast<T>((1 - momentum) * stats.var[c] + momentum * unbiased);
        }
    } else {
        for (int c = 0; c < xs.c; ++c) {
            mean[c] = stats.mean[c];
            invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats.var[c]) + eps));
        }
    }

    auto y = Tensor<T>::uninit(xs);
    const T* gv = gamma.value().data();
    const T* bv = beta.value().data();
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const T* p = xv.plane(n, c);
            T* o = y.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                const T v = gv[c] * ((p[i] - mean[c]) * invstd[c]) + bv[c];
                o[i] = fuse_relu && v < T(0) ? T(0) : v;
            }
        }
    }

    // x-hat is recomputed from the retained input rather than stored.
    return make_result<T>(std::move(y), {x, gamma, beta},
                          [x, gamma, beta, training, fuse_relu, mean = std::move(mean),
                           invstd = std::move(invstd)](Node<T>& out) {
        const Shape xs = x.shape();
        const std::size_t hw = xs.plane();
        const double count = static_cast<double>(hw * xs.n);
        const Tensor<T>& gy = out.grad;
        const Tensor<T>& xv = x.value();
        const T* gv = gamma.value().data();
        T* gg = gamma.requires_grad() ? gamma.node()->grad_buffer().data() : nullptr;
        T* gbeta = beta.requires_grad() ? beta.node()->grad_buffer().data() : nullptr;
        Tensor<T>* gx = x.requires_grad() ? &x.node()->grad_buffer() : nullptr;
        // With the fused ReLU, gradient flows only where the output is positive.
        auto masked = [&](int n, int c, std::size_t i) {
            const T g = gy.plane(n, c)[i];
            return fuse_relu && !(out.value.plane(n, c)[i] > T(0)) ? T(0) : g;
        };
        std::vector<T> geff(fuse_relu ? hw : 0);
        auto grad_plane = [&](int n, int c) -> const T* {
            if (!fuse_relu) return gy.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) geff[i] = masked(n, c, i);
            return geff.data();
        };
        for (int c = 0; c < xs.c; ++c) {
            const T m = mean[c];
            const T is = invstd[c];
            double sdy = 0, sdyx = 0;
            for (int n = 0; n < xs.n; ++n) {
                const T* p = xv.plane(n, c);
                const T* g = grad_plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) {
                    sdy += g[i];
                    sdyx += static_cast<double>(g[i]) * ((p[i] - m) * is);
                }
            }
            if (gg) gg[c] += static_cast<T>(sdyx);
            if (gbeta) gbeta[c] += static_cast<T>(sdy);
            if (!gx) continue;
            const T k = gv[c] * is;
            const T mdy = static_cast<T>(sdy / count);
            const T mdyx = static_cast<T>(sdyx / count);
            for (int n = 0; n < xs.n; ++n) {
                const T* p = xv.plane(n, c);
                const T* g = grad_plane(n, c);
                T* d = gx->plane(n, c);
                if (training) {
                    for (std::size_t i = 0; i < hw; ++i) d[i] += k * (g[i] - mdy - ((p[i] - m) * is) * mdyx);
                } else {
                    for (std::size_t i = 0; i < hw; ++i) d[i] += k * g[i];
                }
            }
        }
    });
}

template <class T>
Var<T> relu(const Var<T>& x) {
    if (x.is_meta()) return Var<T>(Tensor<T>::meta(x.shape()));
    auto y = Tensor<T>::uninit(x.shape());
    kernels::relu(y.numel(), x.value().data(), y.data());
    return make_result<T>(std::move(y), {x}, [x](Node<T>& out) {
        Tensor<T>& gx = x.node()->grad_buffer();
        const T* yv = out.value.data();
        const T* gy = out.grad.data();
        T* g = gx.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            if (yv[i] > T(0)) g[i] += gy[i];
        }
    });
}

template <class T>
T sigmoid_value(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
    if (x.is_meta()) return Var<T>(Tensor<T>::meta(x.shape()));
    auto y = Tensor<T>::uninit(x.shape());
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = sigmoid_value(xv[i]);
    return make_result<T>(std::move(y), {x}, [x](Node<T>& out) {
        Tensor<T>& gx = x.node()->grad_buffer();
        const T* yv = out.value.data();
        const T* gy = out.grad.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * yv[i] * (T(1) - yv[i]);
    });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check_same(a.shape(), b.shape(), "add");
    if (a.is_meta() || b.is_meta()) return Var<T>(Tensor<T>::meta(a.shape()));
    auto y = Tensor<T>::uninit(a.shape());
    kernels::add(y.numel(), a.value().data(), b.value().data(), y.data());
    return make_result<T>(std::move(y), {a, b}, [a, b](Node<T>& out) {
        if (a.requires_grad()) accumulate(a.node()->grad_buffer(), out.grad);
        if (b.requires_grad()) accumulate(b.node()->grad_buffer(), out.grad);
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    check_same(a.shape(), b.shape(), "sub");
    if (a.is_meta() || b.is_meta()) return Var<T>(Tensor<T>::meta(a.shape()));
    auto y = Tensor<T>::uninit(a.shape());
    const T* av = a.value().data();
    const T* bv = b.value().data();
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = av[i] - bv[i];
    return make_result<T>(std::move(y), {a, b}, [a, b](Node<T>& out) {
        if (a.requires_grad()) accumulate(a.node()->grad_buffer(), out.grad);
        if (b.requires_grad()) accumulate(b.node()->grad_buffer(), out.grad, T(-1));
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    check_same(a.shape(), b.shape(), "mul");
    if (a.is_meta() || b.is_meta()) return Var<T>(Tensor<T>::meta(a.shape()));
    auto y = Tensor<T>::uninit(a.shape());
    kernels::mul(y.numel(), a.value().data(), b.value().data(), y.data());
    return make_result<T>(std::move(y), {a, b}, [a, b](Node<T>& out) {
        const std::size_t n = out.grad.numel();
        T* tmp = scratch<T>(n);
        if (a.requires_grad()) {
            kernels::mul(n, out.grad.data(), b.value().data(), tmp);
            kernels::axpy(n, T(1), tmp, a.node()->grad_buffer().data());
        }
        if (b.requires_grad()) {
            kernels::mul(n, out.grad.data(), a.value().data(), tmp);
            kernels::axpy(n, T(1), tmp, b.node()->grad_buffer().data());
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& x, T s) {
    if (x.is_meta()) return Var<T>(Tensor<T>::meta(x.shape()));
    auto y = Tensor<T>::uninit(x.shape());
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = s * xv[i];
    return make_result<T>(std::move(y), {x}, [x, s](Node<T>& out) {
        accumulate(x.node()->grad_buffer(), out.grad, s);
    });
}

template <class T>
Tensor<T> resize_bilinear_value(const Tensor<T>& x, int out_h, int out_w) {
    const Shape xs = x.shape();
    DSEG_CHECK(out_h > 0 && out_w > 0, "empty output size");
    const Shape os{xs.n, xs.c, out_h, out_w};
    if (x.is_meta()) return Tensor<T>::meta(os);
    if (xs.h == out_h && xs.w == out_w) return x;
    const auto ty = lerp_table(xs.h, out_h);
    const auto tx = lerp_table(xs.w, out_w);
    auto y = Tensor<T>::uninit(os);
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const T* p = x.plane(n, c);
            T* o = y.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const auto [y0, y1, ly] = ty[oy];
                const T* r0 = p + static_cast<std::size_t>(y0) * xs.w;
                const T* r1 = p + static_cast<std::size_t>(y1) * xs.w;
                for (int ox = 0; ox < out_w; ++ox) {
                    const auto [x0, x1, lx] = tx[ox];
                    const double top = (1 - lx) * r0[x0] + lx * r0[x1];
                    const double bot = (1 - lx) * r1[x0] + lx * r1[x1];
                    o[static_cast<std::size_t>(oy) * out_w + ox] =
                        static_cast<T>((1 - ly) * top + ly * bot);
                }
            }
        }
    }
    return y;
}

template <class T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w) {
    Tensor<T> y = resize_bilinear_value(x.value(), out_h, out_w);
    if (y.is_meta()) return Var<T>(std::move(y));
    return make_result<T>(std::move(y), {x}, [x](Node<T>& out) {
        const Shape xs = x.shape();
        const Shape os = out.value.shape();
        Tensor<T>& gx = x.node()->grad_buffer();
        if (xs == os) {
            accumulate(gx, out.grad);
            return;
        }
        const auto ty = lerp_table(xs.h, os.h);
        const auto tx = lerp_table(xs.w, os.w);
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                T* g = gx.plane(n, c);
                const T* go = out.grad.plane(n, c);
                for (int oy = 0; oy < os.h; ++oy) {
                    const auto [y0, y1, ly] = ty[oy];
                    T* r0 = g + static_cast<std::size_t>(y0) * xs.w;
                    T* r1 = g + static_cast<std::size_t>(y1) * xs.w;
                    for (int ox = 0; ox < os.w; ++ox) {
                        const auto [x0, x1, lx] = tx[ox];
                        const double v = go[static_cast<std::size_t>(oy) * os.w + ox];
                        r0[x0] += static_cast<T>((1 - ly) * (1 - lx) * v);
                        r0[x1] += static_cast<T>((1 - ly) * lx * v);
                        r1[x0] += static_cast<T>(ly * (1 - lx) * v);
                        r1[x1] += static_cast<T>(ly * lx * v);
                    }
                }
            }
        }
    });
}

template <class T>
Var<T> max_pool3x3s2(const Var<T>& x) {
    const Shape xs = x.shape();
    const int ho = (xs.h - 1) / 2 + 1;
    const int wo = (xs.w - 1) / 2 + 1;
    const Shape os{xs.n, xs.c, ho, wo};
    if (x.is_meta()) return Var<T>(Tensor<T>::meta(os));
    auto y = Tensor<T>::uninit(os);
    std::vector<std::int32_t> arg(os.numel());
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const T* p = x.value().plane(n, c);
            T* o = y.plane(n, c);
            std::int32_t* a = arg.data() + y.index(n, c, 0, 0);
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::int32_t bi = -1;
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int iy = oy * 2 + dy;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int ix = ox * 2 + dx;
                            if (ix < 0 || ix >= xs.w) continue;
                            const T v = p[iy * xs.w + ix];
                            if (bi < 0 || v > best) {
                                best = v;
                                bi = iy * xs.w + ix;
                            }
                        }
                    }
                    o[oy * wo + ox] = best;
                    a[oy * wo + ox] = bi;
                }
            }
        }
    }
    return make_result<T>(std::move(y), {x}, [x, arg = std::move(arg)](Node<T>& out) {
        const Shape os = out.value.shape();
        Tensor<T>& gx = x.node()->grad_buffer();
        for (int n = 0; n < os.n; ++n) {
            for (int c = 0; c < os.c; ++c) {
                T* g = gx.plane(n, c);
                const T* go = out.grad.plane(n, c);
                const std::int32_t* a = arg.data() + out.value.index(n, c, 0, 0);
                for (std::size_t i = 0; i < os.plane(); ++i) g[a[i]] += go[i];
            }
        }
    });
}

template <class T>
Var<T> avg_pool2x2(const Var<T>& x) {
    const Shape xs = x.shape();
    DSEG_CHECK(xs.h >= 2 && xs.w >= 2, "input " + xs.str() + " too small to pool");
    const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
    if (x.is_meta()) return Var<T>(Tensor<T>::meta(os));
    auto y = Tensor<T>::uninit(os);
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            for (int oy = 0; oy < os.h; ++oy) {
                for (int ox = 0; ox < os.w; ++ox) {
                    const auto& v = x.value();
                    y.at(n, c, oy, ox) = T(0.25) * (v.at(n, c, 2 * oy, 2 * ox) + v.at(n, c, 2 * oy, 2 * ox + 1) +
                                                    v.at(n, c, 2 * oy + 1, 2 * ox) +
                                                    v.at(n, c, 2 * oy + 1, 2 * ox + 1));
                }
            }
        }
    }
    return make_result<T>(std::move(y), {x}, [x](Node<T>& out) {
        const Shape os = out.value.shape();
        Tensor<T>& gx = x.node()->grad_buffer();
        for (int n = 0; n < os.n; ++n) {
            for (int c = 0; c < os.c; ++c) {
                for (int oy = 0; oy < os.h; ++oy) {
                    for (int ox = 0; ox < os.w; ++ox) {
                        const T g = T(0.25) * out.grad.at(n, c, oy, ox);
                        gx.at(n, c, 2 * oy, 2 * ox) += g;
                        gx.at(n, c, 2 * oy, 2 * ox + 1) += g;
                        gx.at(n, c, 2 * oy + 1, 2 * ox) += g;
                        gx.at(n, c, 2 * oy + 1, 2 * ox + 1) += g;
                    }
                }
            }
        }
    });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    const Shape as = a.shape();
    const Shape bs = b.shape();
    DSEG_CHECK(as.n == bs.n && as.h == bs.h && as.w == bs.w,
               "concat shape mismatch " + as.str() + " vs " + bs.str());
    const Shape os{as.n, as.c + bs.c, as.h, as.w};
    if (a.is_meta() || b.is_meta()) return Var<T>(Tensor<T>::meta(os));
    auto y = Tensor<T>::uninit(os);
    const std::size_t asz = static_cast<std::size_t>(as.c) * as.plane();
    const std::size_t bsz = static_cast<std::size_t>(bs.c) * bs.plane();
    for (int n = 0; n < as.n; ++n) {
        std::copy_n(a.value().plane(n, 0), asz, y.plane(n, 0));
        std::copy_n(b.value().plane(n, 0), bsz, y.plane(n, as.c));
    }
    return make_result<T>(std::move(y), {a, b}, [a, b](Node<T>& out) {
        const Shape as = a.shape();
        const Shape bs = b.shape();
        const std::size_t asz = static_cast<std::size_t>(as.c) * as.plane();
        const std::size_t bsz = static_cast<std::size_t>(bs.c) * bs.plane();
        for (int n = 0; n < as.n; ++n) {
            if (a.requires_grad()) {
                kernels::axpy(asz, T(1), out.grad.plane(n, 0), a.node()->grad_buffer().plane(n, 0));
            }
            if (b.requires_grad()) {
                kernels::axpy(bsz, T(1), out.grad.plane(n, as.c), b.node()->grad_buffer().plane(n, 0));
            }
        }
    });
}

template <class T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target) {
    check_same(logits.shape(), target.shape(), "bce");
    if (logits.is_meta()) return Var<T>(Tensor<T>::meta(Shape{1, 1, 1, 1}));
    const T* x = logits.value().data();
    const T* g = target.data();
    const std::size_t n = target.numel();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        s += std::max(xi, 0.0) - xi * g[i] + std::log1p(std::exp(-std::abs(xi)));
    }
    Tensor<T> y(1, 1, 1, 1, static_cast<T>(s / static_cast<double>(n)));
    return make_result<T>(std::move(y), {logits}, [logits, target](Node<T>& out) {
        const T* x = logits.value().data();
        const T* g = target.data();
        const std::size_t n = target.numel();
        const T k = out.grad[0] / static_cast<T>(n);
        T* gx = logits.node()->grad_buffer().data();
        for (std::size_t i = 0; i < n; ++i) gx[i] += k * (sigmoid_value(x[i]) - g[i]);
    });
}

template <class T>
Var<T> iou_with_logits(const Var<T>& logits, const Tensor<T>& target) {
    check_same(logits.shape(), target.shape(), "iou");
    if (logits.is_meta()) return Var<T>(Tensor<T>::meta(Shape{1, 1, 1, 1}));
    const Shape s = target.shape();
    const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
    std::vector<double> inter(s.n, 0.0), uni(s.n, 0.0);
    const T* x = logits.value().data();
    const T* g = target.data();
    double total = 0;
    for (int n = 0; n < s.n; ++n) {
        double sf = 0, sg = 0, sfg = 0;
        for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
            const double f = sigmoid_value(x[i]);
            sf += f;
            sg += g[i];
            sfg += f * g[i];
        }
        inter[n] = sfg;
        uni[n] = sf + sg - sfg;
        total += uni[n] > 0 ? 1.0 - sfg / uni[n] : 0.0;
    }
    Tensor<T> y(1, 1, 1, 1, static_cast<T>(total / s.n));
    return make_result<T>(std::move(y), {logits}, [logits, target, inter = std::move(inter),
                                                  uni = std::move(uni)](Node<T>& out) {
        const Shape s = target.shape();
        const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
        const T* x = logits.value().data();
        const T* g = target.data();
        T* gx = logits.node()->grad_buffer().data();
        const double k = static_cast<double>(out.grad[0]) / s.n;
        for (int n = 0; n < s.n; ++n) {
            const double u = uni[n];
            if (!(u > 0)) continue;
            const double in = inter[n];
            for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
                const double f = sigmoid_value(x[i]);
                const double dratio = (g[i] * u - in * (1.0 - g[i])) / (u * u);
                gx[i] += static_cast<T>(-k * dratio * f * (1.0 - f));
            }
        }
    });
}

#define DSEG_OPS_INSTANTIATE(T)                                                               \
    template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);            \
    template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormStats<T>&, \
                               bool, T, T, bool);                                                 \
    template Var<T> relu(const Var<T>&);                                                      \
    template Var<T> sigmoid(const Var<T>&);                                                   \
    template Var<T> add(const Var<T>&, const Var<T>&);                                        \
    template Var<T> sub(const Var<T>&, const Var<T>&);                                        \
    template Var<T> mul(const Var<T>&, const Var<T>&);                                        \
    template Var<T> scale(const Var<T>&, T);                                                  \
    template Var<T> resize_bilinear(const Var<T>&, int, int);                                 \
    template Var<T> max_pool3x3s2(const Var<T>&);                                             \
    template Var<T> avg_pool2x2(const Var<T>&);                                               \
    template Var<T> concat_channels(const Var<T>&, const Var<T>&);                            \
    template Var<T> bce_with_logits(const Var<T>&, const Tensor<T>&);                         \
    template Var<T> iou_with_logits(const Var<T>&, const Tensor<T>&);                         \
    template Tensor<T> resize_bilinear_value(const Tensor<T>&, int, int);                     \
    template T sigmoid_value(T);

DSEG_OPS_INSTANTIATE(float)
DSEG_OPS_INSTANTIATE(double)

}  // namespace dseg::ops
