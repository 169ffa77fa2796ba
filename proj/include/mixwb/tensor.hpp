#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mixwb::net {

// Single-sample CHW tensor.
template <typename T>
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, T(0)) {}

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    T* ch(int ci) { return v.data() + static_cast<std::size_t>(ci) * plane(); }
    const T* ch(int ci) const { return v.data() + static_cast<std::size_t>(ci) * plane(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

// y = conv(x, w) + b; w laid out [oc][ic][k][k]; square kernel, symmetric pad.
template <typename T>
void conv_forward(const T* w, const T* b, const Tensor<T>& x, Tensor<T>& y, int oc, int ic, int k,
                  int stride, int pad) {
    assert(x.c == ic);
    int out_h = (x.h + 2 * pad - k) / stride + 1;
    int out_w = (x.w + 2 * pad - k) / stride + 1;
    if (y.c != oc || y.h != out_h || y.w != out_w) y = Tensor<T>(oc, out_h, out_w);
    for (int o = 0; o < oc; ++o) {
        T* yp = y.ch(o);
        T bias = b ? b[o] : T(0);
        for (std::size_t i = 0; i < y.plane(); ++i) yp[i] = bias;
    }
    for (int o = 0; o < oc; ++o) {
        T* yp = y.ch(o);
        for (int i = 0; i < ic; ++i) {
            const T* xp = x.ch(i);
            const T* wp = w + (static_cast<std::size_t>(o) * ic + i) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T wv = wp[ky * k + kx];
                    if (wv == T(0)) continue;
                    for (int oy = 0; oy < out_h; ++oy) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= x.h) continue;
                        const T* xrow = xp + static_cast<std::size_t>(iy) * x.w;
                        T* yrow = yp + static_cast<std::size_t>(oy) * out_w;
                        int ox0 = 0, ox1 = out_w;
                        if (stride == 1) {
                            // valid ix = ox + kx - pad in [0, x.w)
                            ox0 = std::max(0, pad - kx);
                            ox1 = std::min(out_w, x.w + pad - kx);
                            const T* xs = xrow + ox0 + kx - pad;
                            T* ys = yrow + ox0;
                            int n = ox1 - ox0;
                            for (int t = 0; t < n; ++t) ys[t] += wv * xs[t];
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox) {
                                int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= x.w) continue;
                                yrow[ox] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

// Accumulates input gradient; gw/gb accumulate weight/bias gradients.
template <typename T>
void conv_backward(const T* w, const Tensor<T>& x, const Tensor<T>& gy, Tensor<T>& gx, T* gw,
                   T* gb, int oc, int ic, int k, int stride, int pad) {
    if (!gx.same_shape(x)) gx = Tensor<T>(x.c, x.h, x.w);
    if (gb) {
        for (int o = 0; o < oc; ++o) {
            const T* gyp = gy.ch(o);
            T acc = T(0);
            for (std::size_t i = 0; i < gy.plane(); ++i) acc += gyp[i];
            gb[o] += acc;
        }
    }
    for (int o = 0; o < oc; ++o) {
        const T* gyp = gy.ch(o);
        for (int i = 0; i < ic; ++i) {
            const T* xp = x.ch(i);
            T* gxp = gx.ch(i);
            const T* wp = w + (static_cast<std::size_t>(o) * ic + i) * k * k;
            T* gwp = gw ? gw + (static_cast<std::size_t>(o) * ic + i) * k * k : nullptr;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T wv = wp[ky * k + kx];
                    T wacc = T(0);
                    for (int oy = 0; oy < gy.h; ++oy) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= x.h) continue;
                        const T* xrow = xp + static_cast<std::size_t>(iy) * x.w;
                        T* gxrow = gxp + static_cast<std::size_t>(iy) * x.w;
                        const T* gyrow = gyp + static_cast<std::size_t>(oy) * gy.w;
                        if (stride == 1) {
                            int ox0 = std::max(0, pad - kx);
                            int ox1 = std::min(gy.w, x.w + pad - kx);
                            const T* xs = xrow + ox0 + kx - pad;
                            T* gxs = gxrow + ox0 + kx - pad;
                            int n = ox1 - ox0;
                            T acc = T(0);
                            for (int t = 0; t < n; ++t) acc += gyrow[ox0 + t] * xs[t];
                            wacc += acc;
                            for (int t = 0; t < n; ++t) gxs[t] += wv * gyrow[ox0 + t];
                        } else {
                            for (int ox = 0; ox < gy.w; ++ox) {
                                int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= x.w) continue;
                                wacc += gyrow[ox] * xrow[ix];
                                gxrow[ix] += wv * gyrow[ox];
                            }
                        }
                    }
                    if (gwp) gwp[ky * k + kx] += wacc;
                }
            }
        }
    }
}

template <typename T>
void leaky_relu_forward(const Tensor<T>& x, Tensor<T>& y, T slope) {
    if (!y.same_shape(x)) y = Tensor<T>(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : slope * x.v[i];
}

// Mask recovered from the forward output (sign-preserving for slope > 0).
template <typename T>
void leaky_relu_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx, T slope) {
    if (!gx.same_shape(y)) gx = Tensor<T>(y.c, y.h, y.w);
    for (std::size_t i = 0; i < y.size(); ++i)
        gx.v[i] = y.v[i] > T(0) ? gy.v[i] : slope * gy.v[i];
}

// 2x bilinear upsample, half-pixel centers.
template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
    int oh = x.h * 2, ow = x.w * 2;
    if (y.c != x.c || y.h != oh || y.w != ow) y = Tensor<T>(x.c, oh, ow);
    for (int c = 0; c < x.c; ++c) {
        const T* xp = x.ch(c);
        T* yp = y.ch(c);
        for (int oy = 0; oy < oh; ++oy) {
            double fy = (oy + 0.5) * 0.5 - 0.5;
            int y0 = static_cast<int>(fy >= 0 ? fy : -1);
            T ty = static_cast<T>(fy - y0);
            int ya = y0 < 0 ? 0 : y0;
            int yb = y0 + 1 >= x.h ? x.h - 1 : y0 + 1;
            for (int ox = 0; ox < ow; ++ox) {
                double fx = (ox + 0.5) * 0.5 - 0.5;
                int x0 = static_cast<int>(fx >= 0 ? fx : -1);
                T tx = static_cast<T>(fx - x0);
                int xa = x0 < 0 ? 0 : x0;
                int xb = x0 + 1 >= x.w ? x.w - 1 : x0 + 1;
                T top = xp[ya * x.w + xa] * (T(1) - tx) + xp[ya * x.w + xb] * tx;
                T bot = xp[yb * x.w + xa] * (T(1) - tx) + xp[yb * x.w + xb] * tx;
                yp[oy * ow + ox] = top * (T(1) - ty) + bot * ty;
            }
        }
    }
}

template <typename T>
void upsample2x_backward(const Tensor<T>& gy, int in_h, int in_w, Tensor<T>& gx) {
    if (gx.c != gy.c || gx.h != in_h || gx.w != in_w) gx = Tensor<T>(gy.c, in_h, in_w);
    gx.zero();
    for (int c = 0; c < gy.c; ++c) {
        const T* gyp = gy.ch(c);
        T* gxp = gx.ch(c);
        for (int oy = 0; oy < gy.h; ++oy) {
            double fy = (oy + 0.5) * 0.5 - 0.5;
            int y0 = static_cast<int>(fy >= 0 ? fy : -1);
            T ty = static_cast<T>(fy - y0);
            int ya = y0 < 0 ? 0 : y0;
            int yb = y0 + 1 >= in_h ? in_h - 1 : y0 + 1;
            for (int ox = 0; ox < gy.w; ++ox) {
                double fx = (ox + 0.5) * 0.5 - 0.5;
                int x0 = static_cast<int>(fx >= 0 ? fx : -1);
                T tx = static_cast<T>(fx - x0);
                int xa = x0 < 0 ? 0 : x0;
                int xb = x0 + 1 >= in_w ? in_w - 1 : x0 + 1;
                T g = gyp[oy * gy.w + ox];
                gxp[ya * in_w + xa] += g * (T(1) - tx) * (T(1) - ty);
                gxp[ya * in_w + xb] += g * tx * (T(1) - ty);
                gxp[yb * in_w + xa] += g * (T(1) - tx) * ty;
                gxp[yb * in_w + xb] += g * tx * ty;
            }
        }
    }
}

// Softmax across the channel axis at every pixel.
template <typename T>
void softmax_channels(const Tensor<T>& x, Tensor<T>& y) {
    if (!y.same_shape(x)) y = Tensor<T>(x.c, x.h, x.w);
    std::size_t plane = x.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        T mx = x.v[p];
        for (int c = 1; c < x.c; ++c) mx = std::max(mx, x.ch(c)[p]);
        T sum = T(0);
        for (int c = 0; c < x.c; ++c) {
            T e = std::exp(x.ch(c)[p] - mx);
            y.ch(c)[p] = e;
            sum += e;
        }
        for (int c = 0; c < x.c; ++c) y.ch(c)[p] /= sum;
    }
}

// gx_i = y_i * (gy_i - sum_j gy_j y_j)
template <typename T>
void softmax_channels_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx) {
    if (!gx.same_shape(y)) gx = Tensor<T>(y.c, y.h, y.w);
    std::size_t plane = y.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        T dot = T(0);
        for (int c = 0; c < y.c; ++c) dot += gy.ch(c)[p] * y.ch(c)[p];
        for (int c = 0; c < y.c; ++c) gx.ch(c)[p] = y.ch(c)[p] * (gy.ch(c)[p] - dot);
    }
}

}  // namespace mixwb::net
