#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixwb/rng.hpp"
#include "mixwb/tensor.hpp"

namespace mixwb::net {

// Grid-structured fully convolutional network: `rows` resolution levels,
// `columns` stages. The first half of the columns downsamples between rows
// (channels double), the second half upsamples (channels halve). Row r runs
// at 1/2^r resolution with stem_channels * 2^r channels. The final unit
// projects to k logit maps; forward ends in a cross-channel softmax so the
// k maps are a convex blend at every pixel.
struct GridNetConfig {
    int columns = 6;
    int rows = 4;
    int k = 3;  // preset count = output map count
    int stem_channels = 8;

    int input_channels() const { return 3 * k; }
    int divisor() const { return 1 << (rows - 1); }
    void validate() const {
        if (columns < 2 || columns % 2 != 0)
            throw std::invalid_argument("GridNetConfig: columns must be even and >= 2");
        if (rows < 2) throw std::invalid_argument("GridNetConfig: rows must be >= 2");
        if (k < 2) throw std::invalid_argument("GridNetConfig: k must be >= 2");
        if (stem_channels < 1) throw std::invalid_argument("GridNetConfig: bad stem_channels");
    }
};

template <typename T>
class GridNet {
public:
    using Grads = std::vector<std::vector<T>>;
    struct ParamInfo {
        std::string name;
        std::vector<int> shape;
    };

    struct Workspace {
        std::vector<Tensor<T>> slot;   // unit caches + grid states
        std::vector<Tensor<T>> dgrid;  // gradient accumulators per grid cell
        Tensor<T> weights;             // softmax output, kept for backward
    };

    GridNet(const GridNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) { build(seed); }

    const GridNetConfig& config() const { return cfg_; }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.size();
        return n;
    }
    std::vector<std::vector<T>>& parameters() { return params_; }
    const std::vector<std::vector<T>>& parameters() const { return params_; }
    const std::vector<ParamInfo>& parameter_infos() const { return infos_; }
    Grads make_grads() const {
        Grads g(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) g[i].assign(params_[i].size(), T(0));
        return g;
    }
    Workspace make_workspace() const {
        Workspace ws;
        ws.slot.resize(n_slots_);
        ws.dgrid.resize(static_cast<std::size_t>(cfg_.rows) * cfg_.columns);
        return ws;
    }

    // input (3k, H, W); H and W divisible by divisor(). Returns (k, H, W)
    // softmax-normalized weight maps.
    Tensor<T> forward(const Tensor<T>& input, Workspace& ws) const;

    // dweights = dL/d(softmax output); accumulates parameter gradients.
    void backward(const Tensor<T>& dweights, Workspace& ws, Grads& grads) const;

    // Arbitrary H, W: reflect-pads to the next divisible size, crops back.
    Tensor<T> forward_padded(const Tensor<T>& input) const;

private:
    struct Conv {
        int w_idx = -1, b_idx = -1;
        int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
    };
    struct ResUnit {
        Conv conv1, conv2, proj;
        bool has_proj = false;
        int s_x = -1, s_a0 = -1, s_a2 = -1;
    };
    struct DownUnit {
        Conv conv1, conv2, proj;
        int s_x = -1, s_a0 = -1, s_a2 = -1;
    };
    struct UpUnit {
        Conv conv1, conv2, proj;
        int s_x = -1, s_a0 = -1, s_a2 = -1, s_ux = -1;
    };

    GridNetConfig cfg_;
    T slope_ = T(0.2);
    std::vector<std::vector<T>> params_;
    std::vector<ParamInfo> infos_;
    int n_slots_ = 0;
    std::vector<int> grid_slot_;

    ResUnit stem_, out_;
    // indexed [r][c]; laterals exist everywhere except (0,0); downs in the
    // encoder columns for r >= 1; ups in the decoder columns for r < rows-1
    std::vector<std::vector<ResUnit>> lat_;
    std::vector<std::vector<DownUnit>> down_;
    std::vector<std::vector<UpUnit>> up_;

    int encoder_cols() const { return cfg_.columns / 2; }
    int row_ch(int r) const { return cfg_.stem_channels << r; }
    int cell(int r, int c) const { return r * cfg_.columns + c; }

    const T* W(const Conv& cv) const { return params_[cv.w_idx].data(); }
    const T* B(const Conv& cv) const { return params_[cv.b_idx].data(); }

    int new_slot() { return n_slots_++; }

    Conv add_conv(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad,
                  Rng& rng, bool zero_init) {
        Conv cv;
        cv.in_ch = in_ch;
        cv.out_ch = out_ch;
        cv.k = k;
        cv.stride = stride;
        cv.pad = pad;
        std::size_t wn = static_cast<std::size_t>(out_ch) * in_ch * k * k;
        std::vector<T> w(wn), b(out_ch);
        T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in_ch) * k * k));
        for (auto& v : w) v = zero_init ? T(0) : static_cast<T>(rng.uniform(-bound, bound));
        for (auto& v : b) v = zero_init ? T(0) : static_cast<T>(rng.uniform(-bound, bound));
        cv.w_idx = static_cast<int>(params_.size());
        infos_.push_back({name + ".weight", {out_ch, in_ch, k, k}});
        params_.push_back(std::move(w));
        cv.b_idx = static_cast<int>(params_.size());
        infos_.push_back({name + ".bias", {out_ch}});
        params_.push_back(std::move(b));
        return cv;
    }

    ResUnit add_res(const std::string& name, int in_ch, int out_ch, Rng& rng,
                    bool zero_init_out = false) {
        ResUnit u;
        u.conv1 = add_conv(name + ".conv1", in_ch, out_ch, 3, 1, 1, rng, false);
        u.conv2 = add_conv(name + ".conv2", out_ch, out_ch, 3, 1, 1, rng, zero_init_out);
        u.has_proj = in_ch != out_ch;
        if (u.has_proj) u.proj = add_conv(name + ".proj", in_ch, out_ch, 1, 1, 0, rng, zero_init_out);
        u.s_x = new_slot();
        u.s_a0 = new_slot();
        u.s_a2 = new_slot();
        return u;
    }

    DownUnit add_down(const std::string& name, int in_ch, Rng& rng) {
        DownUnit u;
        u.conv1 = add_conv(name + ".conv1", in_ch, in_ch * 2, 3, 2, 1, rng, false);
        u.conv2 = add_conv(name + ".conv2", in_ch * 2, in_ch * 2, 3, 1, 1, rng, false);
        u.proj = add_conv(name + ".proj", in_ch, in_ch * 2, 1, 2, 0, rng, false);
        u.s_x = new_slot();
        u.s_a0 = new_slot();
        u.s_a2 = new_slot();
        return u;
    }

    UpUnit add_up(const std::string& name, int in_ch, Rng& rng) {
        UpUnit u;
        u.conv1 = add_conv(name + ".conv1", in_ch, in_ch, 3, 1, 1, rng, false);
        u.conv2 = add_conv(name + ".conv2", in_ch, in_ch / 2, 3, 1, 1, rng, false);
        u.proj = add_conv(name + ".proj", in_ch, in_ch / 2, 1, 1, 0, rng, false);
        u.s_x = new_slot();
        u.s_a0 = new_slot();
        u.s_a2 = new_slot();
        u.s_ux = new_slot();
        return u;
    }

    void build(std::uint64_t seed);

    static void add_into(Tensor<T>& dst, const Tensor<T>& src) {
        if (!dst.same_shape(src)) {
            dst = src;
            return;
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
    }
    static void acc_grad(Tensor<T>& dst, const Tensor<T>& src) {
        if (dst.size() == 0) {
            dst = src;
            return;
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
    }

    Tensor<T> res_forward(const ResUnit& u, const Tensor<T>& x, Workspace& ws) const {
        ws.slot[u.s_x] = x;
        Tensor<T>& a0 = ws.slot[u.s_a0];
        leaky_relu_forward(x, a0, slope_);
        Tensor<T> a1;
        conv_forward(W(u.conv1), B(u.conv1), a0, a1, u.conv1.out_ch, u.conv1.in_ch, u.conv1.k,
                     u.conv1.stride, u.conv1.pad);
        Tensor<T>& a2 = ws.slot[u.s_a2];
        leaky_relu_forward(a1, a2, slope_);
        Tensor<T> y;
        conv_forward(W(u.conv2), B(u.conv2), a2, y, u.conv2.out_ch, u.conv2.in_ch, u.conv2.k,
                     u.conv2.stride, u.conv2.pad);
        if (u.has_proj) {
            Tensor<T> s;
            conv_forward(W(u.proj), B(u.proj), x, s, u.proj.out_ch, u.proj.in_ch, u.proj.k,
                         u.proj.stride, u.proj.pad);
            add_into(y, s);
        } else {
            add_into(y, x);
        }
        return y;
    }

    Tensor<T> res_backward(const ResUnit& u, const Tensor<T>& gy, Workspace& ws,
                           Grads& grads) const {
        const Tensor<T>& x = ws.slot[u.s_x];
        const Tensor<T>& a0 = ws.slot[u.s_a0];
        const Tensor<T>& a2 = ws.slot[u.s_a2];
        Tensor<T> g_a2, g_a1, g_a0, gx;
        conv_backward(W(u.conv2), a2, gy, g_a2, grads[u.conv2.w_idx].data(),
                      grads[u.conv2.b_idx].data(), u.conv2.out_ch, u.conv2.in_ch, u.conv2.k,
                      u.conv2.stride, u.conv2.pad);
        leaky_relu_backward(a2, g_a2, g_a1, slope_);
        conv_backward(W(u.conv1), a0, g_a1, g_a0, grads[u.conv1.w_idx].data(),
                      grads[u.conv1.b_idx].data(), u.conv1.out_ch, u.conv1.in_ch, u.conv1.k,
                      u.conv1.stride, u.conv1.pad);
        leaky_relu_backward(a0, g_a0, gx, slope_);
        if (u.has_proj) {
            Tensor<T> gx_s;
            conv_backward(W(u.proj), x, gy, gx_s, grads[u.proj.w_idx].data(),
                          grads[u.proj.b_idx].data(), u.proj.out_ch, u.proj.in_ch, u.proj.k,
                          u.proj.stride, u.proj.pad);
            add_into(gx, gx_s);
        } else {
            add_into(gx, gy);
        }
        return gx;
    }

    Tensor<T> down_forward(const DownUnit& u, const Tensor<T>& x, Workspace& ws) const {
        ws.slot[u.s_x] = x;
        Tensor<T>& a0 = ws.slot[u.s_a0];
        leaky_relu_forward(x, a0, slope_);
        Tensor<T> a1;
        conv_forward(W(u.conv1), B(u.conv1), a0, a1, u.conv1.out_ch, u.conv1.in_ch, u.conv1.k,
                     u.conv1.stride, u.conv1.pad);
        Tensor<T>& a2 = ws.slot[u.s_a2];
        leaky_relu_forward(a1, a2, slope_);
        Tensor<T> y;
        conv_forward(W(u.conv2), B(u.conv2), a2, y, u.conv2.out_ch, u.conv2.in_ch, u.conv2.k,
                     u.conv2.stride, u.conv2.pad);
        Tensor<T> s;
        conv_forward(W(u.proj), B(u.proj), x, s, u.proj.out_ch, u.proj.in_ch, u.proj.k,
                     u.proj.stride, u.proj.pad);
        add_into(y, s);
        return y;
    }

    Tensor<T> down_backward(const DownUnit& u, const Tensor<T>& gy, Workspace& ws,
                            Grads& grads) const {
        const Tensor<T>& x = ws.slot[u.s_x];
        const Tensor<T>& a0 = ws.slot[u.s_a0];
        const Tensor<T>& a2 = ws.slot[u.s_a2];
        Tensor<T> g_a2, g_a1, g_a0, gx, gx_s;
        conv_backward(W(u.conv2), a2, gy, g_a2, grads[u.conv2.w_idx].data(),
                      grads[u.conv2.b_idx].data(), u.conv2.out_ch, u.conv2.in_ch, u.conv2.k,
                      u.conv2.stride, u.conv2.pad);
        leaky_relu_backward(a2, g_a2, g_a1, slope_);
        conv_backward(W(u.conv1), a0, g_a1, g_a0, grads[u.conv1.w_idx].data(),
                      grads[u.conv1.b_idx].data(), u.conv1.out_ch, u.conv1.in_ch, u.conv1.k,
                      u.conv1.stride, u.conv1.pad);
        leaky_relu_backward(a0, g_a0, gx, slope_);
        conv_backward(W(u.proj), x, gy, gx_s, grads[u.proj.w_idx].data(),
                      grads[u.proj.b_idx].data(), u.proj.out_ch, u.proj.in_ch, u.proj.k,
                      u.proj.stride, u.proj.pad);
        add_into(gx, gx_s);
        return gx;
    }

    Tensor<T> up_forward(const UpUnit& u, const Tensor<T>& x, Workspace& ws) const {
        ws.slot[u.s_x] = x;
        Tensor<T>& a0 = ws.slot[u.s_a0];
        leaky_relu_forward(x, a0, slope_);
        Tensor<T> a1;
        conv_forward(W(u.conv1), B(u.conv1), a0, a1, u.conv1.out_ch, u.conv1.in_ch, u.conv1.k,
                     u.conv1.stride, u.conv1.pad);
        Tensor<T> up;
        upsample2x_forward(a1, up);
        Tensor<T>& a2 = ws.slot[u.s_a2];
        leaky_relu_forward(up, a2, slope_);
        Tensor<T> y;
        conv_forward(W(u.conv2), B(u.conv2), a2, y, u.conv2.out_ch, u.conv2.in_ch, u.conv2.k,
                     u.conv2.stride, u.conv2.pad);
        Tensor<T>& ux = ws.slot[u.s_ux];
        upsample2x_forward(x, ux);
        Tensor<T> s;
        conv_forward(W(u.proj), B(u.proj), ux, s, u.proj.out_ch, u.proj.in_ch, u.proj.k,
                     u.proj.stride, u.proj.pad);
        add_into(y, s);
        return y;
    }

    Tensor<T> up_backward(const UpUnit& u, const Tensor<T>& gy, Workspace& ws,
                          Grads& grads) const {
        const Tensor<T>& x = ws.slot[u.s_x];
        const Tensor<T>& a0 = ws.slot[u.s_a0];
        const Tensor<T>& a2 = ws.slot[u.s_a2];
        const Tensor<T>& ux = ws.slot[u.s_ux];
        Tensor<T> g_a2, g_u, g_a1, g_a0, gx, g_ux, gx_s;
        conv_backward(W(u.conv2), a2, gy, g_a2, grads[u.conv2.w_idx].data(),
                      grads[u.conv2.b_idx].data(), u.conv2.out_ch, u.conv2.in_ch, u.conv2.k,
                      u.conv2.stride, u.conv2.pad);
        leaky_relu_backward(a2, g_a2, g_u, slope_);
        upsample2x_backward(g_u, a0.h, a0.w, g_a1);
        conv_backward(W(u.conv1), a0, g_a1, g_a0, grads[u.conv1.w_idx].data(),
                      grads[u.conv1.b_idx].data(), u.conv1.out_ch, u.conv1.in_ch, u.conv1.k,
                      u.conv1.stride, u.conv1.pad);
        leaky_relu_backward(a0, g_a0, gx, slope_);
        conv_backward(W(u.proj), ux, gy, g_ux, grads[u.proj.w_idx].data(),
                      grads[u.proj.b_idx].data(), u.proj.out_ch, u.proj.in_ch, u.proj.k,
                      u.proj.stride, u.proj.pad);
        Tensor<T> tmp;
        upsample2x_backward(g_ux, x.h, x.w, tmp);
        add_into(gx, tmp);
        return gx;
    }
};

template <typename T>
void GridNet<T>::build(std::uint64_t seed) {
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x6E37));
    int R = cfg_.rows, C = cfg_.columns, E = encoder_cols();

    stem_ = add_res("stem", cfg_.input_channels(), row_ch(0), rng);
    lat_.assign(R, std::vector<ResUnit>(C));
    down_.assign(R, std::vector<DownUnit>(C));
    up_.assign(R, std::vector<UpUnit>(C));

    auto cell_name = [](const char* kind, int r, int c) {
        return "grid.r" + std::to_string(r) + "c" + std::to_string(c) + "." + kind;
    };
    for (int r = 1; r < R; ++r) {
        down_[r][0] = add_down(cell_name("down", r, 0), row_ch(r - 1), rng);
        lat_[r][0] = add_res(cell_name("lat", r, 0), row_ch(r), row_ch(r), rng);
    }
    for (int c = 1; c < E; ++c) {
        lat_[0][c] = add_res(cell_name("lat", 0, c), row_ch(0), row_ch(0), rng);
        for (int r = 1; r < R; ++r) {
            lat_[r][c] = add_res(cell_name("lat", r, c), row_ch(r), row_ch(r), rng);
            down_[r][c] = add_down(cell_name("down", r, c), row_ch(r - 1), rng);
        }
    }
    for (int c = E; c < C; ++c) {
        lat_[R - 1][c] = add_res(cell_name("lat", R - 1, c), row_ch(R - 1), row_ch(R - 1), rng);
        for (int r = R - 2; r >= 0; --r) {
            lat_[r][c] = add_res(cell_name("lat", r, c), row_ch(r), row_ch(r), rng);
            up_[r][c] = add_up(cell_name("up", r, c), row_ch(r + 1), rng);
        }
    }
    // zero-initialized output projection: training starts at uniform blending
    out_ = add_res("out", row_ch(0), cfg_.k, rng, /*zero_init_out=*/true);

    // grid state slots
    grid_slot_.assign(static_cast<std::size_t>(R) * C, -1);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) grid_slot_[cell(r, c)] = new_slot();
}

template <typename T>
Tensor<T> GridNet<T>::forward(const Tensor<T>& input, Workspace& ws) const {
    int R = cfg_.rows, C = cfg_.columns, E = encoder_cols();
    if (input.c != cfg_.input_channels())
        throw std::invalid_argument("GridNet::forward: channel count mismatch");
    if (input.h % cfg_.divisor() != 0 || input.w % cfg_.divisor() != 0)
        throw std::invalid_argument("GridNet::forward: dims not divisible; use forward_padded");
    if (static_cast<int>(ws.slot.size()) != n_slots_) ws = make_workspace();

    auto S = [&](int r, int c) -> Tensor<T>& { return ws.slot[grid_slot_[cell(r, c)]]; };

    S(0, 0) = res_forward(stem_, input, ws);
    for (int r = 1; r < R; ++r)
        S(r, 0) = res_forward(lat_[r][0], down_forward(down_[r][0], S(r - 1, 0), ws), ws);
    for (int c = 1; c < E; ++c) {
        S(0, c) = res_forward(lat_[0][c], S(0, c - 1), ws);
        for (int r = 1; r < R; ++r) {
            Tensor<T> y = res_forward(lat_[r][c], S(r, c - 1), ws);
            add_into(y, down_forward(down_[r][c], S(r - 1, c), ws));
            S(r, c) = std::move(y);
        }
    }
    for (int c = E; c < C; ++c) {
        S(R - 1, c) = res_forward(lat_[R - 1][c], S(R - 1, c - 1), ws);
        for (int r = R - 2; r >= 0; --r) {
            Tensor<T> y = res_forward(lat_[r][c], S(r, c - 1), ws);
            add_into(y, up_forward(up_[r][c], S(r + 1, c), ws));
            S(r, c) = std::move(y);
        }
    }
    Tensor<T> logits = res_forward(out_, S(0, C - 1), ws);
    softmax_channels(logits, ws.weights);
    return ws.weights;
}

template <typename T>
void GridNet<T>::backward(const Tensor<T>& dweights, Workspace& ws, Grads& grads) const {
    int R = cfg_.rows, C = cfg_.columns, E = encoder_cols();
    for (auto& t : ws.dgrid) t = Tensor<T>();

    auto dS = [&](int r, int c) -> Tensor<T>& { return ws.dgrid[cell(r, c)]; };

    Tensor<T> dlogits;
    softmax_channels_backward(ws.weights, dweights, dlogits);
    acc_grad(dS(0, C - 1), res_backward(out_, dlogits, ws, grads));

    for (int c = C - 1; c >= E; --c) {
        for (int r = 0; r <= R - 2; ++r) {
            acc_grad(dS(r, c - 1), res_backward(lat_[r][c], dS(r, c), ws, grads));
            acc_grad(dS(r + 1, c), up_backward(up_[r][c], dS(r, c), ws, grads));
        }
        acc_grad(dS(R - 1, c - 1), res_backward(lat_[R - 1][c], dS(R - 1, c), ws, grads));
    }
    for (int c = E - 1; c >= 1; --c) {
        for (int r = R - 1; r >= 1; --r) {
            acc_grad(dS(r, c - 1), res_backward(lat_[r][c], dS(r, c), ws, grads));
            acc_grad(dS(r - 1, c), down_backward(down_[r][c], dS(r, c), ws, grads));
        }
        acc_grad(dS(0, c - 1), res_backward(lat_[0][c], dS(0, c), ws, grads));
    }
    for (int r = R - 1; r >= 1; --r) {
        Tensor<T> g = res_backward(lat_[r][0], dS(r, 0), ws, grads);
        acc_grad(dS(r - 1, 0), down_backward(down_[r][0], g, ws, grads));
    }
    res_backward(stem_, dS(0, 0), ws, grads);  // input gradient discarded
}

template <typename T>
Tensor<T> GridNet<T>::forward_padded(const Tensor<T>& input) const {
    int d = cfg_.divisor();
    int ph = (input.h + d - 1) / d * d;
    int pw = (input.w + d - 1) / d * d;
    Workspace ws = make_workspace();
    if (ph == input.h && pw == input.w) {
        Tensor<T> out = forward(input, ws);
        return out;
    }
    // reflect padding on the bottom/right edges
    Tensor<T> padded(input.c, ph, pw);
    for (int c = 0; c < input.c; ++c) {
        const T* src = input.ch(c);
        T* dst = padded.ch(c);
        for (int y = 0; y < ph; ++y) {
            int sy = y < input.h ? y : 2 * input.h - 2 - y;
            if (sy < 0) sy = 0;
            for (int x = 0; x < pw; ++x) {
                int sx = x < input.w ? x : 2 * input.w - 2 - x;
                if (sx < 0) sx = 0;
                dst[static_cast<std::size_t>(y) * pw + x] =
                    src[static_cast<std::size_t>(sy) * input.w + sx];
            }
        }
    }
    Tensor<T> full = forward(padded, ws);
    Tensor<T> out(cfg_.k, input.h, input.w);
    for (int c = 0; c < cfg_.k; ++c)
        for (int y = 0; y < input.h; ++y)
            for (int x = 0; x < input.w; ++x)
                out.ch(c)[static_cast<std::size_t>(y) * input.w + x] =
                    full.ch(c)[static_cast<std::size_t>(y) * pw + x];
    return out;
}

extern template class GridNet<float>;
extern template class GridNet<double>;

}  // namespace mixwb::net
