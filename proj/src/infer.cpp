#include "mixwb/infer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mixwb::infer {

void WeightMaps::renormalize() {
    std::size_t pl = plane();
    for (std::size_t p = 0; p < pl; ++p) {
        float sum = 0.f;
        for (int i = 0; i < k; ++i) {
            float& x = v[i * pl + p];
            if (x < 0.f) x = 0.f;
            sum += x;
        }
        if (sum <= 0.f) {
            for (int i = 0; i < k; ++i) v[i * pl + p] = 1.0f / static_cast<float>(k);
        } else {
            for (int i = 0; i < k; ++i) v[i * pl + p] /= sum;
        }
    }
}

WeightMaps tensor_to_maps(const net::Tensor<float>& t) {
    WeightMaps w(t.c, t.h, t.w);
    w.v = t.v;
    return w;
}

net::Tensor<float> concat_smalls(const std::vector<Image>& smalls) {
    if (smalls.empty()) throw std::invalid_argument("concat_smalls: empty preset list");
    int h = smalls[0].h, w = smalls[0].w;
    net::Tensor<float> t(3 * static_cast<int>(smalls.size()), h, w);
    for (std::size_t i = 0; i < smalls.size(); ++i) {
        const Image& img = smalls[i];
        if (img.w != w || img.h != h) throw std::invalid_argument("concat_smalls: size mismatch");
        for (int c = 0; c < 3; ++c) {
            float* dst = t.ch(static_cast<int>(3 * i) + c);
            for (std::size_t p = 0; p < img.pixel_count(); ++p) dst[p] = img.px[p * 3 + c];
        }
    }
    return t;
}

namespace {

WeightMaps resize_maps_bilinear(const WeightMaps& w, int out_w, int out_h) {
    WeightMaps out(w.k, out_h, out_w);
    double sx = static_cast<double>(w.w) / out_w;
    double sy = static_cast<double>(w.h) / out_h;
    for (int i = 0; i < w.k; ++i) {
        const float* src = w.map(i);
        float* dst = out.map(i);
        for (int oy = 0; oy < out_h; ++oy) {
            double fy = (oy + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double ty = fy - y0;
            int ya = std::clamp(y0, 0, w.h - 1);
            int yb = std::clamp(y0 + 1, 0, w.h - 1);
            for (int ox = 0; ox < out_w; ++ox) {
                double fx = (ox + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double tx = fx - x0;
                int xa = std::clamp(x0, 0, w.w - 1);
                int xb = std::clamp(x0 + 1, 0, w.w - 1);
                double top = src[ya * w.w + xa] * (1 - tx) + src[ya * w.w + xb] * tx;
                double bot = src[yb * w.w + xa] * (1 - tx) + src[yb * w.w + xb] * tx;
                dst[oy * out_w + ox] = static_cast<float>(top * (1 - ty) + bot * ty);
            }
        }
    }
    return out;
}

}  // namespace

WeightMaps predict_weights_ensemble(const isp::PresetStack& stack, const net::GridNet<float>& model,
                                    const InferenceConfig& cfg) {
    if (model.config().k != static_cast<int>(stack.presets.size()))
        throw std::invalid_argument("predict_weights_ensemble: preset count mismatch");
    if (stack.smalls.empty()) throw std::invalid_argument("predict_weights_ensemble: no smalls");
    int base_w = stack.smalls[0].w, base_h = stack.smalls[0].h;

    std::vector<double> scales = cfg.ensemble ? cfg.scales : std::vector<double>{1.0};
    WeightMaps acc(model.config().k, base_h, base_w);
    int used = 0;
    for (double s : scales) {
        int sw = std::max(1, static_cast<int>(std::lround(base_w * s)));
        int sh = std::max(1, static_cast<int>(std::lround(base_h * s)));
        if (sw < 16 || sh < 16) continue;  // too small to carry structure
        std::vector<Image> scaled;
        scaled.reserve(stack.smalls.size());
        for (const auto& img : stack.smalls)
            scaled.push_back(s == 1.0 ? img : resize_area(img, sw, sh));
        net::Tensor<float> input = concat_smalls(scaled);
        WeightMaps maps = tensor_to_maps(model.forward_padded(input));
        if (maps.w != base_w || maps.h != base_h)
            maps = resize_maps_bilinear(maps, base_w, base_h);
        for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += maps.v[i];
        ++used;
    }
    if (used == 0) throw std::invalid_argument("predict_weights_ensemble: every scale skipped");
    for (auto& x : acc.v) x /= static_cast<float>(used);
    acc.renormalize();
    return acc;
}

WeightMaps upsample_weights(const WeightMaps& w, int target_w, int target_h) {
    if (target_w < w.w || target_h < w.h)
        throw std::invalid_argument("upsample_weights: target below source size");
    if (target_w == w.w && target_h == w.h) return w;
    WeightMaps out = resize_maps_bilinear(w, target_w, target_h);
    out.renormalize();
    return out;
}

namespace {

double guide_luma(const float* px) { return 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]; }

struct BilateralGrid {
    int nx, ny, nl;
    double sx, sy, sl;

    BilateralGrid(int w, int h, const EasParams& p) {
        sx = std::max(1.0, p.spatial_sigma);
        sy = sx;
        sl = std::max(1e-4, p.luma_sigma);
        nx = static_cast<int>(std::floor((w - 1) / sx)) + 2;
        ny = static_cast<int>(std::floor((h - 1) / sy)) + 2;
        nl = static_cast<int>(std::floor(1.0 / sl)) + 2;
    }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nl; }
    std::size_t at(int x, int y, int l) const {
        return (static_cast<std::size_t>(l) * ny + y) * nx + x;
    }
};

// y = (diag(c) + lambda * L) x over the 6-connected grid Laplacian
void grid_apply(const BilateralGrid& g, const std::vector<double>& c, double lambda,
                const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (c[i] + 1e-12) * x[i];
    for (int l = 0; l < g.nl; ++l)
        for (int yy = 0; yy < g.ny; ++yy)
            for (int xx = 0; xx < g.nx; ++xx) {
                std::size_t i = g.at(xx, yy, l);
                double xi = x[i];
                if (xx + 1 < g.nx) {
                    std::size_t j = g.at(xx + 1, yy, l);
                    double d = xi - x[j];
                    y[i] += lambda * d;
                    y[j] -= lambda * d;
                }
                if (yy + 1 < g.ny) {
                    std::size_t j = g.at(xx, yy + 1, l);
                    double d = xi - x[j];
                    y[i] += lambda * d;
                    y[j] -= lambda * d;
                }
                if (l + 1 < g.nl) {
                    std::size_t j = g.at(xx, yy, l + 1);
                    double d = xi - x[j];
                    y[i] += lambda * d;
                    y[j] -= lambda * d;
                }
            }
}

// splat weights trilinearly; returns per-vertex (value sum, weight sum)
void splat(const BilateralGrid& g, const float* map, const Image& guide, std::vector<double>& b,
           std::vector<double>& c) {
    b.assign(g.size(), 0.0);
    c.assign(g.size(), 0.0);
    for (int y = 0; y < guide.h; ++y)
        for (int x = 0; x < guide.w; ++x) {
            double gx = x / g.sx, gy = y / g.sy;
            double gl = guide_luma(guide.at(x, y)) / g.sl;
            int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy), l0 = static_cast<int>(gl);
            x0 = std::min(x0, g.nx - 2);
            y0 = std::min(y0, g.ny - 2);
            l0 = std::min(l0, g.nl - 2);
            double tx = gx - x0, ty = gy - y0, tl = gl - l0;
            double val = map[y * guide.w + x];
            for (int dl = 0; dl < 2; ++dl)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        double wgt = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dl ? tl : 1 - tl);
                        std::size_t i = g.at(x0 + dx, y0 + dy, l0 + dl);
                        b[i] += wgt * val;
                        c[i] += wgt;
                    }
        }
}

void slice(const BilateralGrid& g, const std::vector<double>& v, const Image& guide, float* out) {
    for (int y = 0; y < guide.h; ++y)
        for (int x = 0; x < guide.w; ++x) {
            double gx = x / g.sx, gy = y / g.sy;
            double gl = guide_luma(guide.at(x, y)) / g.sl;
            int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy), l0 = static_cast<int>(gl);
            x0 = std::min(x0, g.nx - 2);
            y0 = std::min(y0, g.ny - 2);
            l0 = std::min(l0, g.nl - 2);
            double tx = gx - x0, ty = gy - y0, tl = gl - l0;
            double acc = 0;
            for (int dl = 0; dl < 2; ++dl)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        double wgt = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dl ? tl : 1 - tl);
                        acc += wgt * v[g.at(x0 + dx, y0 + dy, l0 + dl)];
                    }
            out[y * guide.w + x] = static_cast<float>(acc);
        }
}

// CG on the SPD system; returns iterations used or -1 on stall.
int conjugate_gradient(const BilateralGrid& g, const std::vector<double>& c, double lambda,
                       const std::vector<double>& b, std::vector<double>& x, double tol,
                       int max_iters) {
    std::size_t n = b.size();
    std::vector<double> r(n), p(n), ap(n);
    grid_apply(g, c, lambda, x, ap);
    double bnorm = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = b[i] - ap[i];
        bnorm += b[i] * b[i];
    }
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0) return 0;
    p = r;
    double rs = 0;
    for (double v : r) rs += v * v;
    for (int it = 0; it < max_iters; ++it) {
        if (std::sqrt(rs) / bnorm <= tol) return it;
        grid_apply(g, c, lambda, p, ap);
        double pap = 0;
        for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0) return -1;
        double alpha = rs / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        double rs_new = 0;
        for (double v : r) rs_new += v * v;
        double beta = rs_new / rs;
        rs = rs_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return std::sqrt(rs) / bnorm <= tol ? max_iters : -1;
}

}  // namespace

WeightMaps guided_filter_smooth(const WeightMaps& w, const Image& guide, int radius, double eps) {
    if (guide.w != w.w || guide.h != w.h)
        throw std::invalid_argument("guided_filter_smooth: guide size mismatch");
    int W = w.w, H = w.h;
    std::vector<double> I(static_cast<std::size_t>(W) * H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) I[y * W + x] = guide_luma(guide.at(x, y));

    auto box = [&](const std::vector<double>& src) {
        // summed-area box mean with edge-clamped window
        std::vector<double> sat((W + 1) * (H + 1), 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                sat[(y + 1) * (W + 1) + x + 1] =
                    src[y * W + x] + sat[y * (W + 1) + x + 1] + sat[(y + 1) * (W + 1) + x] -
                    sat[y * (W + 1) + x];
        std::vector<double> out(src.size());
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int x0 = std::max(0, x - radius), x1 = std::min(W - 1, x + radius);
                int y0 = std::max(0, y - radius), y1 = std::min(H - 1, y + radius);
                double s = sat[(y1 + 1) * (W + 1) + x1 + 1] - sat[y0 * (W + 1) + x1 + 1] -
                           sat[(y1 + 1) * (W + 1) + x0] + sat[y0 * (W + 1) + x0];
                out[y * W + x] = s / ((x1 - x0 + 1) * (y1 - y0 + 1));
            }
        return out;
    };

    std::vector<double> mean_I = box(I);
    std::vector<double> II(I.size());
    for (std::size_t i = 0; i < I.size(); ++i) II[i] = I[i] * I[i];
    std::vector<double> corr_I = box(II);

    WeightMaps out(w.k, H, W);
    std::vector<double> p(I.size()), Ip(I.size());
    for (int m = 0; m < w.k; ++m) {
        const float* src = w.map(m);
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = src[i];
            Ip[i] = I[i] * src[i];
        }
        std::vector<double> mean_p = box(p);
        std::vector<double> corr_Ip = box(Ip);
        std::vector<double> a(I.size()), bcoef(I.size());
        for (std::size_t i = 0; i < I.size(); ++i) {
            double var = corr_I[i] - mean_I[i] * mean_I[i];
            double cov = corr_Ip[i] - mean_I[i] * mean_p[i];
            a[i] = cov / (var + eps);
            bcoef[i] = mean_p[i] - a[i] * mean_I[i];
        }
        std::vector<double> mean_a = box(a);
        std::vector<double> mean_b = box(bcoef);
        float* dst = out.map(m);
        for (std::size_t i = 0; i < I.size(); ++i)
            dst[i] = static_cast<float>(mean_a[i] * I[i] + mean_b[i]);
    }
    out.renormalize();
    return out;
}

WeightMaps edge_aware_smooth(const WeightMaps& w, const Image& guide, const EasParams& params,
                             EasReport* report) {
    if (guide.w != w.w || guide.h != w.h)
        throw std::invalid_argument("edge_aware_smooth: guide size mismatch");
    guide.require_space(ColorSpace::GammaSRGB, "edge_aware_smooth");
    BilateralGrid grid(w.w, w.h, params);

    WeightMaps out(w.k, w.h, w.w);
    std::vector<double> b, c, x;
    int total_iters = 0;
    for (int m = 0; m < w.k; ++m) {
        splat(grid, w.map(m), guide, b, c);
        x.assign(grid.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = c[i] > 0 ? b[i] / c[i] : 0.0;
        int iters = conjugate_gradient(grid, c, params.smoothness_weight, b, x, params.cg_tol,
                                       params.cg_max_iters);
        if (iters < 0) {
            if (report) report->used_fallback = true;
            return guided_filter_smooth(w, guide);
        }
        total_iters += iters;
        slice(grid, x, guide, out.map(m));
    }
    if (report) {
        report->used_fallback = false;
        report->cg_iters = total_iters;
    }
    out.renormalize();
    return out;
}

Image blend(const WeightMaps& w, const std::vector<Image>& images) {
    if (images.size() != static_cast<std::size_t>(w.k))
        throw ContractError("blend: image count != weight map count");
    for (const auto& img : images)
        if (img.w != w.w || img.h != w.h) throw ContractError("blend: dimension mismatch");
    Image out(w.w, w.h, images[0].space);
    std::size_t pl = w.plane();
    for (std::size_t p = 0; p < pl; ++p) {
        float acc[3] = {0, 0, 0};
        for (int i = 0; i < w.k; ++i) {
            float wi = w.map(i)[p];
            const float* px = images[i].px.data() + p * 3;
            for (int c = 0; c < 3; ++c) acc[c] += wi * px[c];
        }
        float* dst = out.px.data() + p * 3;
        for (int c = 0; c < 3; ++c) dst[c] = acc[c];
    }
    out.clamp01();
    return out;
}

Image correct_image(const isp::PresetStack& stack, const net::GridNet<float>& model,
                    const InferenceConfig& cfg, WeightMaps* maps_out) {
    WeightMaps maps;
    if (cfg.order == EnsembleOrder::UpsampleThenAverage && cfg.ensemble) {
        // alternative order: each scale's maps go straight to full resolution
        int used = 0;
        WeightMaps acc(model.config().k, stack.full_fixed.h, stack.full_fixed.w);
        for (double s : cfg.scales) {
            InferenceConfig single = cfg;
            single.ensemble = false;
            isp::PresetStack scaled = stack;
            int sw = std::max(1, static_cast<int>(std::lround(stack.smalls[0].w * s)));
            int sh = std::max(1, static_cast<int>(std::lround(stack.smalls[0].h * s)));
            if (sw < 16 || sh < 16) continue;
            for (auto& img : scaled.smalls)
                if (s != 1.0) img = resize_area(img, sw, sh);
            WeightMaps m = predict_weights_ensemble(scaled, model, single);
            m = upsample_weights(m, stack.full_fixed.w, stack.full_fixed.h);
            for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += m.v[i];
            ++used;
        }
        if (used == 0) throw std::invalid_argument("correct_image: every scale skipped");
        for (auto& v : acc.v) v /= static_cast<float>(used);
        acc.renormalize();
        maps = std::move(acc);
    } else {
        maps = predict_weights_ensemble(stack, model, cfg);
        maps = upsample_weights(maps, stack.full_fixed.w, stack.full_fixed.h);
    }
    if (cfg.eas) maps = edge_aware_smooth(maps, stack.full_fixed, cfg.eas_params);
    if (maps_out) *maps_out = maps;
    return blend(maps, stack.mapped_fulls);
}

double total_variation(const WeightMaps& w) {
    double acc = 0;
    for (int i = 0; i < w.k; ++i) {
        const float* m = w.map(i);
        for (int y = 0; y < w.h; ++y)
            for (int x = 0; x < w.w; ++x) {
                if (x + 1 < w.w) acc += std::fabs(m[y * w.w + x + 1] - m[y * w.w + x]);
                if (y + 1 < w.h) acc += std::fabs(m[(y + 1) * w.w + x] - m[y * w.w + x]);
            }
    }
    return acc / (static_cast<double>(w.k) * w.plane());
}

}  // namespace mixwb::infer
