#include "mixwb/isp.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

using nlohmann::json;

namespace mixwb::isp {

std::string MappingMatrix::to_json() const {
    json j;
    j["target"] = std::string(1, target.name);
    j["target_cct"] = target.cct;
    j["fit_rms"] = fit_rms;
    j["low_rank"] = low_rank;
    j["feature_order"] = "R,G,B,RG,RB,GB,R2,G2,B2,RGB,1";
    json rows = json::array();
    for (const auto& row : m) rows.push_back(row);
    j["m"] = rows;  // row-major 3x11
    return j.dump(2);
}

MappingMatrix MappingMatrix::from_json(const std::string& text) {
    json j = json::parse(text);
    MappingMatrix out;
    std::string t = j.at("target").get<std::string>();
    out.target = color::wb_setting(t.at(0));
    out.fit_rms = j.value("fit_rms", 0.0);
    out.low_rank = j.value("low_rank", false);
    auto rows = j.at("m");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < color::kPolyTerms; ++c) out.m[r][c] = rows[r][c].get<double>();
    return out;
}

std::vector<Image> render_presets(const Image& raw, const std::vector<color::WBSetting>& presets,
                                  int small_size) {
    raw.require_space(ColorSpace::LinearRaw, "render_presets");
    if (small_size > raw.w || small_size > raw.h)
        throw std::invalid_argument("render_presets: small_size exceeds raw dimensions");
    Image small_raw = resize_area(raw, small_size, small_size);
    std::vector<Image> out;
    out.reserve(presets.size());
    for (const auto& wb : presets) {
        Image balanced = color::diagonal_wb(small_raw, color::cct_to_illuminant(wb.cct));
        balanced.space = ColorSpace::LinearSRGB;
        out.push_back(color::srgb_gamma(balanced));
    }
    return out;
}

namespace {

constexpr int kN = color::kPolyTerms;

// Solves A x = b for symmetric positive semi-definite A (damped normal
// equations), reporting rank trouble via the pivot magnitudes.
bool solve_spd(std::array<std::array<double, kN>, kN> a, std::array<double, kN> b,
               std::array<double, kN>& x) {
    std::array<int, kN> piv{};
    for (int i = 0; i < kN; ++i) piv[i] = i;
    bool healthy = true;
    for (int col = 0; col < kN; ++col) {
        int best = col;
        for (int r = col + 1; r < kN; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[best][col])) best = r;
        std::swap(a[col], a[best]);
        std::swap(b[col], b[best]);
        double pivot = a[col][col];
        if (std::fabs(pivot) < 1e-12) {
            healthy = false;
            pivot = pivot >= 0 ? 1e-12 : -1e-12;
        }
        for (int r = col + 1; r < kN; ++r) {
            double f = a[r][col] / pivot;
            if (f == 0) continue;
            for (int c = col; c < kN; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = kN - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < kN; ++c) acc -= a[r][c] * x[c];
        double pivot = a[r][r];
        if (std::fabs(pivot) < 1e-12) pivot = pivot >= 0 ? 1e-12 : -1e-12;
        x[r] = acc / pivot;
    }
    return healthy;
}

}  // namespace

MappingMatrix fit_mapping(const Image& source_small, const Image& target_small,
                          const color::WBSetting& target_setting) {
    if (source_small.w != target_small.w || source_small.h != target_small.h)
        throw std::invalid_argument("fit_mapping: dimension mismatch");
    source_small.require_space(ColorSpace::GammaSRGB, "fit_mapping");
    target_small.require_space(ColorSpace::GammaSRGB, "fit_mapping");

    // normal equations: (Phi^T Phi + damping I) M^T = Phi^T T
    std::array<std::array<double, kN>, kN> ata{};
    std::array<std::array<double, kN>, 3> atb{};
    for (std::size_t p = 0; p < source_small.pixel_count(); ++p) {
        const float* s = source_small.px.data() + p * 3;
        const float* t = target_small.px.data() + p * 3;
        auto phi = color::poly_expand({s[0], s[1], s[2]});
        for (int i = 0; i < kN; ++i) {
            for (int j = i; j < kN; ++j) ata[i][j] += phi[i] * phi[j];
            for (int c = 0; c < 3; ++c) atb[c][i] += phi[i] * t[c];
        }
    }
    for (int i = 0; i < kN; ++i) {
        for (int j = 0; j < i; ++j) ata[i][j] = ata[j][i];
        ata[i][i] += 1e-8;
    }

    MappingMatrix out;
    out.target = target_setting;
    bool healthy = true;
    for (int c = 0; c < 3; ++c) {
        std::array<double, kN> x{};
        healthy = solve_spd(ata, atb[c], x) && healthy;
        out.m[c] = x;
    }
    out.low_rank = !healthy;

    double acc = 0;
    for (std::size_t p = 0; p < source_small.pixel_count(); ++p) {
        const float* s = source_small.px.data() + p * 3;
        const float* t = target_small.px.data() + p * 3;
        auto phi = color::poly_expand({s[0], s[1], s[2]});
        for (int c = 0; c < 3; ++c) {
            double v = 0;
            for (int i = 0; i < kN; ++i) v += out.m[c][i] * phi[i];
            double d = v - t[c];
            acc += d * d;
        }
    }
    out.fit_rms = std::sqrt(acc / (static_cast<double>(source_small.pixel_count()) * 3.0));
    for (const auto& row : out.m)
        for (double v : row)
            if (!std::isfinite(v)) throw NumericError("fit_mapping: non-finite solution");
    return out;
}

Image apply_mapping(const Image& full, const MappingMatrix& m) {
    full.require_space(ColorSpace::GammaSRGB, "apply_mapping");
    Image out(full.w, full.h, ColorSpace::GammaSRGB);
    for (std::size_t p = 0; p < full.pixel_count(); ++p) {
        const float* s = full.px.data() + p * 3;
        float* d = out.px.data() + p * 3;
        auto phi = color::poly_expand({s[0], s[1], s[2]});
        for (int c = 0; c < 3; ++c) {
            double v = 0;
            for (int i = 0; i < kN; ++i) v += m.m[c][i] * phi[i];
            d[c] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
        }
    }
    return out;
}

namespace {

Image to_fit_space(const Image& gamma_img, FitSpace space) {
    if (space == FitSpace::Gamma) return gamma_img;
    Image lin = color::srgb_degamma(gamma_img);
    lin.space = ColorSpace::GammaSRGB;  // fit/apply operate on the tagged-space values
    return lin;
}

Image from_fit_space(Image img, FitSpace space) {
    if (space == FitSpace::Gamma) return img;
    img.space = ColorSpace::LinearSRGB;
    return color::srgb_gamma(img);
}

}  // namespace

PresetStack build_preset_stack(const Image& raw, const std::vector<color::WBSetting>& presets,
                               int small_size, const color::WBSetting& fixed, FitSpace fit_space) {
    raw.require_space(ColorSpace::LinearRaw, "build_preset_stack");
    PresetStack stack;
    stack.presets = presets;
    stack.smalls = render_presets(raw, presets, small_size);

    Image full_balanced = color::diagonal_wb(raw, color::cct_to_illuminant(fixed.cct));
    full_balanced.space = ColorSpace::LinearSRGB;
    stack.full_fixed = color::srgb_gamma(full_balanced);

    Image small_fixed = render_presets(raw, {fixed}, small_size)[0];
    Image fit_source = to_fit_space(small_fixed, fit_space);
    Image fit_full = to_fit_space(stack.full_fixed, fit_space);
    for (std::size_t i = 0; i < presets.size(); ++i) {
        Image fit_target = to_fit_space(stack.smalls[i], fit_space);
        MappingMatrix m = fit_mapping(fit_source, fit_target, presets[i]);
        stack.mapped_fulls.push_back(from_fit_space(apply_mapping(fit_full, m), fit_space));
        stack.mappings.push_back(std::move(m));
    }
    return stack;
}

PresetStack build_preset_stack_exact(const std::vector<color::WBSetting>& presets,
                                     std::vector<Image> captures, Image full_fixed,
                                     int small_size) {
    if (captures.size() != presets.size())
        throw std::invalid_argument("build_preset_stack_exact: capture count mismatch");
    PresetStack stack;
    stack.presets = presets;
    for (const auto& cap : captures)
        stack.smalls.push_back(resize_area(cap, small_size, small_size));
    stack.full_fixed = std::move(full_fixed);
    stack.mapped_fulls = std::move(captures);
    return stack;
}

}  // namespace mixwb::isp
