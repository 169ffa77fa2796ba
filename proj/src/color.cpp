#include "mixwb/color.hpp"

#include <cmath>
#include <stdexcept>

namespace mixwb::color {

WBSetting wb_setting(char name) {
    switch (name) {
        case 't': return {'t', 2850.0};
        case 'f': return {'f', 3800.0};
        case 'd': return {'d', 5500.0};
        case 'c': return {'c', 6500.0};
        case 's': return {'s', 7500.0};
    }
    throw std::invalid_argument(std::string("unknown WB setting: ") + name);
}

std::vector<WBSetting> preset_set(const std::string& names) {
    if (names.empty()) throw std::invalid_argument("empty preset set");
    std::vector<WBSetting> out;
    out.reserve(names.size());
    for (char c : names) out.push_back(wb_setting(c));
    return out;
}

double srgb_encode(double v) {
    if (v <= 0.0031308) return 12.92 * v;
    return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double v) {
    if (v <= 0.04045) return v / 12.92;
    return std::pow((v + 0.055) / 1.055, 2.4);
}

Image srgb_gamma(const Image& img) {
    img.require_space(ColorSpace::LinearSRGB, "srgb_gamma");
    Image out(img.w, img.h, ColorSpace::GammaSRGB);
    for (std::size_t i = 0; i < img.px.size(); ++i)
        out.px[i] = static_cast<float>(srgb_encode(img.px[i]));
    out.clamp01();
    return out;
}

Image srgb_degamma(const Image& img) {
    img.require_space(ColorSpace::GammaSRGB, "srgb_degamma");
    Image out(img.w, img.h, ColorSpace::LinearSRGB);
    for (std::size_t i = 0; i < img.px.size(); ++i)
        out.px[i] = static_cast<float>(srgb_decode(img.px[i]));
    out.clamp01();
    return out;
}

std::array<double, 2> cct_to_xy(double t) {
    if (t < 1667.0 || t > 25000.0)
        throw std::out_of_range("cct_to_xy: CCT outside 1667..25000 K");
    double t2 = t * t, t3 = t2 * t;
    double x;
    if (t <= 4000.0)
        x = -0.2661239e9 / t3 - 0.2343589e6 / t2 + 0.8776956e3 / t + 0.179910;
    else
        x = -3.0258469e9 / t3 + 2.1070379e6 / t2 + 0.2226347e3 / t + 0.240390;
    double x2 = x * x, x3 = x2 * x;
    double y;
    if (t <= 2222.0)
        y = -1.1063814 * x3 - 1.34811020 * x2 + 2.18555832 * x - 0.20219683;
    else if (t <= 4000.0)
        y = -0.9549476 * x3 - 1.37418593 * x2 + 2.09137015 * x - 0.16748867;
    else
        y = 3.0817580 * x3 - 5.87338670 * x2 + 3.75112997 * x - 0.37001483;
    return {x, y};
}

namespace {

// sRGB primaries, D65 (IEC 61966-2-1)
constexpr double kXyzToRgb[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kD65X = 0.95047, kD65Y = 1.0, kD65Z = 1.08883;

}  // namespace

IlluminantRGB cct_to_illuminant(double cct) {
    auto [x, y] = cct_to_xy(cct);
    double X = x / y, Y = 1.0, Z = (1.0 - x - y) / y;
    Vec3 rgb{};
    for (int i = 0; i < 3; ++i)
        rgb[i] = kXyzToRgb[i][0] * X + kXyzToRgb[i][1] * Y + kXyzToRgb[i][2] * Z;
    // extreme CCTs fall slightly outside the sRGB gamut; clip to its edge
    for (double& v : rgb) v = std::max(v, 5e-3);
    return IlluminantRGB{{rgb[0] / rgb[1], 1.0, rgb[2] / rgb[1]}};
}

Image diagonal_wb(const Image& img, const IlluminantRGB& illum) {
    if (img.space == ColorSpace::GammaSRGB)
        throw ContractError("diagonal_wb: requires a linear image");
    if (illum.rgb[0] <= 0 || illum.rgb[1] <= 0 || illum.rgb[2] <= 0)
        throw std::domain_error("diagonal_wb: non-positive illuminant component");
    Image out(img.w, img.h, img.space);
    const double inv[3] = {1.0 / illum.rgb[0], 1.0 / illum.rgb[1], 1.0 / illum.rgb[2]};
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        const float* s = img.px.data() + p * 3;
        float* d = out.px.data() + p * 3;
        for (int c = 0; c < 3; ++c) d[c] = static_cast<float>(s[c] * inv[c]);
    }
    out.clamp01();
    return out;
}

std::array<double, kPolyTerms> poly_expand(const Vec3& v) {
    double r = v[0], g = v[1], b = v[2];
    return {r, g, b, r * g, r * b, g * b, r * r, g * g, b * b, r * g * b, 1.0};
}

std::optional<double> angular_error(const Vec3& a, const Vec3& b) {
    double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    if (na < 1e-9 || nb < 1e-9) return std::nullopt;
    double dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
    dot = std::min(1.0, std::max(-1.0, dot));
    return std::acos(dot) * 180.0 / M_PI;
}

Lab srgb_to_lab(const Vec3& rgb) {
    double lin[3];
    for (int c = 0; c < 3; ++c) lin[c] = srgb_decode(rgb[c]);
    double X = 0, Y = 0, Z = 0;
    X = kRgbToXyz[0][0] * lin[0] + kRgbToXyz[0][1] * lin[1] + kRgbToXyz[0][2] * lin[2];
    Y = kRgbToXyz[1][0] * lin[0] + kRgbToXyz[1][1] * lin[1] + kRgbToXyz[1][2] * lin[2];
    Z = kRgbToXyz[2][0] * lin[0] + kRgbToXyz[2][1] * lin[1] + kRgbToXyz[2][2] * lin[2];

    auto f = [](double t) {
        constexpr double d3 = (6.0 / 29) * (6.0 / 29) * (6.0 / 29);
        constexpr double d2x3 = 3.0 * (6.0 / 29) * (6.0 / 29);
        return t > d3 ? std::cbrt(t) : t / d2x3 + 4.0 / 29;
    };
    double fx = f(X / kD65X), fy = f(Y / kD65Y), fz = f(Z / kD65Z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Sharma, Wu & Dalal implementation notes, kL = kC = kH = 1.
double ciede2000(const Lab& c1, const Lab& c2) {
    constexpr double kPow25_7 = 6103515625.0;  // 25^7
    double cab1 = std::sqrt(c1.a * c1.a + c1.b * c1.b);
    double cab2 = std::sqrt(c2.a * c2.a + c2.b * c2.b);
    double cab = 0.5 * (cab1 + cab2);
    double cab7 = std::pow(cab, 7.0);
    double g = 0.5 * (1.0 - std::sqrt(cab7 / (cab7 + kPow25_7)));

    double ap1 = (1.0 + g) * c1.a;
    double ap2 = (1.0 + g) * c2.a;
    double cp1 = std::sqrt(ap1 * ap1 + c1.b * c1.b);
    double cp2 = std::sqrt(ap2 * ap2 + c2.b * c2.b);

    auto hue = [](double ap, double b) {
        if (ap == 0.0 && b == 0.0) return 0.0;
        double h = std::atan2(b, ap);
        return h < 0 ? h + 2.0 * M_PI : h;
    };
    double hp1 = hue(ap1, c1.b);
    double hp2 = hue(ap2, c2.b);

    double dL = c2.L - c1.L;
    double dC = cp2 - cp1;
    double dh = 0.0;
    if (cp1 * cp2 != 0.0) {
        dh = hp2 - hp1;
        if (dh > M_PI) dh -= 2.0 * M_PI;
        else if (dh < -M_PI) dh += 2.0 * M_PI;
    }
    double dH = 2.0 * std::sqrt(cp1 * cp2) * std::sin(0.5 * dh);

    double lbar = 0.5 * (c1.L + c2.L);
    double cbar = 0.5 * (cp1 + cp2);
    double hbar = hp1 + hp2;
    if (cp1 * cp2 != 0.0) {
        if (std::fabs(hp1 - hp2) > M_PI) hbar += (hbar < 2.0 * M_PI) ? 2.0 * M_PI : -2.0 * M_PI;
        hbar *= 0.5;
    }

    double T = 1.0 - 0.17 * std::cos(hbar - M_PI / 6.0) + 0.24 * std::cos(2.0 * hbar) +
               0.32 * std::cos(3.0 * hbar + M_PI / 30.0) -
               0.20 * std::cos(4.0 * hbar - 21.0 * M_PI / 60.0);
    double hbar_deg = hbar * 180.0 / M_PI;
    double dtheta = 30.0 * std::exp(-((hbar_deg - 275.0) / 25.0) * ((hbar_deg - 275.0) / 25.0));
    double cbar7 = std::pow(cbar, 7.0);
    double rc = 2.0 * std::sqrt(cbar7 / (cbar7 + kPow25_7));
    double rt = -std::sin(2.0 * dtheta * M_PI / 180.0) * rc;

    double l50 = (lbar - 50.0) * (lbar - 50.0);
    double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
    double sc = 1.0 + 0.045 * cbar;
    double sh = 1.0 + 0.015 * cbar * T;

    double tl = dL / sl, tc = dC / sc, th = dH / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double delta_e_2000(const Vec3& a, const Vec3& b) {
    return ciede2000(srgb_to_lab(a), srgb_to_lab(b));
}

}  // namespace mixwb::color
