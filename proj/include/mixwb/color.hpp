#pragma once

#include <array>
#include <optional>
#include <string>

#include "mixwb/image.hpp"

namespace mixwb::color {

using Vec3 = std::array<double, 3>;

// Named white-balance preset bound to a correlated color temperature.
// Canonical bindings: t=2850, f=3800, d=5500, c=6500, s=7500 Kelvin.
struct WBSetting {
    char name;   // one of t f d c s
    double cct;  // Kelvin
};

WBSetting wb_setting(char name);
std::vector<WBSetting> preset_set(const std::string& names);  // e.g. "tds", "tfdcs"

inline constexpr double kFixedWBCct = 5500.0;  // daylight render

// Per-light color in linear sRGB, normalized so g == 1.
struct IlluminantRGB {
    Vec3 rgb;
};

// Scalar sRGB transfer curve (IEC 61966-2-1).
double srgb_encode(double linear);
double srgb_decode(double encoded);

Image srgb_gamma(const Image& img);    // LinearSRGB -> GammaSRGB
Image srgb_degamma(const Image& img);  // GammaSRGB -> LinearSRGB

// Planckian-locus chromaticity via the Kim et al. cubic approximation,
// then xy -> XYZ -> linear sRGB, G-normalized. Valid for 1667..25000 K.
IlluminantRGB cct_to_illuminant(double cct);

// Intermediate xy chromaticity, exposed for the spectral-oracle tests.
std::array<double, 2> cct_to_xy(double cct);

// Per-channel division by the illuminant color, clamped to [0,1].
// Valid on linear images only.
Image diagonal_wb(const Image& img, const IlluminantRGB& illum);

// 11-term polynomial basis: (R, G, B, RG, RB, GB, R^2, G^2, B^2, RGB, 1).
inline constexpr int kPolyTerms = 11;
std::array<double, kPolyTerms> poly_expand(const Vec3& rgb);

// Angle between RGB vectors in degrees; nullopt when either norm < 1e-9.
std::optional<double> angular_error(const Vec3& a, const Vec3& b);

struct Lab {
    double L, a, b;
};

Lab srgb_to_lab(const Vec3& gamma_rgb);  // D65 white point

// CIEDE2000 with kL = kC = kH = 1.
double ciede2000(const Lab& a, const Lab& b);
double delta_e_2000(const Vec3& gamma_rgb_a, const Vec3& gamma_rgb_b);

}  // namespace mixwb::color
