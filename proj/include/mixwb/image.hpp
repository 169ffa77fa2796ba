#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixwb {

enum class ColorSpace { LinearRaw, LinearSRGB, GammaSRGB };

const char* to_string(ColorSpace s);

struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// H x W x 3 interleaved float buffer in [0,1] with an explicit color-space
// tag. Operations check the tag instead of converting silently.
struct Image {
    int w = 0;
    int h = 0;
    ColorSpace space = ColorSpace::LinearRaw;
    std::vector<float> px;  // size w*h*3, row-major, RGB interleaved

    Image() = default;
    Image(int width, int height, ColorSpace cs, float fill = 0.f)
        : w(width), h(height), space(cs), px(static_cast<std::size_t>(width) * height * 3, fill) {}

    float* at(int x, int y) { return px.data() + (static_cast<std::size_t>(y) * w + x) * 3; }
    const float* at(int x, int y) const {
        return px.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(w) * h; }

    void require_space(ColorSpace s, const char* op) const;

    void clamp01();
};

// 16-bit RGB PNG. Values are quantized as round(v * 65535). An optional
// text chunk carries a provenance digest; timestamps are never written so
// identical pixels give identical bytes.
void write_png16(const Image& img, const std::string& path, const std::string& digest = "");
Image read_png16(const std::string& path, ColorSpace space);

// Single-channel 16-bit grayscale PNG (weight-map dumps).
void write_png16_gray(const float* data, int w, int h, const std::string& path,
                      const std::string& digest = "");

// Area-average (box) resize; requires target <= source on both axes.
Image resize_area(const Image& src, int out_w, int out_h);

// Bilinear resize, half-pixel-center convention, either direction.
Image resize_bilinear(const Image& src, int out_w, int out_h);

bool images_equal(const Image& a, const Image& b);
double rms_diff(const Image& a, const Image& b);

}  // namespace mixwb
