#include "mixwb/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace mixwb {

const char* to_string(ColorSpace s) {
    switch (s) {
        case ColorSpace::LinearRaw: return "linear-raw";
        case ColorSpace::LinearSRGB: return "linear-srgb";
        case ColorSpace::GammaSRGB: return "gamma-srgb";
    }
    return "?";
}

void Image::require_space(ColorSpace s, const char* op) const {
    if (space != s)
        throw ContractError(std::string(op) + ": expected " + to_string(s) + " image, got " +
                            to_string(space));
}

void Image::clamp01() {
    for (float& v : px) v = std::min(1.f, std::max(0.f, v));
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png16(const Image& img, const std::string& path, const std::string& digest) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.w, img.h, 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_text texts[2];
    std::memset(texts, 0, sizeof(texts));
    char key_space[] = "mixwb:space";
    char key_digest[] = "mixwb:digest";
    std::string space_str = to_string(img.space);
    texts[0].compression = PNG_TEXT_COMPRESSION_NONE;
    texts[0].key = key_space;
    texts[0].text = const_cast<char*>(space_str.c_str());
    int ntext = 1;
    if (!digest.empty()) {
        texts[1].compression = PNG_TEXT_COMPRESSION_NONE;
        texts[1].key = key_digest;
        texts[1].text = const_cast<char*>(digest.c_str());
        ntext = 2;
    }
    png_set_text(png, info, texts, ntext);
    png_write_info(png, info);

    std::vector<std::uint16_t> row(static_cast<std::size_t>(img.w) * 3);
    std::vector<png_byte> rowbytes(row.size() * 2);
    for (int y = 0; y < img.h; ++y) {
        const float* src = img.at(0, y);
        for (std::size_t i = 0; i < row.size(); ++i) {
            float v = std::min(1.f, std::max(0.f, src[i]));
            row[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
        // PNG is big-endian on the wire
        for (std::size_t i = 0; i < row.size(); ++i) {
            rowbytes[2 * i] = static_cast<png_byte>(row[i] >> 8);
            rowbytes[2 * i + 1] = static_cast<png_byte>(row[i] & 0xff);
        }
        png_write_row(png, rowbytes.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_png16_gray(const float* data, int w, int h, const std::string& path,
                      const std::string& digest) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_text text;
    std::memset(&text, 0, sizeof(text));
    char key_digest[] = "mixwb:digest";
    if (!digest.empty()) {
        text.compression = PNG_TEXT_COMPRESSION_NONE;
        text.key = key_digest;
        text.text = const_cast<char*>(digest.c_str());
        png_set_text(png, info, &text, 1);
    }
    png_write_info(png, info);
    std::vector<png_byte> rowbytes(static_cast<std::size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float v = std::min(1.f, std::max(0.f, data[static_cast<std::size_t>(y) * w + x]));
            auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
            rowbytes[2 * x] = static_cast<png_byte>(q >> 8);
            rowbytes[2 * x + 1] = static_cast<png_byte>(q & 0xff);
        }
        png_write_row(png, rowbytes.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png16(const std::string& path, ColorSpace space) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng read error: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth < 16) png_set_expand_16(png);
    png_read_update_info(png, info);

    Image img(static_cast<int>(w), static_cast<int>(h), space);
    std::vector<png_byte> rowbytes(static_cast<std::size_t>(w) * 3 * 2);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, rowbytes.data(), nullptr);
        float* dst = img.at(0, static_cast<int>(y));
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * 3; ++i) {
            std::uint16_t v = static_cast<std::uint16_t>((rowbytes[2 * i] << 8) | rowbytes[2 * i + 1]);
            dst[i] = static_cast<float>(v) / 65535.0f;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

Image resize_area(const Image& src, int out_w, int out_h) {
    if (out_w > src.w || out_h > src.h)
        throw std::invalid_argument("resize_area: target exceeds source size");
    if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("resize_area: bad target size");
    Image dst(out_w, out_h, src.space);
    double sx = static_cast<double>(src.w) / out_w;
    double sy = static_cast<double>(src.h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (int ox = 0; ox < out_w; ++ox) {
            double x0 = ox * sx, x1 = (ox + 1) * sx;
            double acc[3] = {0, 0, 0};
            double area = 0;
            for (int iy = static_cast<int>(y0); iy < src.h && iy < y1; ++iy) {
                double wy = std::min<double>(y1, iy + 1) - std::max<double>(y0, iy);
                if (wy <= 0) continue;
                for (int ix = static_cast<int>(x0); ix < src.w && ix < x1; ++ix) {
                    double wx = std::min<double>(x1, ix + 1) - std::max<double>(x0, ix);
                    if (wx <= 0) continue;
                    const float* p = src.at(ix, iy);
                    double wgt = wx * wy;
                    acc[0] += wgt * p[0];
                    acc[1] += wgt * p[1];
                    acc[2] += wgt * p[2];
                    area += wgt;
                }
            }
            float* q = dst.at(ox, oy);
            for (int c = 0; c < 3; ++c) q[c] = static_cast<float>(acc[c] / area);
        }
    }
    return dst;
}

Image resize_bilinear(const Image& src, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("resize_bilinear: bad target size");
    Image dst(out_w, out_h, src.space);
    double sx = static_cast<double>(src.w) / out_w;
    double sy = static_cast<double>(src.h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double ty = fy - y0;
        int ya = std::clamp(y0, 0, src.h - 1);
        int yb = std::clamp(y0 + 1, 0, src.h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double tx = fx - x0;
            int xa = std::clamp(x0, 0, src.w - 1);
            int xb = std::clamp(x0 + 1, 0, src.w - 1);
            const float* p00 = src.at(xa, ya);
            const float* p10 = src.at(xb, ya);
            const float* p01 = src.at(xa, yb);
            const float* p11 = src.at(xb, yb);
            float* q = dst.at(ox, oy);
            for (int c = 0; c < 3; ++c) {
                double top = p00[c] + (p10[c] - p00[c]) * tx;
                double bot = p01[c] + (p11[c] - p01[c]) * tx;
                q[c] = static_cast<float>(top + (bot - top) * ty);
            }
        }
    }
    return dst;
}

bool images_equal(const Image& a, const Image& b) {
    return a.w == b.w && a.h == b.h && a.space == b.space && a.px == b.px;
}

double rms_diff(const Image& a, const Image& b) {
    if (a.w != b.w || a.h != b.h) throw std::invalid_argument("rms_diff: size mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < a.px.size(); ++i) {
        double d = static_cast<double>(a.px[i]) - b.px[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.px.size()));
}

}  // namespace mixwb
