#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "mixwb/image.hpp"
#include "mixwb/rng.hpp"

#include <cstdio>
#include <filesystem>

using namespace mixwb;

namespace {

Image random_image(int w, int h, Rng& rng) {
    Image img(w, h, ColorSpace::GammaSRGB);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

struct TmpDir {
    std::filesystem::path path;
    TmpDir() {
        path = std::filesystem::temp_directory_path() /
               ("mixwb_imgtest_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TmpDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("png16 write/read reproduces quantized values exactly") {
    TmpDir tmp;
    Rng rng(5);
    Image img = random_image(33, 17, rng);
    // snap to the 16-bit lattice so the round trip is exact
    for (auto& v : img.px) v = std::round(v * 65535.f) / 65535.f;
    std::string path = (tmp.path / "a.png").string();
    write_png16(img, path, "deadbeef");
    Image back = read_png16(path, ColorSpace::GammaSRGB);
    CHECK(back.w == img.w);
    CHECK(back.h == img.h);
    CHECK(images_equal(back, img));
}

TEST_CASE("png16 bytes are deterministic") {
    TmpDir tmp;
    Rng rng(6);
    Image img = random_image(16, 16, rng);
    write_png16(img, (tmp.path / "a.png").string(), "d");
    write_png16(img, (tmp.path / "b.png").string(), "d");
    std::ifstream fa(tmp.path / "a.png", std::ios::binary);
    std::ifstream fb(tmp.path / "b.png", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
}

TEST_CASE("gray png16 roundtrips through the rgb reader") {
    TmpDir tmp;
    std::vector<float> map(8 * 8);
    Rng rng(9);
    for (auto& v : map) v = std::round(static_cast<float>(rng.uniform()) * 65535.f) / 65535.f;
    std::string path = (tmp.path / "g.png").string();
    write_png16_gray(map.data(), 8, 8, path);
    Image back = read_png16(path, ColorSpace::GammaSRGB);  // gray expands to rgb
    for (int i = 0; i < 64; ++i) {
        CHECK(back.px[i * 3 + 0] == doctest::Approx(map[i]).epsilon(1e-6));
        CHECK(back.px[i * 3 + 1] == back.px[i * 3 + 0]);
    }
}

TEST_CASE("resize_area preserves the mean and handles exact ratios") {
    Rng rng(7);
    Image img = random_image(64, 48, rng);
    Image half = resize_area(img, 32, 24);
    double m0 = 0, m1 = 0;
    for (float v : img.px) m0 += v;
    for (float v : half.px) m1 += v;
    m0 /= static_cast<double>(img.px.size());
    m1 /= static_cast<double>(half.px.size());
    CHECK(m1 == doctest::Approx(m0).epsilon(1e-5));

    // non-integer ratio still averages to the global mean
    Image odd = resize_area(img, 13, 9);
    double m2 = 0;
    for (float v : odd.px) m2 += v;
    m2 /= static_cast<double>(odd.px.size());
    CHECK(m2 == doctest::Approx(m0).epsilon(1e-5));

    CHECK_THROWS_AS(resize_area(img, 128, 48), std::invalid_argument);
}

TEST_CASE("resize_area of a constant image is constant") {
    Image img(40, 40, ColorSpace::LinearRaw, 0.37f);
    Image small = resize_area(img, 7, 7);
    for (float v : small.px) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
}

TEST_CASE("resize_bilinear identity and constant preservation") {
    Rng rng(8);
    Image img = random_image(20, 20, rng);
    Image same = resize_bilinear(img, 20, 20);
    CHECK(rms_diff(img, same) < 1e-7);

    Image flat(10, 10, ColorSpace::GammaSRGB, 0.6f);
    Image up = resize_bilinear(flat, 37, 23);
    for (float v : up.px) CHECK(v == doctest::Approx(0.6f).epsilon(1e-6));
}
