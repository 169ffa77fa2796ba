#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "mixwb/color.hpp"
#include "mixwb/rng.hpp"

#include <cmath>

using namespace mixwb;
using namespace mixwb::color;

namespace {

Image const_image(int w, int h, ColorSpace cs, float r, float g, float b) {
    Image img(w, h, cs);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        img.px[p * 3 + 0] = r;
        img.px[p * 3 + 1] = g;
        img.px[p * 3 + 2] = b;
    }
    return img;
}

Image random_image(int w, int h, ColorSpace cs, Rng& rng) {
    Image img(w, h, cs);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

// McCamy's inverse approximation (xy -> CCT); an independent published
// formula used to cross-check the forward Planckian-locus polynomial.
double mccamy_cct(double x, double y) {
    double n = (x - 0.3320) / (0.1858 - y);
    return 449.0 * n * n * n + 3525.0 * n * n + 6823.3 * n + 5520.33;
}

}  // namespace

TEST_CASE("srgb transfer curve fixed points and breakpoint") {
    CHECK(srgb_encode(0.0) == 0.0);
    CHECK(srgb_encode(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    // both branch formulas meet at the breakpoint
    CHECK(srgb_encode(0.0031308) == doctest::Approx(0.04045).epsilon(1e-4));
    CHECK(std::fabs(srgb_encode(0.0031308) - 12.92 * 0.0031308) < 1e-12);
    CHECK(srgb_decode(0.04045) == doctest::Approx(0.0031308).epsilon(1e-4));
    CHECK(srgb_decode(1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("srgb round trip: decode(encode(x)) == x") {
    Rng rng(42);
    for (int i = 0; i < 100000; ++i) {
        double x = rng.uniform();
        CHECK(std::fabs(srgb_decode(srgb_encode(x)) - x) < 1e-6);
    }
    // decode(0.5) recovers the value whose encoding is 0.5
    double x = srgb_decode(0.5);
    CHECK(std::fabs(srgb_encode(x) - 0.5) < 1e-6);
}

TEST_CASE("srgb image ops check the space tag") {
    Image lin = const_image(4, 4, ColorSpace::LinearSRGB, 0.2f, 0.4f, 0.6f);
    Image g = srgb_gamma(lin);
    CHECK(g.space == ColorSpace::GammaSRGB);
    CHECK_THROWS_AS(srgb_gamma(g), ContractError);
    Image back = srgb_degamma(g);
    CHECK(rms_diff(back, lin) < 1e-6);
    CHECK_THROWS_AS(srgb_degamma(lin), ContractError);
}

TEST_CASE("cct_to_illuminant warm/cool ordering and normalization") {
    auto warm = cct_to_illuminant(2850);
    CHECK(warm.rgb[1] == 1.0);
    CHECK(warm.rgb[0] > 1.0);
    CHECK(warm.rgb[2] < 1.0);
    auto cool = cct_to_illuminant(7500);
    CHECK(cool.rgb[1] == 1.0);
    CHECK(cool.rgb[2] > 1.0);
    CHECK(cool.rgb[0] < 1.0);
    for (double cct : {1700.0, 2850.0, 3800.0, 5500.0, 6500.0, 7500.0, 20000.0})
        CHECK(cct_to_illuminant(cct).rgb[1] == 1.0);
    CHECK_THROWS_AS(cct_to_illuminant(1000), std::out_of_range);
    CHECK_THROWS_AS(cct_to_illuminant(30000), std::out_of_range);
}

TEST_CASE("cct_to_xy agrees with McCamy's inverse formula") {
    for (double cct : {2300.0, 2850.0, 3800.0, 4500.0, 5500.0, 6500.0, 7500.0, 9000.0}) {
        auto [x, y] = cct_to_xy(cct);
        double back = mccamy_cct(x, y);
        CHECK(std::fabs(back - cct) / cct < 0.03);
    }
}

TEST_CASE("cct_to_illuminant warmth is monotone over 2000..10000 K") {
    double prev = 1e300;
    for (int cct = 2000; cct <= 10000; cct += 100) {
        auto rgb = cct_to_illuminant(cct).rgb;
        double ratio = rgb[0] / rgb[2];
        CHECK(ratio < prev);
        prev = ratio;
    }
}

TEST_CASE("diagonal_wb identity, perfect correction and inverse pair") {
    Rng rng(7);
    Image img = random_image(8, 8, ColorSpace::LinearRaw, rng);
    Image same = diagonal_wb(img, {{1, 1, 1}});
    CHECK(rms_diff(img, same) == 0.0);

    // a flat patch of the illuminant color corrects to flat gray
    IlluminantRGB e{{1.4, 1.0, 0.7}};
    Image flat = const_image(4, 4, ColorSpace::LinearRaw, 0.5f * 1.4f, 0.5f, 0.5f * 0.7f);
    Image corrected = diagonal_wb(flat, e);
    for (std::size_t p = 0; p < corrected.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c)
            CHECK(corrected.px[p * 3 + c] == doctest::Approx(0.5).epsilon(1e-6));

    // scaling down then back up is the identity where nothing clamps
    Image down = diagonal_wb(img, {{2.0, 2.0, 2.0}});
    Image up = diagonal_wb(down, {{0.5, 0.5, 0.5}});
    CHECK(rms_diff(up, img) < 1e-6);

    CHECK_THROWS_AS(diagonal_wb(img, {{0.0, 1.0, 1.0}}), std::domain_error);
}

TEST_CASE("poly_expand term-by-term") {
    auto z = poly_expand({0, 0, 0});
    for (int i = 0; i < 10; ++i) CHECK(z[i] == 0.0);
    CHECK(z[10] == 1.0);

    auto ones = poly_expand({1, 1, 1});
    for (double v : ones) CHECK(v == 1.0);

    auto f = poly_expand({0.5, 0.25, 1.0});
    CHECK(f[0] == 0.5);
    CHECK(f[1] == 0.25);
    CHECK(f[2] == 1.0);
    CHECK(f[3] == doctest::Approx(0.125));   // RG
    CHECK(f[4] == doctest::Approx(0.5));     // RB
    CHECK(f[5] == doctest::Approx(0.25));    // GB
    CHECK(f[6] == doctest::Approx(0.25));    // R^2
    CHECK(f[7] == doctest::Approx(0.0625));  // G^2
    CHECK(f[8] == doctest::Approx(1.0));     // B^2
    CHECK(f[9] == doctest::Approx(0.125));   // RGB
    CHECK(f[10] == 1.0);

    // every component is the product of its named inputs
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
        auto p = poly_expand({r, g, b});
        CHECK(p[3] == r * g);
        CHECK(p[4] == r * b);
        CHECK(p[5] == g * b);
        CHECK(p[6] == r * r);
        CHECK(p[7] == g * g);
        CHECK(p[8] == b * b);
        CHECK(p[9] == r * g * b);
    }
}

TEST_CASE("angular_error analytic cases") {
    CHECK(*angular_error({0.3, 0.5, 0.7}, {0.3, 0.5, 0.7}) < 1e-5);
    CHECK(*angular_error({1, 0, 0}, {0, 1, 0}) == doctest::Approx(90.0));
    CHECK(*angular_error({1, 1, 0}, {1, 0, 0}) == doctest::Approx(45.0));
    // degenerate vectors are flagged, not computed
    CHECK(!angular_error({0, 0, 0}, {1, 0, 0}).has_value());
    CHECK(!angular_error({1, 0, 0}, {1e-12, 0, 0}).has_value());
}

TEST_CASE("angular_error is scale invariant") {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        Vec3 a{rng.uniform() + 0.01, rng.uniform() + 0.01, rng.uniform() + 0.01};
        Vec3 b{rng.uniform() + 0.01, rng.uniform() + 0.01, rng.uniform() + 0.01};
        double s = rng.uniform(0.1, 5.0), u = rng.uniform(0.1, 5.0);
        Vec3 sa{s * a[0], s * a[1], s * a[2]};
        Vec3 ub{u * b[0], u * b[1], u * b[2]};
        CHECK(std::fabs(*angular_error(a, b) - *angular_error(sa, ub)) < 1e-9);
    }
}

// Sharma, Wu & Dalal CIEDE2000 verification data, pairs 1..20.
TEST_CASE("ciede2000 reference pairs") {
    struct Case {
        Lab a, b;
        double expected;
    };
    const Case cases[] = {
        {{50.0000, 2.6772, -79.7751}, {50.0000, 0.0000, -82.7485}, 2.0425},
        {{50.0000, 3.1571, -77.2803}, {50.0000, 0.0000, -82.7485}, 2.8615},
        {{50.0000, 2.8361, -74.0200}, {50.0000, 0.0000, -82.7485}, 3.4412},
        {{50.0000, -1.3802, -84.2814}, {50.0000, 0.0000, -82.7485}, 1.0000},
        {{50.0000, -1.1848, -84.8006}, {50.0000, 0.0000, -82.7485}, 1.0000},
        {{50.0000, -0.9009, -85.5211}, {50.0000, 0.0000, -82.7485}, 1.0000},
        {{50.0000, 0.0000, 0.0000}, {50.0000, -1.0000, 2.0000}, 2.3669},
        {{50.0000, -1.0000, 2.0000}, {50.0000, 0.0000, 0.0000}, 2.3669},
        {{50.0000, 2.4900, -0.0010}, {50.0000, -2.4900, 0.0009}, 7.1792},
        {{50.0000, 2.4900, -0.0010}, {50.0000, -2.4900, 0.0010}, 7.1792},
        {{50.0000, 2.4900, -0.0010}, {50.0000, -2.4900, 0.0011}, 7.2195},
        {{50.0000, 2.4900, -0.0010}, {50.0000, -2.4900, 0.0012}, 7.2195},
        {{50.0000, -0.0010, 2.4900}, {50.0000, 0.0009, -2.4900}, 4.8045},
        {{50.0000, -0.0010, 2.4900}, {50.0000, 0.0010, -2.4900}, 4.8045},
        {{50.0000, -0.0010, 2.4900}, {50.0000, 0.0011, -2.4900}, 4.7461},
        {{50.0000, 2.5000, 0.0000}, {50.0000, 0.0000, -2.5000}, 4.3065},
        {{50.0000, 2.5000, 0.0000}, {73.0000, 25.0000, -18.0000}, 27.1492},
        {{50.0000, 2.5000, 0.0000}, {61.0000, -5.0000, 29.0000}, 22.8977},
        {{50.0000, 2.5000, 0.0000}, {56.0000, -27.0000, -3.0000}, 31.9030},
        {{50.0000, 2.5000, 0.0000}, {58.0000, 24.0000, 15.0000}, 19.4535},
    };
    for (const auto& c : cases) CHECK(std::fabs(ciede2000(c.a, c.b) - c.expected) < 1e-4);
}

TEST_CASE("delta_e_2000 on sRGB pixels: zero, symmetry, positivity") {
    Rng rng(19);
    CHECK(delta_e_2000({0.3, 0.6, 0.9}, {0.3, 0.6, 0.9}) == 0.0);
    for (int t = 0; t < 500; ++t) {
        Vec3 a{rng.uniform(), rng.uniform(), rng.uniform()};
        Vec3 b{rng.uniform(), rng.uniform(), rng.uniform()};
        double ab = delta_e_2000(a, b);
        double ba = delta_e_2000(b, a);
        CHECK(std::fabs(ab - ba) < 1e-12);
        CHECK(ab >= 0.0);
        if (a != b) CHECK(ab > 0.0);
    }
}

TEST_CASE("preset set parsing") {
    auto tds = preset_set("tds");
    REQUIRE(tds.size() == 3);
    CHECK(tds[0].cct == 2850.0);
    CHECK(tds[1].cct == 5500.0);
    CHECK(tds[2].cct == 7500.0);
    auto all = preset_set("tfdcs");
    REQUIRE(all.size() == 5);
    CHECK(all[1].cct == 3800.0);
    CHECK(all[3].cct == 6500.0);
    CHECK_THROWS(preset_set("xyz"));
    CHECK_THROWS(preset_set(""));
}
