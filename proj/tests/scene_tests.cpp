#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "json.hpp"
#include "mixwb/scene.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace mixwb;
using namespace mixwb::synth;
namespace fs = std::filesystem;

namespace {

SceneSpec basic_spec(std::uint64_t seed = 11, AlbedoKind kind = AlbedoKind::Patches) {
    SceneSpec s;
    s.id = "test";
    s.seed = seed;
    s.width = 64;
    s.height = 64;
    s.albedo_kind = kind;
    s.lights = {{2850.0, MixFieldKind::Halfplane, {1, 0, 0.5, 0.1}},
                {7500.0, MixFieldKind::Halfplane, {-1, 0, -0.5, 0.1}}};
    s.camera_wb_cct = 5500.0;
    return s;
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("mixwb_scene_") + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("synth_albedo determinism and range") {
    for (AlbedoKind kind : {AlbedoKind::Patches, AlbedoKind::Gradients, AlbedoKind::Checker,
                            AlbedoKind::Mixed}) {
        SceneSpec spec = basic_spec(23, kind);
        Image a = synth_albedo(spec);
        Image b = synth_albedo(spec);
        CHECK(images_equal(a, b));
        float mn = 1, mx = 0;
        for (float v : a.px) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        CHECK(mn >= 0.05f);
        CHECK(mx <= 0.95f);
    }
    // a different seed moves the pixels
    CHECK(!images_equal(synth_albedo(basic_spec(1)), synth_albedo(basic_spec(2))));
}

TEST_CASE("checker albedo has exactly two distinct colors") {
    SceneSpec spec = basic_spec(31, AlbedoKind::Checker);
    Image a = synth_albedo(spec);
    std::set<std::array<float, 3>> colors;
    for (std::size_t p = 0; p < a.pixel_count(); ++p)
        colors.insert({a.px[p * 3], a.px[p * 3 + 1], a.px[p * 3 + 2]});
    CHECK(colors.size() == 2);
}

TEST_CASE("patches albedo has at least 8 distinct colors and a gray region") {
    SceneSpec spec = basic_spec(37, AlbedoKind::Patches);
    Image a = synth_albedo(spec);
    std::set<std::array<float, 3>> colors;
    bool has_gray = false;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        std::array<float, 3> c{a.px[p * 3], a.px[p * 3 + 1], a.px[p * 3 + 2]};
        colors.insert(c);
        if (c[0] == c[1] && c[1] == c[2]) has_gray = true;
    }
    CHECK(colors.size() >= 8);
    CHECK(has_gray);
}

TEST_CASE("mix fields sum to one and stay in [0,1]") {
    SceneSpec spec = basic_spec();
    spec.lights.push_back({5500.0, MixFieldKind::Radial, {0.5, 0.5, 0.3}});
    auto fields = synth_mix_fields(spec);
    REQUIRE(fields.size() == 3);
    for (std::size_t p = 0; p < fields[0].size(); ++p) {
        double sum = 0;
        for (const auto& f : fields) {
            CHECK(f[p] >= 0.f);
            CHECK(f[p] <= 1.f);
            sum += f[p];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("two-light halfplane saturates to (1,0) away from the seam") {
    SceneSpec spec = basic_spec();
    auto fields = synth_mix_fields(spec);
    // sample far left and far right, mid height
    std::size_t left = 32u * 64u + 2u;
    std::size_t right = 32u * 64u + 61u;
    CHECK(fields[0][left] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(fields[1][left] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(fields[0][right] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(fields[1][right] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("scene with every light and camera at 5500 K equals its ground truth bit-exactly") {
    SceneSpec spec = basic_spec();
    for (auto& l : spec.lights) l.cct = 5500.0;
    spec.camera_wb_cct = 5500.0;
    ScenePair pair = render_scene(spec);
    CHECK(images_equal(pair.input, pair.ground_truth));
}

TEST_CASE("single effective illuminant fully cancelled by matching camera WB") {
    SceneSpec spec = basic_spec();
    for (auto& l : spec.lights) l.cct = 2850.0;  // both lights identical = one illuminant
    spec.camera_wb_cct = 2850.0;
    ScenePair pair = render_scene(spec);
    CHECK(rms_diff(pair.input, pair.ground_truth) < 1e-6);
}

TEST_CASE("mixed 2850/7500 halfplane: warm left half, cool right half vs ground truth") {
    SceneSpec spec = basic_spec();
    ScenePair pair = render_scene(spec);
    auto half_rb_ratio = [](const Image& img, int x0, int x1) {
        double r = 0, b = 0;
        for (int y = 0; y < img.h; ++y)
            for (int x = x0; x < x1; ++x) {
                r += img.at(x, y)[0];
                b += img.at(x, y)[2];
            }
        return r / std::max(b, 1e-9);
    };
    double left_in = half_rb_ratio(pair.input, 0, 24);
    double left_gt = half_rb_ratio(pair.ground_truth, 0, 24);
    double right_in = half_rb_ratio(pair.input, 40, 64);
    double right_gt = half_rb_ratio(pair.ground_truth, 40, 64);
    CHECK(left_in > left_gt);    // tungsten region renders warm
    CHECK(right_in < right_gt);  // shade region renders cool
}

TEST_CASE("G channel of input and ground truth match exactly before gamma") {
    SceneSpec spec = basic_spec(51, AlbedoKind::Gradients);
    spec.lights[0].cct = 2850.0;
    spec.lights[1].cct = 6500.0;
    spec.camera_wb_cct = 3800.0;

    LinearRender lin = render_linear(spec);
    double exposure = scene_exposure(lin);
    SceneSpec gt_spec = spec;
    for (auto& l : gt_spec.lights) l.cct = 5500.0;
    gt_spec.camera_wb_cct = 5500.0;
    LinearRender lin_gt = render_linear(gt_spec);

    // camera WB has g == 1, so the pre-WB G plane is already the post-WB one
    double rms = 0;
    for (std::size_t p = 0; p < lin.rgb.size() / 3; ++p) {
        double d = lin.rgb[p * 3 + 1] * exposure - lin_gt.rgb[p * 3 + 1] * exposure;
        rms += d * d;
    }
    rms = std::sqrt(rms / (lin.rgb.size() / 3));
    CHECK(rms < 1e-12);
}

TEST_CASE("preset captures of a single-light scene differ by a constant per-channel ratio") {
    SceneSpec spec = basic_spec();
    for (auto& l : spec.lights) l.cct = 3800.0;
    LinearRender lin = render_linear(spec);
    double e = scene_exposure(lin);
    Image cap_t = render_capture(lin, e, 2850.0);
    Image cap_s = render_capture(lin, e, 7500.0);
    // compare pre-gamma, skipping clamped pixels
    double ratio[3] = {0, 0, 0};
    bool first = true;
    for (std::size_t p = 0; p < cap_t.pixel_count(); ++p) {
        double a[3], b[3];
        bool ok = true;
        for (int c = 0; c < 3; ++c) {
            a[c] = color::srgb_decode(cap_t.px[p * 3 + c]);
            b[c] = color::srgb_decode(cap_s.px[p * 3 + c]);
            if (a[c] <= 1e-4 || a[c] >= 0.999 || b[c] <= 1e-4 || b[c] >= 0.999) ok = false;
        }
        if (!ok) continue;
        if (first) {
            for (int c = 0; c < 3; ++c) ratio[c] = a[c] / b[c];
            first = false;
        } else {
            for (int c = 0; c < 3; ++c)
                CHECK(a[c] / b[c] == doctest::Approx(ratio[c]).epsilon(2e-3));
        }
    }
    CHECK(!first);
}

TEST_CASE("spec json round trip") {
    SceneSpec spec = basic_spec(77, AlbedoKind::Mixed);
    SceneSpec back = SceneSpec::from_json(spec.to_json());
    CHECK(back.id == spec.id);
    CHECK(back.seed == spec.seed);
    CHECK(back.albedo_kind == spec.albedo_kind);
    REQUIRE(back.lights.size() == spec.lights.size());
    CHECK(back.lights[0].cct == spec.lights[0].cct);
    CHECK(back.lights[0].params == spec.lights[0].params);
    CHECK(images_equal(synth_albedo(spec), synth_albedo(back)));
}

TEST_CASE("spec validation rejects bad scenes") {
    SceneSpec spec = basic_spec();
    spec.lights.resize(1);
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = basic_spec();
    spec.lights[0].cct = 100.0;
    CHECK_THROWS_AS(spec.validate(), std::out_of_range);
    spec = basic_spec();
    spec.width = 4;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("generate_testset writes a reproducible dataset") {
    TmpDir tmp("gen");
    TestsetOptions opts;
    opts.width = opts.height = 48;
    std::string manifest1 = generate_testset(4, 99, (tmp.path / "a").string(), opts);
    std::string manifest2 = generate_testset(4, 99, (tmp.path / "b").string(), opts);
    CHECK(manifest1 == manifest2);

    nlohmann::json m = nlohmann::json::parse(manifest1);
    REQUIRE(m.at("scenes").size() == 4);
    for (const auto& e : m.at("scenes")) {
        fs::path dir = tmp.path / "a" / e.at("dir").get<std::string>();
        for (const auto& f : e.at("files")) CHECK(fs::exists(dir / f.get<std::string>()));
    }

    // re-rendering a stored spec reproduces the stored ground truth bit-exactly
    fs::path sdir = tmp.path / "a" / "scene_0002";
    std::ifstream sf(sdir / "spec.json");
    std::string stext((std::istreambuf_iterator<char>(sf)), std::istreambuf_iterator<char>());
    SceneSpec spec = SceneSpec::from_json(stext);
    ScenePair pair = render_scene(spec);
    Image stored_gt = read_png16((sdir / "gt.png").string(), ColorSpace::GammaSRGB);
    Image quantized = pair.ground_truth;
    for (auto& v : quantized.px) v = std::round(v * 65535.f) / 65535.f;
    CHECK(images_equal(stored_gt, quantized));
}

TEST_CASE("generate_testset validates before writing anything") {
    TmpDir tmp("badcct");
    TestsetOptions opts;
    opts.width = opts.height = 32;
    opts.light_ccts = {500.0, 5500.0};  // out of range
    CHECK_THROWS_AS(generate_testset(2, 1, (tmp.path / "bad").string(), opts), std::out_of_range);
    CHECK(!fs::exists(tmp.path / "bad" / "manifest.json"));
    CHECK(!fs::exists(tmp.path / "bad" / "scene_0000"));
}

TEST_CASE("sampled scene specs use at least two lights and valid fields") {
    TestsetOptions opts;
    for (int i = 0; i < 30; ++i) {
        SceneSpec s = sample_scene_spec(123, i, opts);
        s.validate();
        CHECK(s.lights.size() >= 2);
        auto fields = synth_mix_fields(s);
        for (std::size_t p = 0; p < fields[0].size(); p += 97) {
            double sum = 0;
            for (const auto& f : fields) sum += f[p];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}
