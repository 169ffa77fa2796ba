#include "mixwb/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mixwb/parallel.hpp"
#include "mixwb/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixwb::synth {

AlbedoKind albedo_kind_from_string(const std::string& s) {
    if (s == "patches") return AlbedoKind::Patches;
    if (s == "gradients") return AlbedoKind::Gradients;
    if (s == "checker") return AlbedoKind::Checker;
    if (s == "mixed") return AlbedoKind::Mixed;
    throw std::invalid_argument("unknown albedo kind: " + s);
}

const char* to_string(AlbedoKind k) {
    switch (k) {
        case AlbedoKind::Patches: return "patches";
        case AlbedoKind::Gradients: return "gradients";
        case AlbedoKind::Checker: return "checker";
        case AlbedoKind::Mixed: return "mixed";
    }
    return "?";
}

MixFieldKind mix_field_from_string(const std::string& s) {
    if (s == "ramp") return MixFieldKind::Ramp;
    if (s == "radial") return MixFieldKind::Radial;
    if (s == "halfplane") return MixFieldKind::Halfplane;
    throw std::invalid_argument("unknown mix field kind: " + s);
}

const char* to_string(MixFieldKind k) {
    switch (k) {
        case MixFieldKind::Ramp: return "ramp";
        case MixFieldKind::Radial: return "radial";
        case MixFieldKind::Halfplane: return "halfplane";
    }
    return "?";
}

void SceneSpec::validate() const {
    if (width < 16 || height < 16) throw std::invalid_argument("scene size below 16x16");
    if (lights.size() < 2) throw std::invalid_argument("scene needs at least 2 lights");
    for (const auto& l : lights) color::cct_to_xy(l.cct);  // throws on range error
    color::cct_to_xy(camera_wb_cct);
}

std::string SceneSpec::to_json() const {
    json j;
    j["id"] = id;
    j["seed"] = seed;
    j["width"] = width;
    j["height"] = height;
    j["albedo_kind"] = to_string(albedo_kind);
    j["camera_wb_cct"] = camera_wb_cct;
    json jl = json::array();
    for (const auto& l : lights)
        jl.push_back({{"cct", l.cct}, {"field", to_string(l.field)}, {"params", l.params}});
    j["lights"] = jl;
    return j.dump(2);
}

SceneSpec SceneSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    SceneSpec s;
    s.id = j.at("id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.albedo_kind = albedo_kind_from_string(j.at("albedo_kind").get<std::string>());
    s.camera_wb_cct = j.at("camera_wb_cct").get<double>();
    for (const auto& jl : j.at("lights")) {
        LightSpec l;
        l.cct = jl.at("cct").get<double>();
        l.field = mix_field_from_string(jl.at("field").get<std::string>());
        l.params = jl.at("params").get<std::vector<double>>();
        s.lights.push_back(std::move(l));
    }
    return s;
}

namespace {

constexpr float kAlbedoLo = 0.05f;
constexpr float kAlbedoHi = 0.95f;

float clamp_albedo(double v) {
    return static_cast<float>(std::min<double>(kAlbedoHi, std::max<double>(kAlbedoLo, v)));
}

std::array<float, 3> random_color(Rng& rng) {
    return {static_cast<float>(rng.uniform(0.08, 0.92)),
            static_cast<float>(rng.uniform(0.08, 0.92)),
            static_cast<float>(rng.uniform(0.08, 0.92))};
}

bool too_close(const std::array<float, 3>& a, const std::array<float, 3>& b) {
    float d = 0;
    for (int c = 0; c < 3; ++c) d = std::max(d, std::fabs(a[c] - b[c]));
    return d < 0.04f;
}

void fill_patches(Image& img, Rng& rng) {
    int gx = rng.range(3, 4), gy = rng.range(3, 4);
    int n = gx * gy;
    std::vector<std::array<float, 3>> colors;
    while (static_cast<int>(colors.size()) < n) {
        auto c = random_color(rng);
        bool ok = true;
        for (const auto& prev : colors)
            if (too_close(c, prev)) { ok = false; break; }
        if (ok) colors.push_back(c);
    }
    // one cell becomes near-achromatic
    int gray_cell = static_cast<int>(rng.below(static_cast<std::uint32_t>(n)));
    float g = static_cast<float>(rng.uniform(0.3, 0.7));
    colors[gray_cell] = {g, g, g};

    // jittered cell boundaries
    std::vector<int> xs(gx + 1), ys(gy + 1);
    for (int i = 0; i <= gx; ++i) {
        double b = static_cast<double>(i) / gx;
        if (i > 0 && i < gx) b += rng.uniform(-0.05, 0.05);
        xs[i] = static_cast<int>(std::lround(b * img.w));
    }
    for (int i = 0; i <= gy; ++i) {
        double b = static_cast<double>(i) / gy;
        if (i > 0 && i < gy) b += rng.uniform(-0.05, 0.05);
        ys[i] = static_cast<int>(std::lround(b * img.h));
    }
    for (int cy = 0; cy < gy; ++cy)
        for (int cx = 0; cx < gx; ++cx) {
            const auto& col = colors[cy * gx + cx];
            for (int y = ys[cy]; y < ys[cy + 1]; ++y)
                for (int x = xs[cx]; x < xs[cx + 1]; ++x) {
                    float* p = img.at(x, y);
                    p[0] = col[0];
                    p[1] = col[1];
                    p[2] = col[2];
                }
        }
}

void fill_gradients(Image& img, Rng& rng) {
    std::array<std::array<float, 3>, 4> corners;
    for (auto& c : corners) c = random_color(rng);
    for (int y = 0; y < img.h; ++y) {
        float ty = img.h > 1 ? static_cast<float>(y) / (img.h - 1) : 0.f;
        for (int x = 0; x < img.w; ++x) {
            float tx = img.w > 1 ? static_cast<float>(x) / (img.w - 1) : 0.f;
            float* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) {
                float top = corners[0][c] + (corners[1][c] - corners[0][c]) * tx;
                float bot = corners[2][c] + (corners[3][c] - corners[2][c]) * tx;
                p[c] = top + (bot - top) * ty;
            }
        }
    }
    // flat overlays give distinct regions on top of the smooth base
    int n_rects = rng.range(6, 9);
    int gray_rect = static_cast<int>(rng.below(static_cast<std::uint32_t>(n_rects)));
    for (int i = 0; i < n_rects; ++i) {
        auto col = random_color(rng);
        if (i == gray_rect) {
            float g = static_cast<float>(rng.uniform(0.3, 0.7));
            col = {g, g, g};
        }
        int rw = std::max(4, static_cast<int>(rng.uniform(0.1, 0.3) * img.w));
        int rh = std::max(4, static_cast<int>(rng.uniform(0.1, 0.3) * img.h));
        int x0 = static_cast<int>(rng.below(static_cast<std::uint32_t>(std::max(1, img.w - rw))));
        int y0 = static_cast<int>(rng.below(static_cast<std::uint32_t>(std::max(1, img.h - rh))));
        for (int y = y0; y < std::min(img.h, y0 + rh); ++y)
            for (int x = x0; x < std::min(img.w, x0 + rw); ++x) {
                float* p = img.at(x, y);
                p[0] = col[0];
                p[1] = col[1];
                p[2] = col[2];
            }
    }
}

void fill_checker(Image& img, Rng& rng) {
    auto a = random_color(rng);
    float g = static_cast<float>(rng.uniform(0.3, 0.7));
    std::array<float, 3> b{g, g, g};
    int cell = std::max(8, std::min(img.w, img.h) / 8);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            bool odd = ((x / cell) + (y / cell)) & 1;
            const auto& col = odd ? a : b;
            float* p = img.at(x, y);
            p[0] = col[0];
            p[1] = col[1];
            p[2] = col[2];
        }
}

}  // namespace

Image synth_albedo(const SceneSpec& spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, 0xA1BEDF));
    Image img(spec.width, spec.height, ColorSpace::LinearRaw);
    switch (spec.albedo_kind) {
        case AlbedoKind::Patches: fill_patches(img, rng); break;
        case AlbedoKind::Gradients: fill_gradients(img, rng); break;
        case AlbedoKind::Checker: fill_checker(img, rng); break;
        case AlbedoKind::Mixed: {
            fill_patches(img, rng);
            // soft multiplicative shading on top of the flat patches
            double ang = rng.uniform(0, 2 * M_PI);
            double dx = std::cos(ang), dy = std::sin(ang);
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) {
                    double u = (dx * (x + 0.5) / img.w + dy * (y + 0.5) / img.h + 1.0) * 0.5;
                    float s = static_cast<float>(0.75 + 0.25 * u);
                    float* p = img.at(x, y);
                    for (int c = 0; c < 3; ++c) p[c] *= s;
                }
            break;
        }
    }
    for (float& v : img.px) v = clamp_albedo(v);
    return img;
}

namespace {

double smoothstep01(double t) {
    t = std::min(1.0, std::max(0.0, t));
    return t * t * (3.0 - 2.0 * t);
}

double raw_field(const LightSpec& l, double u, double v) {
    switch (l.field) {
        case MixFieldKind::Ramp: {
            double dx = l.params.at(0), dy = l.params.at(1);
            double center = l.params.at(2), width = std::max(1e-3, l.params.at(3));
            double t = (dx * u + dy * v - center) / width;
            return std::exp(-0.5 * t * t);
        }
        case MixFieldKind::Radial: {
            double cx = l.params.at(0), cy = l.params.at(1);
            double sigma = std::max(1e-3, l.params.at(2));
            double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
            return std::exp(-0.5 * d2 / (sigma * sigma));
        }
        case MixFieldKind::Halfplane: {
            double dx = l.params.at(0), dy = l.params.at(1);
            double offset = l.params.at(2), width = std::max(1e-3, l.params.at(3));
            double s = (dx * u + dy * v - offset) / width;
            return smoothstep01(0.5 * (s + 1.0));
        }
    }
    return 0.0;
}

}  // namespace

std::vector<std::vector<float>> synth_mix_fields(const SceneSpec& spec) {
    spec.validate();
    std::size_t k = spec.lights.size();
    std::vector<std::vector<float>> fields(k);
    for (auto& f : fields) f.resize(static_cast<std::size_t>(spec.width) * spec.height);
    for (int y = 0; y < spec.height; ++y) {
        double v = (y + 0.5) / spec.height;
        for (int x = 0; x < spec.width; ++x) {
            double u = (x + 0.5) / spec.width;
            double sum = 0;
            std::size_t idx = static_cast<std::size_t>(y) * spec.width + x;
            for (std::size_t j = 0; j < k; ++j) {
                double r = raw_field(spec.lights[j], u, v) + 1e-6;
                fields[j][idx] = static_cast<float>(r);
                sum += r;
            }
            for (std::size_t j = 0; j < k; ++j)
                fields[j][idx] = static_cast<float>(fields[j][idx] / sum);
        }
    }
    return fields;
}

LinearRender render_linear(const SceneSpec& spec) {
    Image albedo = synth_albedo(spec);
    auto fields = synth_mix_fields(spec);
    std::vector<color::Vec3> illums;
    illums.reserve(spec.lights.size());
    for (const auto& l : spec.lights) illums.push_back(color::cct_to_illuminant(l.cct).rgb);

    LinearRender lin;
    lin.w = spec.width;
    lin.h = spec.height;
    lin.rgb.resize(static_cast<std::size_t>(spec.width) * spec.height * 3);
    for (std::size_t p = 0; p < albedo.pixel_count(); ++p) {
        const float* a = albedo.px.data() + p * 3;
        double light[3] = {0, 0, 0};
        for (std::size_t j = 0; j < fields.size(); ++j) {
            double m = fields[j][p];
            for (int c = 0; c < 3; ++c) light[c] += m * illums[j][c];
        }
        for (int c = 0; c < 3; ++c) lin.rgb[p * 3 + c] = a[c] * light[c];
    }
    return lin;
}

double scene_exposure(const LinearRender& mixed) {
    double mx = 0;
    for (double v : mixed.rgb) mx = std::max(mx, v);
    return mx > 1.0 ? 1.0 / mx : 1.0;
}

Image render_capture(const LinearRender& lin, double exposure, double camera_cct) {
    auto illum = color::cct_to_illuminant(camera_cct).rgb;
    Image out(lin.w, lin.h, ColorSpace::GammaSRGB);
    for (std::size_t p = 0; p < lin.rgb.size() / 3; ++p) {
        float* d = out.px.data() + p * 3;
        for (int c = 0; c < 3; ++c) {
            double v = lin.rgb[p * 3 + c] * exposure / illum[c];
            v = std::min(1.0, std::max(0.0, v));
            d[c] = static_cast<float>(color::srgb_encode(v));
        }
    }
    out.clamp01();
    return out;
}

ScenePair render_scene(const SceneSpec& spec) {
    spec.validate();
    LinearRender lin = render_linear(spec);
    double exposure = scene_exposure(lin);

    SceneSpec gt_spec = spec;
    for (auto& l : gt_spec.lights) l.cct = color::kFixedWBCct;
    gt_spec.camera_wb_cct = color::kFixedWBCct;
    LinearRender lin_gt = render_linear(gt_spec);

    ScenePair pair;
    pair.spec = spec;
    pair.input = render_capture(lin, exposure, spec.camera_wb_cct);
    pair.ground_truth = render_capture(lin_gt, exposure, color::kFixedWBCct);
    pair.raw = Image(lin.w, lin.h, ColorSpace::LinearRaw);
    for (std::size_t i = 0; i < lin.rgb.size(); ++i)
        pair.raw.px[i] = static_cast<float>(std::min(1.0, std::max(0.0, lin.rgb[i] * exposure)));
    return pair;
}

SceneSpec sample_scene_spec(std::uint64_t seed, int index, const TestsetOptions& opts) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
    SceneSpec s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", index);
    s.id = buf;
    s.seed = mix_seed(seed, 0x5CE4E000ULL + static_cast<std::uint64_t>(index));
    s.width = opts.width;
    s.height = opts.height;
    constexpr AlbedoKind kinds[] = {AlbedoKind::Patches, AlbedoKind::Gradients,
                                    AlbedoKind::Checker, AlbedoKind::Mixed};
    s.albedo_kind = kinds[rng.below(4)];

    std::vector<double> pool = opts.light_ccts;
    if (pool.empty())
        for (const auto& wb : color::preset_set(opts.light_pool)) pool.push_back(wb.cct);
    int n_lights = rng.uniform() < 0.7 ? 2 : 3;
    std::vector<int> picked;
    while (static_cast<int>(picked.size()) < n_lights) {
        int j = static_cast<int>(rng.below(static_cast<std::uint32_t>(pool.size())));
        bool dup = std::find(picked.begin(), picked.end(), j) != picked.end();
        if (!dup || static_cast<int>(pool.size()) < n_lights) picked.push_back(j);
    }

    int layout = static_cast<int>(rng.below(3));  // 0 halfplane, 1 ramp bands, 2 radial
    if (n_lights > 2 && layout == 0) layout = 1;
    double ang = rng.uniform(0, 2 * M_PI);
    double dx = std::cos(ang), dy = std::sin(ang);
    for (int j = 0; j < n_lights; ++j) {
        LightSpec l;
        l.cct = pool[picked[j]];
        if (layout == 0) {
            double width = rng.uniform(0.05, 0.25);
            double sgn = j == 0 ? 1.0 : -1.0;
            // opposing halfplanes across the line dx*u + dy*v = offset
            double offset = 0.5 * (dx + dy) + rng.uniform(-0.1, 0.1);
            l.field = MixFieldKind::Halfplane;
            l.params = {sgn * dx, sgn * dy, sgn * offset, width};
        } else if (layout == 1) {
            double center = n_lights == 1 ? 0.5 : static_cast<double>(j) / (n_lights - 1);
            l.field = MixFieldKind::Ramp;
            // map band centers into the projected range of the unit square
            double lo = std::min(0.0, dx) + std::min(0.0, dy);
            double hi = std::max(0.0, dx) + std::max(0.0, dy);
            l.params = {dx, dy, lo + center * (hi - lo), rng.uniform(0.1, 0.3) * (hi - lo)};
        } else {
            l.field = MixFieldKind::Radial;
            l.params = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.25, 0.6)};
        }
        s.lights.push_back(std::move(l));
    }

    auto cams = color::preset_set(opts.camera_pool);
    s.camera_wb_cct = cams[rng.below(static_cast<std::uint32_t>(cams.size()))].cct;
    return s;
}

std::string generate_testset(int n, std::uint64_t seed, const std::string& out_dir,
                             const TestsetOptions& opts) {
    if (n < 1) throw std::invalid_argument("generate_testset: n must be >= 1");
    // validate every spec before any file is written
    std::vector<SceneSpec> specs;
    specs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SceneSpec s = sample_scene_spec(seed, i, opts);
        s.validate();
        specs.push_back(std::move(s));
    }
    auto captures = color::preset_set(opts.capture_presets);

    fs::create_directories(out_dir);
    parallel_for(specs.size(), [&](std::size_t i) {
        const SceneSpec& spec = specs[i];
        fs::path dir = fs::path(out_dir) / spec.id;
        fs::create_directories(dir);

        LinearRender lin = render_linear(spec);
        double exposure = scene_exposure(lin);
        ScenePair pair = render_scene(spec);
        write_png16(pair.input, (dir / "input.png").string(), opts.digest);
        write_png16(pair.ground_truth, (dir / "gt.png").string(), opts.digest);
        write_png16(pair.raw, (dir / "raw.png").string(), opts.digest);
        for (const auto& wb : captures) {
            Image cap = render_capture(lin, exposure, wb.cct);
            write_png16(cap, (dir / (std::string("preset_") + wb.name + ".png")).string(),
                        opts.digest);
        }
        std::ofstream f(dir / "spec.json");
        f << spec.to_json() << "\n";
    });

    json manifest;
    manifest["seed"] = seed;
    manifest["count"] = n;
    manifest["width"] = opts.width;
    manifest["height"] = opts.height;
    manifest["capture_presets"] = opts.capture_presets;
    if (!opts.digest.empty()) manifest["digest"] = opts.digest;
    json scenes = json::array();
    for (const auto& spec : specs) {
        json e;
        e["id"] = spec.id;
        e["dir"] = spec.id;
        e["files"] = json::array({"input.png", "gt.png", "raw.png", "spec.json"});
        for (const auto& wb : captures)
            e["files"].push_back(std::string("preset_") + wb.name + ".png");
        e["spec"] = json::parse(spec.to_json());
        scenes.push_back(std::move(e));
    }
    manifest["scenes"] = scenes;
    std::string text = manifest.dump(2) + "\n";
    std::ofstream f(fs::path(out_dir) / "manifest.json");
    f << text;
    return text;
}

}  // namespace mixwb::synth
