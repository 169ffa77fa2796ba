#pragma once

#include <string>
#include <vector>

#include "mixwb/color.hpp"
#include "mixwb/image.hpp"

namespace mixwb::synth {

enum class AlbedoKind { Patches, Gradients, Checker, Mixed };
enum class MixFieldKind { Ramp, Radial, Halfplane };

AlbedoKind albedo_kind_from_string(const std::string& s);
const char* to_string(AlbedoKind k);
MixFieldKind mix_field_from_string(const std::string& s);
const char* to_string(MixFieldKind k);

struct LightSpec {
    double cct;
    MixFieldKind field;
    std::vector<double> params;  // see synth_mix_fields for per-kind layout
};

struct SceneSpec {
    std::string id;
    std::uint64_t seed = 0;
    int width = 0;
    int height = 0;
    AlbedoKind albedo_kind = AlbedoKind::Patches;
    std::vector<LightSpec> lights;  // at least 2
    double camera_wb_cct = color::kFixedWBCct;

    void validate() const;
    std::string to_json() const;
    static SceneSpec from_json(const std::string& text);
};

struct ScenePair {
    Image input;         // mixed lights, camera WB applied, gamma sRGB
    Image ground_truth;  // every light and the camera WB at 5500 K
    Image raw;           // pre-WB sensor image, linear raw
    SceneSpec spec;
};

// Seeded reflectance map, values in [0.05, 0.95], with at least eight color
// regions and one near-achromatic region.
Image synth_albedo(const SceneSpec& spec);

// Per-light spatial weights, nonnegative, summing to 1 at every pixel.
// Param layouts (normalized [0,1] image coordinates):
//   Ramp:      {dx, dy, center, width}   gaussian band along direction
//   Radial:    {cx, cy, sigma}           isotropic bump
//   Halfplane: {dx, dy, offset, width}   smoothstep across a line
std::vector<std::vector<float>> synth_mix_fields(const SceneSpec& spec);

// Unclamped linear composite albedo * sum_j mix_j * illum_j, before exposure.
struct LinearRender {
    int w = 0, h = 0;
    std::vector<double> rgb;
};
LinearRender render_linear(const SceneSpec& spec);

// Exposure factor shared by every render of one scene: scales the mixed
// render so its maximum channel value is 1, never brightens. Keeping one
// factor per scene is what makes the G channel of input and ground truth
// match exactly.
double scene_exposure(const LinearRender& mixed);

// Full-resolution capture with the camera corrected to camera_cct.
Image render_capture(const LinearRender& lin, double exposure, double camera_cct);

ScenePair render_scene(const SceneSpec& spec);

struct TestsetOptions {
    int width = 256;
    int height = 256;
    std::string light_pool = "tfdcs";   // CCTs sampled from these presets
    std::string camera_pool = "tfdcs";  // camera AWB sampled from these
    std::string capture_presets = "tfdcs";  // per-scene preset captures written
    std::vector<double> light_ccts;  // raw Kelvin pool; overrides light_pool when set
    std::string digest;              // recorded in the manifest and PNGs
};

// Samples n scene specs from (seed, index), renders each pair plus the
// preset captures, and writes <out_dir>/<id>/{input,gt,raw,preset_*}.png,
// spec.json and a top-level manifest.json. Returns the manifest text.
std::string generate_testset(int n, std::uint64_t seed, const std::string& out_dir,
                             const TestsetOptions& opts = {});

SceneSpec sample_scene_spec(std::uint64_t seed, int index, const TestsetOptions& opts);

}  // namespace mixwb::synth
