#pragma once

#include <array>
#include <string>
#include <vector>

#include "mixwb/color.hpp"
#include "mixwb/image.hpp"

namespace mixwb::isp {

// 3 x 11 color mapping from polynomial features of the source image to a
// target WB setting, least-squares fitted.
struct MappingMatrix {
    std::array<std::array<double, color::kPolyTerms>, 3> m{};
    color::WBSetting target{'d', 5500.0};
    double fit_rms = 0.0;
    bool low_rank = false;

    std::string to_json() const;
    static MappingMatrix from_json(const std::string& text);
};

enum class FitSpace { Gamma, Linear };

// Downsample the raw frame to small_size^2 and render once per preset
// (diagonal WB at the preset CCT, then sRGB gamma).
std::vector<Image> render_presets(const Image& raw, const std::vector<color::WBSetting>& presets,
                                  int small_size);

// Least-squares fit of target ~= M * phi(source) over all pixels, via normal
// equations with 1e-8 Tikhonov damping. Both images gamma sRGB.
MappingMatrix fit_mapping(const Image& source_small, const Image& target_small,
                          const color::WBSetting& target_setting = {'d', 5500.0});

Image apply_mapping(const Image& full, const MappingMatrix& m);

// One scene's renders: small per-preset images feeding the network, the
// full-resolution fixed-WB frame and its per-preset mapped versions.
struct PresetStack {
    std::vector<color::WBSetting> presets;
    std::vector<Image> smalls;        // gamma sRGB, small_size^2 each
    Image full_fixed;                 // gamma sRGB, full resolution, 5500 K
    std::vector<Image> mapped_fulls;  // one per preset
    std::vector<MappingMatrix> mappings;
};

// fit_space decides whether mapping matrices are fitted on gamma-encoded or
// linear values; gamma is the default. Fits use the small fixed-WB render as
// the source so the daylight preset maps to full_fixed by an identity fit.
PresetStack build_preset_stack(const Image& raw, const std::vector<color::WBSetting>& presets,
                               int small_size,
                               const color::WBSetting& fixed = {'d', color::kFixedWBCct},
                               FitSpace fit_space = FitSpace::Gamma);

// Exact per-preset captures replace the polynomial mapping (available for
// synthetic scenes where the true render per WB exists on disk).
PresetStack build_preset_stack_exact(const std::vector<color::WBSetting>& presets,
                                     std::vector<Image> captures, Image full_fixed,
                                     int small_size);

}  // namespace mixwb::isp
