#pragma once

#include <vector>

#include "mixwb/isp.hpp"
#include "mixwb/net.hpp"

namespace mixwb::infer {

// k per-pixel blending maps, softmax-normalized across the k axis.
struct WeightMaps {
    int k = 0, h = 0, w = 0;
    std::vector<float> v;  // k planes

    WeightMaps() = default;
    WeightMaps(int k_, int h_, int w_)
        : k(k_), h(h_), w(w_), v(static_cast<std::size_t>(k_) * h_ * w_, 0.f) {}
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    float* map(int i) { return v.data() + i * plane(); }
    const float* map(int i) const { return v.data() + i * plane(); }

    // clamps negatives and rescales every pixel to sum 1
    void renormalize();
};

struct EasParams {
    double spatial_sigma = 16.0;    // pixels
    double luma_sigma = 8.0 / 255;  // guide levels
    double chroma_sigma = 8.0 / 255;  // reserved; the solver grid is luma-only
    double smoothness_weight = 1.0;
    double cg_tol = 1e-5;
    int cg_max_iters = 64;
};

enum class EnsembleOrder { AverageThenUpsample, UpsampleThenAverage };

struct InferenceConfig {
    std::vector<double> scales = {1.0, 0.5, 0.25};
    bool ensemble = true;
    bool eas = true;
    EasParams eas_params;
    int small_size = 384;
    EnsembleOrder order = EnsembleOrder::AverageThenUpsample;
};

WeightMaps tensor_to_maps(const net::Tensor<float>& t);
net::Tensor<float> concat_smalls(const std::vector<Image>& smalls);

// Runs the network at each configured scale, brings every result back to the
// scale-1.0 small size, averages and renormalizes. Scales that would drop
// either dimension below 16 px are skipped.
WeightMaps predict_weights_ensemble(const isp::PresetStack& stack, const net::GridNet<float>& model,
                                    const InferenceConfig& cfg);

// Bilinear per-map upsampling followed by per-pixel renormalization.
WeightMaps upsample_weights(const WeightMaps& w, int target_w, int target_h);

// Bilateral-space smoothing: each map is splatted onto a (x, y, guide-luma)
// grid, the damped grid-Laplacian system is solved by conjugate gradient and
// the result sliced back. Falls back to a guided filter when CG stalls.
struct EasReport {
    bool used_fallback = false;
    int cg_iters = 0;
};
WeightMaps edge_aware_smooth(const WeightMaps& w, const Image& guide, const EasParams& params,
                             EasReport* report = nullptr);

// Guided-filter smoothing behind the same interface (also the CG fallback).
WeightMaps guided_filter_smooth(const WeightMaps& w, const Image& guide, int radius = 8,
                                double eps = 1e-3);

Image blend(const WeightMaps& w, const std::vector<Image>& images);

// Full path: ensemble prediction, upsample to the stack's full resolution,
// optional EAS against full_fixed, blend against the mapped full images.
Image correct_image(const isp::PresetStack& stack, const net::GridNet<float>& model,
                    const InferenceConfig& cfg, WeightMaps* maps_out = nullptr);

double total_variation(const WeightMaps& w);

}  // namespace mixwb::infer
