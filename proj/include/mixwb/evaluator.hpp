#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixwb/image.hpp"

namespace mixwb::eval {

// MSE on the 0..255 scale, mean over pixels and channels.
double image_mse(const Image& out, const Image& gt);

struct MaeResult {
    std::optional<double> degrees;  // empty when every pixel is degenerate
    std::size_t skipped = 0;        // near-zero pixels excluded from the mean
};
MaeResult image_mae(const Image& out, const Image& gt);

double image_de2000(const Image& out, const Image& gt);

// Degamma, estimate the illuminant as the channel means (G-normalized),
// diagonal-correct, regamma.
Image gray_world_baseline(const Image& img);

struct MetricAggregate {
    double mean, q1, q2, q3;
};

// Linear-interpolation quantile, exclusive variant: h = q*(n+1)-1 clamped
// to [0, n-1], interpolated between the bracketing order statistics.
double quantile(std::vector<double> values, double q);
MetricAggregate aggregate(const std::vector<double>& values);

struct PerImageMetrics {
    std::string scene_id;
    double mse;
    std::optional<double> mae_deg;
    double de2000;
    std::size_t mae_skipped;
};

struct MetricsReport {
    std::string method_label;
    std::string config_digest;
    std::string resolution;  // evaluation resolution, e.g. "256x256"
    std::vector<PerImageMetrics> per_image;
    std::vector<std::string> missing;  // scene ids without a prediction
    MetricAggregate mse{}, mae{}, de2000{};

    std::string to_json() const;
    std::string to_table() const;  // aligned Mean/Q1/Q2/Q3 text table
};

MetricsReport evaluate_images(const std::vector<std::string>& ids,
                              const std::vector<const Image*>& preds,
                              const std::vector<const Image*>& gts, const std::string& label,
                              const std::string& digest);

// pred_dir holds <scene_id>.png files; gt_dir is a dataset root with
// <scene_id>/gt.png. Missing pairs are listed and excluded from aggregates.
MetricsReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir,
                            const std::string& label, const std::string& digest);

std::string render_comparison_table(const std::vector<MetricsReport>& reports);

}  // namespace mixwb::eval
