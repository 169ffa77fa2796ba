#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mixwb/evaluator.hpp"
#include "mixwb/infer.hpp"
#include "mixwb/scene.hpp"
#include "mixwb/trainer.hpp"

namespace mixwb::pipeline {

struct InferOptions {
    infer::InferenceConfig icfg;
    bool exact_mapping = false;  // preset captures instead of the polynomial fit
    isp::FitSpace fit_space = isp::FitSpace::Gamma;
    std::string dump_weights_dir;
};

// Stack for one generated scene directory. small_size is clamped to the raw
// frame; with exact_mapping the stored preset captures stand in for the
// mapped full-resolution images.
isp::PresetStack build_stack_for_scene(const std::string& scene_dir,
                                       const std::vector<color::WBSetting>& presets,
                                       const InferOptions& opt);

struct SceneInference {
    std::string id;
    double map_tv;  // total variation of the final weight maps
};

// Runs correct_image over every scene of a dataset; writes <out_dir>/<id>.png.
std::vector<SceneInference> infer_dataset(const std::string& dataset_dir,
                                          const net::GridNet<float>& model,
                                          const std::string& presets, const InferOptions& opt,
                                          const std::string& out_dir, const std::string& digest);

void grayworld_dataset(const std::string& dataset_dir, const std::string& out_dir,
                       const std::string& digest);

// Each stored preset capture evaluated as a global correction.
eval::MetricsReport evaluate_preset_baseline(const std::string& dataset_dir, char preset,
                                             const std::string& digest);

struct AblationRow {
    std::string label;
    eval::MetricsReport report;
    double mean_tv = 0;
    std::vector<double> tv_per_scene;
};

// The three inference configurations: no-ensemble/no-EAS, ensemble/no-EAS,
// ensemble/EAS, evaluated on one dataset with one model.
std::vector<AblationRow> run_ablation(const std::string& dataset_dir,
                                      const net::GridNet<float>& model,
                                      const std::string& presets, const InferOptions& base,
                                      const std::string& out_root, const std::string& digest);

struct PipelineOptions {
    std::string work_dir;
    int n_train = 40;
    int n_test = 20;
    std::uint64_t seed = 7;
    int scene_size = 256;
    std::string presets = "tds";
    train::TrainConfig tcfg;
    InferOptions iopt;
};

struct PipelineResult {
    eval::MetricsReport method;
    std::vector<eval::MetricsReport> preset_baselines;
    eval::MetricsReport grayworld;
    std::vector<SceneInference> inferences;
    std::string digest;
    std::string report_path;
};

// synth -> train -> infer -> eval in one deterministic run; writes
// report.json and report.txt under work_dir.
PipelineResult run_pipeline(const PipelineOptions& opt);

nlohmann::json pipeline_config_json(const PipelineOptions& opt);

}  // namespace mixwb::pipeline
