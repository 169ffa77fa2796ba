#include "mixwb/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "mixwb/checkpoint.hpp"
#include "mixwb/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixwb::pipeline {

namespace {

std::vector<std::string> dataset_scene_ids(const std::string& dataset_dir) {
    std::ifstream mf(fs::path(dataset_dir) / "manifest.json");
    if (!mf) throw std::runtime_error("no manifest.json in " + dataset_dir);
    json manifest = json::parse(mf);
    std::vector<std::string> ids;
    for (const auto& e : manifest.at("scenes")) ids.push_back(e.at("id").get<std::string>());
    return ids;
}

}  // namespace

isp::PresetStack build_stack_for_scene(const std::string& scene_dir,
                                       const std::vector<color::WBSetting>& presets,
                                       const InferOptions& opt) {
    fs::path dir(scene_dir);
    Image raw = read_png16((dir / "raw.png").string(), ColorSpace::LinearRaw);
    int small = std::min(opt.icfg.small_size, std::min(raw.w, raw.h));
    if (opt.exact_mapping) {
        std::vector<Image> captures;
        for (const auto& wb : presets)
            captures.push_back(read_png16((dir / (std::string("preset_") + wb.name + ".png")).string(),
                                          ColorSpace::GammaSRGB));
        Image full_fixed =
            read_png16((dir / "preset_d.png").string(), ColorSpace::GammaSRGB);
        return isp::build_preset_stack_exact(presets, std::move(captures), std::move(full_fixed),
                                             small);
    }
    return isp::build_preset_stack(raw, presets, small, {'d', color::kFixedWBCct}, opt.fit_space);
}

std::vector<SceneInference> infer_dataset(const std::string& dataset_dir,
                                          const net::GridNet<float>& model,
                                          const std::string& presets, const InferOptions& opt,
                                          const std::string& out_dir, const std::string& digest) {
    auto preset_list = color::preset_set(presets);
    auto ids = dataset_scene_ids(dataset_dir);
    fs::create_directories(out_dir);
    if (!opt.dump_weights_dir.empty()) fs::create_directories(opt.dump_weights_dir);

    std::vector<SceneInference> results(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::string& id = ids[i];
        isp::PresetStack stack =
            build_stack_for_scene((fs::path(dataset_dir) / id).string(), preset_list, opt);
        infer::WeightMaps maps;
        Image corrected = infer::correct_image(stack, model, opt.icfg, &maps);
        write_png16(corrected, (fs::path(out_dir) / (id + ".png")).string(), digest);
        if (!opt.dump_weights_dir.empty()) {
            for (int m = 0; m < maps.k; ++m) {
                std::string name = id + "_w_" + preset_list[m].name + ".png";
                write_png16_gray(maps.map(m), maps.w, maps.h,
                                 (fs::path(opt.dump_weights_dir) / name).string(), digest);
            }
        }
        results[i] = {id, infer::total_variation(maps)};
    }
    return results;
}

void grayworld_dataset(const std::string& dataset_dir, const std::string& out_dir,
                       const std::string& digest) {
    auto ids = dataset_scene_ids(dataset_dir);
    fs::create_directories(out_dir);
    for (const auto& id : ids) {
        Image input = read_png16((fs::path(dataset_dir) / id / "input.png").string(),
                                 ColorSpace::GammaSRGB);
        Image corrected = eval::gray_world_baseline(input);
        write_png16(corrected, (fs::path(out_dir) / (id + ".png")).string(), digest);
    }
}

eval::MetricsReport evaluate_preset_baseline(const std::string& dataset_dir, char preset,
                                             const std::string& digest) {
    auto ids = dataset_scene_ids(dataset_dir);
    std::vector<Image> preds, gts;
    for (const auto& id : ids) {
        fs::path dir = fs::path(dataset_dir) / id;
        preds.push_back(read_png16((dir / (std::string("preset_") + preset + ".png")).string(),
                                   ColorSpace::GammaSRGB));
        gts.push_back(read_png16((dir / "gt.png").string(), ColorSpace::GammaSRGB));
    }
    std::vector<const Image*> pp, gp;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        pp.push_back(&preds[i]);
        gp.push_back(&gts[i]);
    }
    return eval::evaluate_images(ids, pp, gp, std::string("preset_") + preset, digest);
}

std::vector<AblationRow> run_ablation(const std::string& dataset_dir,
                                      const net::GridNet<float>& model,
                                      const std::string& presets, const InferOptions& base,
                                      const std::string& out_root, const std::string& digest) {
    struct Variant {
        const char* label;
        bool ensemble, eas;
    };
    const Variant variants[] = {
        {"no-ensemble_no-eas", false, false},
        {"ensemble_no-eas", true, false},
        {"ensemble_eas", true, true},
    };
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        InferOptions opt = base;
        opt.icfg.ensemble = v.ensemble;
        opt.icfg.eas = v.eas;
        std::string out_dir = (fs::path(out_root) / v.label).string();
        auto inf = infer_dataset(dataset_dir, model, presets, opt, out_dir, digest);
        AblationRow row;
        row.label = v.label;
        row.report = eval::evaluate_dirs(out_dir, dataset_dir, v.label, digest);
        double acc = 0;
        for (const auto& s : inf) {
            row.tv_per_scene.push_back(s.map_tv);
            acc += s.map_tv;
        }
        row.mean_tv = inf.empty() ? 0 : acc / static_cast<double>(inf.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

json pipeline_config_json(const PipelineOptions& opt) {
    json j;
    j["n_train"] = opt.n_train;
    j["n_test"] = opt.n_test;
    j["seed"] = opt.seed;
    j["scene_size"] = opt.scene_size;
    j["presets"] = opt.presets;
    j["patch"] = opt.tcfg.patch;
    j["epochs"] = opt.tcfg.epochs;
    j["lr"] = opt.tcfg.lr;
    j["lambda"] = opt.tcfg.lambda;
    j["small_size"] = opt.iopt.icfg.small_size;
    j["ensemble"] = opt.iopt.icfg.ensemble;
    j["eas"] = opt.iopt.icfg.eas;
    j["exact_mapping"] = opt.iopt.exact_mapping;
    j["fit_space"] = opt.iopt.fit_space == isp::FitSpace::Gamma ? "gamma" : "linear";
    return j;
}

PipelineResult run_pipeline(const PipelineOptions& opt) {
    json config = pipeline_config_json(opt);
    std::string digest = cli::config_digest(config);

    fs::path work(opt.work_dir);
    fs::create_directories(work);
    std::string train_dir = (work / "data" / "train").string();
    std::string test_dir = (work / "data" / "test").string();

    synth::TestsetOptions sopts;
    sopts.width = opt.scene_size;
    sopts.height = opt.scene_size;
    sopts.digest = digest;
    synth::generate_testset(opt.n_train, mix_seed(opt.seed, 1), train_dir, sopts);
    synth::generate_testset(opt.n_test, mix_seed(opt.seed, 2), test_dir, sopts);

    train::TrainConfig tcfg = opt.tcfg;
    tcfg.presets = opt.presets;
    tcfg.seed = mix_seed(opt.seed, 3);
    train::Dataset data = train::load_dataset(train_dir, opt.presets);
    train::TrainResult trained = train::train(data, tcfg, (work / "ckpt").string(), digest);
    if (trained.diverged) throw NumericError("pipeline: training diverged");

    net::GridNet<float> model(trained.net_config, 0);
    model.parameters() = trained.parameters;

    PipelineResult result;
    result.digest = digest;
    result.inferences = infer_dataset(test_dir, model, opt.presets, opt.iopt,
                                      (work / "out" / "method").string(), digest);
    result.method = eval::evaluate_dirs((work / "out" / "method").string(), test_dir,
                                        "mixwb(" + opt.presets + ")", digest);
    grayworld_dataset(test_dir, (work / "out" / "grayworld").string(), digest);
    result.grayworld =
        eval::evaluate_dirs((work / "out" / "grayworld").string(), test_dir, "gray-world", digest);
    for (char p : opt.presets)
        result.preset_baselines.push_back(evaluate_preset_baseline(test_dir, p, digest));

    json report;
    report["config"] = config;
    report["digest"] = digest;
    report["method"] = json::parse(result.method.to_json());
    report["grayworld"] = json::parse(result.grayworld.to_json());
    json baselines = json::array();
    for (const auto& b : result.preset_baselines) baselines.push_back(json::parse(b.to_json()));
    report["preset_baselines"] = baselines;

    std::vector<eval::MetricsReport> all{result.method};
    for (const auto& b : result.preset_baselines) all.push_back(b);
    all.push_back(result.grayworld);
    std::string table = eval::render_comparison_table(all);

    result.report_path = (work / "report.json").string();
    std::ofstream jf(result.report_path);
    jf << report.dump(2) << "\n";
    std::ofstream tf(work / "report.txt");
    tf << table;
    return result;
}

}  // namespace mixwb::pipeline
