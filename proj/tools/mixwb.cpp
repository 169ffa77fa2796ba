#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixwb/checkpoint.hpp"
#include "mixwb/config.hpp"
#include "mixwb/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixwb;

namespace {

// flag > file > default; every key must exist in the defaults
json finalize_config(const json& defaults, const std::string& config_path, const json& flags) {
    json file_layer = json::object();
    if (!config_path.empty()) file_layer = cli::load_config_file(config_path);
    return cli::merge_config(defaults, file_layer, flags);
}

std::vector<double> parse_scales(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        out.push_back(std::stod(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty scale list");
    return out;
}

pipeline::InferOptions infer_options_from(const json& cfg) {
    pipeline::InferOptions opt;
    opt.icfg.small_size = cfg.at("small_size").get<int>();
    opt.icfg.scales = parse_scales(cfg.at("scales").get<std::string>());
    opt.icfg.ensemble = !cfg.at("no_ensemble").get<bool>();
    opt.icfg.eas = !cfg.at("no_eas").get<bool>();
    opt.icfg.order = cfg.at("ensemble_order").get<std::string>() == "up-then-avg"
                         ? infer::EnsembleOrder::UpsampleThenAverage
                         : infer::EnsembleOrder::AverageThenUpsample;
    opt.icfg.eas_params.spatial_sigma = cfg.at("eas_spatial_sigma").get<double>();
    opt.icfg.eas_params.luma_sigma = cfg.at("eas_luma_sigma").get<double>();
    opt.icfg.eas_params.smoothness_weight = cfg.at("eas_smoothness").get<double>();
    opt.exact_mapping = cfg.at("exact_mapping").get<bool>();
    opt.fit_space =
        cfg.at("fit_space").get<std::string>() == "linear" ? isp::FitSpace::Linear
                                                           : isp::FitSpace::Gamma;
    return opt;
}

void add_infer_flags(CLI::App* cmd, json& flags, json& defaults) {
    defaults["small_size"] = 384;
    defaults["scales"] = "1.0,0.5,0.25";
    defaults["no_ensemble"] = false;
    defaults["no_eas"] = false;
    defaults["ensemble_order"] = "avg-then-up";
    defaults["eas_spatial_sigma"] = 16.0;
    defaults["eas_luma_sigma"] = 8.0 / 255;
    defaults["eas_smoothness"] = 1.0;
    defaults["exact_mapping"] = false;
    defaults["fit_space"] = "gamma";
    cmd->add_option_function<int>("--small-size",
                                  [&flags](int v) { flags["small_size"] = v; },
                                  "Small render size (clamped to the frame)")
        ->default_val(384);
    cmd->add_option_function<std::string>("--scales",
                                          [&flags](const std::string& v) { flags["scales"] = v; },
                                          "Ensembling scales, comma separated")
        ->default_val("1.0,0.5,0.25");
    cmd->add_flag_function("--no-ensemble",
                           [&flags](std::int64_t) { flags["no_ensemble"] = true; },
                           "Single-scale prediction");
    cmd->add_flag_function("--no-eas", [&flags](std::int64_t) { flags["no_eas"] = true; },
                           "Skip edge-aware smoothing");
    cmd->add_option_function<std::string>(
           "--ensemble-order",
           [&flags](const std::string& v) { flags["ensemble_order"] = v; },
           "avg-then-up | up-then-avg")
        ->default_val("avg-then-up")
        ->check(CLI::IsMember({"avg-then-up", "up-then-avg"}));
    cmd->add_option_function<double>(
           "--eas-spatial-sigma", [&flags](double v) { flags["eas_spatial_sigma"] = v; },
           "EAS bilateral grid spatial sigma, px")
        ->default_val(16.0);
    cmd->add_option_function<double>("--eas-luma-sigma",
                                     [&flags](double v) { flags["eas_luma_sigma"] = v; },
                                     "EAS bilateral grid luma sigma")
        ->default_val(8.0 / 255);
    cmd->add_option_function<double>("--eas-smoothness",
                                     [&flags](double v) { flags["eas_smoothness"] = v; },
                                     "EAS smoothness weight")
        ->default_val(1.0);
    cmd->add_flag_function("--exact-mapping",
                           [&flags](std::int64_t) { flags["exact_mapping"] = true; },
                           "Blend stored preset captures instead of polynomial-mapped frames");
    cmd->add_option_function<std::string>(
           "--fit-space", [&flags](const std::string& v) { flags["fit_space"] = v; },
           "Color space for mapping fits: gamma | linear")
        ->default_val("gamma")
        ->check(CLI::IsMember({"gamma", "linear"}));
}

int run_synth(const json& cfg) {
    synth::TestsetOptions opts;
    opts.width = cfg.at("size").get<int>();
    opts.height = opts.width;
    opts.light_pool = cfg.at("light_pool").get<std::string>();
    opts.camera_pool = cfg.at("camera_pool").get<std::string>();
    opts.capture_presets = cfg.at("capture_presets").get<std::string>();
    if (!cfg.at("light_ccts").get<std::string>().empty()) {
        for (double v : parse_scales(cfg.at("light_ccts").get<std::string>()))
            opts.light_ccts.push_back(v);
    }
    opts.digest = cli::config_digest(cfg);
    synth::generate_testset(cfg.at("n").get<int>(), cfg.at("seed").get<std::uint64_t>(),
                            cfg.at("out").get<std::string>(), opts);
    std::cout << "wrote " << cfg.at("n").get<int>() << " scenes to "
              << cfg.at("out").get<std::string>() << " (digest " << opts.digest << ")\n";
    return cli::kExitOk;
}

int run_render_presets(const json& cfg) {
    std::string digest = cli::config_digest(cfg);
    Image raw = read_png16(cfg.at("raw").get<std::string>(), ColorSpace::LinearRaw);
    auto presets = color::preset_set(cfg.at("presets").get<std::string>());
    int small = std::min(cfg.at("small_size").get<int>(), std::min(raw.w, raw.h));
    auto space = cfg.at("fit_space").get<std::string>() == "linear" ? isp::FitSpace::Linear
                                                                    : isp::FitSpace::Gamma;
    isp::PresetStack stack =
        isp::build_preset_stack(raw, presets, small, {'d', color::kFixedWBCct}, space);
    fs::path out(cfg.at("out").get<std::string>());
    fs::create_directories(out);
    for (std::size_t i = 0; i < presets.size(); ++i) {
        std::string name(1, presets[i].name);
        write_png16(stack.smalls[i], (out / ("preset_" + name + ".png")).string(), digest);
        write_png16(stack.mapped_fulls[i], (out / ("mapped_" + name + ".png")).string(), digest);
        std::ofstream mf(out / ("mapping_" + name + ".json"));
        mf << stack.mappings[i].to_json() << "\n";
    }
    write_png16(stack.full_fixed, (out / "full_fixed.png").string(), digest);
    std::cout << "rendered " << presets.size() << " presets to " << out.string() << "\n";
    return cli::kExitOk;
}

int run_train(const json& cfg) {
    std::string digest = cli::config_digest(cfg);
    train::TrainConfig tcfg;
    tcfg.presets = cfg.at("presets").get<std::string>();
    tcfg.patch = cfg.at("patch").get<int>();
    tcfg.epochs = cfg.at("epochs").get<int>();
    tcfg.lr = cfg.at("lr").get<double>();
    tcfg.lambda = cfg.at("lambda").get<double>();
    tcfg.seed = cfg.at("seed").get<std::uint64_t>();
    tcfg.images_per_iter = cfg.at("images_per_iter").get<int>();
    tcfg.patches_per_image = cfg.at("patches_per_image").get<int>();
    train::Dataset data = train::load_dataset(cfg.at("data").get<std::string>(), tcfg.presets);
    train::TrainResult result =
        train::train(data, tcfg, cfg.at("out").get<std::string>(), digest);
    if (result.diverged) {
        std::cerr << "training diverged; last good checkpoint kept\n";
        return cli::kExitNumeric;
    }
    std::cout << "trained " << result.epochs_done << " epochs, final loss "
              << result.history.back().loss << ", model in " << cfg.at("out").get<std::string>()
              << "\n";
    return cli::kExitOk;
}

int run_infer(const json& cfg) {
    std::string digest = cli::config_digest(cfg);
    ckpt::Loaded loaded = ckpt::load(cfg.at("ckpt").get<std::string>());
    net::GridNet<float> model = loaded.instantiate();
    pipeline::InferOptions opt = infer_options_from(cfg);
    opt.dump_weights_dir = cfg.at("dump_weights").get<std::string>();

    std::string scene_dir = cfg.at("stack").get<std::string>();
    auto presets = color::preset_set(loaded.presets);
    isp::PresetStack stack = pipeline::build_stack_for_scene(scene_dir, presets, opt);
    infer::WeightMaps maps;
    Image corrected = infer::correct_image(stack, model, opt.icfg, &maps);
    std::string out = cfg.at("out").get<std::string>();
    write_png16(corrected, out, digest);
    if (!opt.dump_weights_dir.empty()) {
        fs::create_directories(opt.dump_weights_dir);
        for (int m = 0; m < maps.k; ++m)
            write_png16_gray(maps.map(m), maps.w, maps.h,
                             (fs::path(opt.dump_weights_dir) /
                              (std::string("w_") + presets[m].name + ".png"))
                                 .string(),
                             digest);
    }
    std::cout << "wrote " << out << "\n";
    return cli::kExitOk;
}

int run_eval(const json& cfg) {
    std::string digest = cli::config_digest(cfg);
    eval::MetricsReport report =
        eval::evaluate_dirs(cfg.at("pred").get<std::string>(), cfg.at("gt").get<std::string>(),
                            cfg.at("label").get<std::string>(), digest);
    std::string out = cfg.at("out").get<std::string>();
    std::ofstream jf(out);
    jf << report.to_json();
    fs::path txt = fs::path(out).replace_extension(".txt");
    std::ofstream tf(txt);
    tf << report.to_table();
    std::cout << report.to_table();
    if (!report.missing.empty())
        std::cout << "missing predictions for " << report.missing.size() << " scene(s)\n";
    return cli::kExitOk;
}

int run_ablate(const json& cfg) {
    std::string digest = cli::config_digest(cfg);
    ckpt::Loaded loaded = ckpt::load(cfg.at("ckpt").get<std::string>());
    net::GridNet<float> model = loaded.instantiate();
    pipeline::InferOptions opt = infer_options_from(cfg);
    std::string data = cfg.at("data").get<std::string>();
    std::string out_root = cfg.at("out").get<std::string>();

    auto rows = pipeline::run_ablation(data, model, loaded.presets, opt, out_root, digest);

    // optional extra rows from additional checkpoints (lambda=0 retrain,
    // alternative preset set, patch sweeps), inference config ens+EAS
    for (const auto& spec : cfg.at("extra_ckpts").get<std::vector<std::string>>()) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--extra-ckpt expects label=path: " + spec);
        std::string label = spec.substr(0, eq);
        ckpt::Loaded extra = ckpt::load(spec.substr(eq + 1));
        net::GridNet<float> extra_model = extra.instantiate();
        pipeline::InferOptions eopt = opt;
        eopt.icfg.ensemble = true;
        eopt.icfg.eas = true;
        std::string out_dir = (fs::path(out_root) / label).string();
        auto inf =
            pipeline::infer_dataset(data, extra_model, extra.presets, eopt, out_dir, digest);
        pipeline::AblationRow row;
        row.label = label;
        row.report = eval::evaluate_dirs(out_dir, data, label, digest);
        double acc = 0;
        for (const auto& s : inf) {
            row.tv_per_scene.push_back(s.map_tv);
            acc += s.map_tv;
        }
        row.mean_tv = inf.empty() ? 0 : acc / static_cast<double>(inf.size());
        rows.push_back(std::move(row));
    }

    json j;
    j["digest"] = digest;
    json jrows = json::array();
    std::vector<eval::MetricsReport> reports;
    for (const auto& r : rows) {
        json e;
        e["label"] = r.label;
        e["mean_weight_tv"] = r.mean_tv;
        e["tv_per_scene"] = r.tv_per_scene;
        e["report"] = json::parse(r.report.to_json());
        jrows.push_back(std::move(e));
        reports.push_back(r.report);
    }
    j["rows"] = jrows;
    fs::create_directories(out_root);
    std::ofstream jf(fs::path(out_root) / "ablation.json");
    jf << j.dump(2) << "\n";
    std::string table = eval::render_comparison_table(reports);
    std::ofstream tf(fs::path(out_root) / "ablation.txt");
    tf << table;
    std::cout << table;
    return cli::kExitOk;
}

int run_pipeline_cmd(const json& cfg) {
    pipeline::PipelineOptions opt;
    opt.work_dir = cfg.at("work_dir").get<std::string>();
    opt.n_train = cfg.at("n_train").get<int>();
    opt.n_test = cfg.at("n_test").get<int>();
    opt.seed = cfg.at("seed").get<std::uint64_t>();
    opt.scene_size = cfg.at("scene_size").get<int>();
    opt.presets = cfg.at("presets").get<std::string>();
    opt.tcfg.patch = cfg.at("patch").get<int>();
    opt.tcfg.epochs = cfg.at("epochs").get<int>();
    opt.tcfg.lr = cfg.at("lr").get<double>();
    opt.tcfg.lambda = cfg.at("lambda").get<double>();
    opt.iopt = infer_options_from(cfg);
    pipeline::PipelineResult result = pipeline::run_pipeline(opt);
    std::cout << "report: " << result.report_path << " (digest " << result.digest << ")\n";
    std::cout << "method mean MSE " << result.method.mse.mean << ", dE2000 "
              << result.method.de2000.mean << "\n";
    return cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixwb: mixed-illuminant auto white balance toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    struct Sub {
        CLI::App* cmd;
        json defaults;
        json flags;
        int (*run)(const json&);
    };
    std::deque<Sub> subs;  // stable element addresses; option callbacks hold references

    auto add_str = [](CLI::App* cmd, json& flags, json& defaults, const std::string& flag,
                      const std::string& key, const std::string& def, const std::string& help,
                      bool required = false) {
        defaults[key] = def;
        auto* o = cmd->add_option_function<std::string>(
            flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
        o->default_val(def);
        if (required) o->required();
    };
    auto add_int = [](CLI::App* cmd, json& flags, json& defaults, const std::string& flag,
                      const std::string& key, std::int64_t def, const std::string& help) {
        defaults[key] = def;
        cmd->add_option_function<std::int64_t>(
               flag, [&flags, key](std::int64_t v) { flags[key] = v; }, help)
            ->default_val(def);
    };
    auto add_double = [](CLI::App* cmd, json& flags, json& defaults, const std::string& flag,
                         const std::string& key, double def, const std::string& help) {
        defaults[key] = def;
        cmd->add_option_function<double>(flag, [&flags, key](double v) { flags[key] = v; }, help)
            ->default_val(def);
    };

    std::uint64_t default_seed = cli::env_seed(1);

    {  // synth
        subs.push_back({app.add_subcommand("synth", "Generate a mixed-illuminant dataset"),
                        json::object(), json::object(), &run_synth});
        Sub& s = subs.back();
        add_int(s.cmd, s.flags, s.defaults, "--n", "n", 150, "Scene count");
        add_int(s.cmd, s.flags, s.defaults, "--seed", "seed",
                static_cast<std::int64_t>(default_seed), "Dataset seed (or MIXWB_SEED)");
        add_int(s.cmd, s.flags, s.defaults, "--size", "size", 256, "Scene width = height, px");
        add_str(s.cmd, s.flags, s.defaults, "--out", "out", "", "Output directory", true);
        add_str(s.cmd, s.flags, s.defaults, "--light-pool", "light_pool", "tfdcs",
                "Preset names used as the light CCT pool");
        add_str(s.cmd, s.flags, s.defaults, "--camera-pool", "camera_pool", "tfdcs",
                "Preset names used as the camera AWB pool");
        add_str(s.cmd, s.flags, s.defaults, "--capture-presets", "capture_presets", "tfdcs",
                "Preset captures written per scene");
        add_str(s.cmd, s.flags, s.defaults, "--light-ccts", "light_ccts", "",
                "Raw Kelvin pool (comma separated); overrides --light-pool");
    }
    {  // render-presets
        subs.push_back(
            {app.add_subcommand("render-presets", "Render small preset images + fit mappings"),
             json::object(), json::object(), &run_render_presets});
        Sub& s = subs.back();
        add_str(s.cmd, s.flags, s.defaults, "--raw", "raw", "", "Linear raw PNG (16-bit)", true);
        add_str(s.cmd, s.flags, s.defaults, "--out", "out", "", "Output directory", true);
        add_str(s.cmd, s.flags, s.defaults, "--presets", "presets", "tfdcs", "Preset set");
        add_int(s.cmd, s.flags, s.defaults, "--small-size", "small_size", 384,
                "Small render size (clamped to the frame)");
        add_str(s.cmd, s.flags, s.defaults, "--fit-space", "fit_space", "gamma",
                "Mapping fit space: gamma | linear");
    }
    {  // train
        subs.push_back({app.add_subcommand("train", "Train the weight network"), json::object(),
                        json::object(), &run_train});
        Sub& s = subs.back();
        add_str(s.cmd, s.flags, s.defaults, "--data", "data", "", "Dataset directory", true);
        add_str(s.cmd, s.flags, s.defaults, "--presets", "presets", "tds",
                "Preset set: tds | tfdcs");
        add_int(s.cmd, s.flags, s.defaults, "--patch", "patch", 64, "Patch size: 64 | 128 | 256");
        add_int(s.cmd, s.flags, s.defaults, "--epochs", "epochs", 30, "Training epochs");
        add_double(s.cmd, s.flags, s.defaults, "--lr", "lr", 1e-4, "Adam learning rate");
        add_double(s.cmd, s.flags, s.defaults, "--lambda", "lambda", 100.0,
                   "Smoothness loss weight");
        add_int(s.cmd, s.flags, s.defaults, "--seed", "seed",
                static_cast<std::int64_t>(default_seed), "Training seed (or MIXWB_SEED)");
        add_int(s.cmd, s.flags, s.defaults, "--images-per-iter", "images_per_iter", 8,
                "Images sampled per iteration");
        add_int(s.cmd, s.flags, s.defaults, "--patches-per-image", "patches_per_image", 4,
                "Patches per sampled image");
        add_str(s.cmd, s.flags, s.defaults, "--out", "out", "", "Checkpoint directory", true);
    }
    {  // infer
        subs.push_back({app.add_subcommand("infer", "Correct one scene"), json::object(),
                        json::object(), &run_infer});
        Sub& s = subs.back();
        add_str(s.cmd, s.flags, s.defaults, "--ckpt", "ckpt", "", "Model checkpoint", true);
        add_str(s.cmd, s.flags, s.defaults, "--stack", "stack", "",
                "Scene directory (raw.png + captures)", true);
        add_str(s.cmd, s.flags, s.defaults, "--out", "out", "corrected.png", "Output image");
        add_str(s.cmd, s.flags, s.defaults, "--dump-weights", "dump_weights", "",
                "Directory for weight-map PNGs");
        add_infer_flags(s.cmd, s.flags, s.defaults);
    }
    {  // eval
        subs.push_back({app.add_subcommand("eval", "Score predictions against ground truth"),
                        json::object(), json::object(), &run_eval});
        Sub& s = subs.back();
        add_str(s.cmd, s.flags, s.defaults, "--pred", "pred", "", "Directory of <id>.png",
                true);
        add_str(s.cmd, s.flags, s.defaults, "--gt", "gt", "", "Dataset root with <id>/gt.png",
                true);
        add_str(s.cmd, s.flags, s.defaults, "--label", "label", "method", "Row label");
        add_str(s.cmd, s.flags, s.defaults, "--out", "out", "report.json", "Report JSON path");
    }
    {  // ablate
        subs.push_back(
            {app.add_subcommand("ablate", "Inference-configuration ablation table"),
             json::object(), json::object(), &run_ablate});
        Sub& s = subs.back();
        add_str(s.cmd, s.flags, s.defaults, "--ckpt", "ckpt", "", "Model checkpoint", true);
        add_str(s.cmd, s.flags, s.defaults, "--data", "data", "", "Dataset directory", true);
        add_str(s.cmd, s.flags, s.defaults, "--out", "out", "", "Output directory", true);
        s.defaults["extra_ckpts"] = std::vector<std::string>{};
        s.cmd->add_option_function<std::vector<std::string>>(
            "--extra-ckpt",
            [&sflags = s.flags](const std::vector<std::string>& v) { sflags["extra_ckpts"] = v; },
            "label=ckpt rows (lambda-0 retrain, other preset set, patch sweeps)");
        add_infer_flags(s.cmd, s.flags, s.defaults);
    }
    {  // pipeline
        subs.push_back(
            {app.add_subcommand("pipeline", "synth + train + infer + eval in one run"),
             json::object(), json::object(), &run_pipeline_cmd});
        Sub& s = subs.back();
        add_str(s.cmd, s.flags, s.defaults, "--work-dir", "work_dir", "", "Working directory",
                true);
        add_int(s.cmd, s.flags, s.defaults, "--n-train", "n_train", 40, "Training scenes");
        add_int(s.cmd, s.flags, s.defaults, "--n-test", "n_test", 20, "Held-out scenes");
        add_int(s.cmd, s.flags, s.defaults, "--seed", "seed",
                static_cast<std::int64_t>(default_seed), "Master seed (or MIXWB_SEED)");
        add_int(s.cmd, s.flags, s.defaults, "--scene-size", "scene_size", 256, "Scene size, px");
        add_str(s.cmd, s.flags, s.defaults, "--presets", "presets", "tds",
                "Preset set: tds | tfdcs");
        add_int(s.cmd, s.flags, s.defaults, "--patch", "patch", 64, "Training patch size");
        add_int(s.cmd, s.flags, s.defaults, "--epochs", "epochs", 30, "Training epochs");
        add_double(s.cmd, s.flags, s.defaults, "--lr", "lr", 1e-4, "Adam learning rate");
        add_double(s.cmd, s.flags, s.defaults, "--lambda", "lambda", 100.0,
                   "Smoothness loss weight");
        add_infer_flags(s.cmd, s.flags, s.defaults);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto& s : subs) {
            if (s.cmd->parsed()) {
                json cfg = finalize_config(s.defaults, config_path, s.flags);
                return s.run(cfg);
            }
        }
        std::cerr << "no subcommand\n";
        return cli::kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return cli::kExitNumeric;
    } catch (const ContractError& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return cli::kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cli::kExitConfig;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cli::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitData;
    }
}
