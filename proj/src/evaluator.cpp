#include "mixwb/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mixwb/color.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixwb::eval {

double image_mse(const Image& out, const Image& gt) {
    if (out.w != gt.w || out.h != gt.h) throw std::invalid_argument("image_mse: size mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < out.px.size(); ++i) {
        double d = (static_cast<double>(out.px[i]) - gt.px[i]) * 255.0;
        acc += d * d;
    }
    return acc / static_cast<double>(out.px.size());
}

MaeResult image_mae(const Image& out, const Image& gt) {
    if (out.w != gt.w || out.h != gt.h) throw std::invalid_argument("image_mae: size mismatch");
    double acc = 0;
    std::size_t used = 0, skipped = 0;
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        const float* a = out.px.data() + p * 3;
        const float* b = gt.px.data() + p * 3;
        auto deg = color::angular_error({a[0], a[1], a[2]}, {b[0], b[1], b[2]});
        if (deg) {
            acc += *deg;
            ++used;
        } else {
            ++skipped;
        }
    }
    MaeResult r;
    r.skipped = skipped;
    if (used) r.degrees = acc / static_cast<double>(used);
    return r;
}

double image_de2000(const Image& out, const Image& gt) {
    if (out.w != gt.w || out.h != gt.h) throw std::invalid_argument("image_de2000: size mismatch");
    double acc = 0;
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        const float* a = out.px.data() + p * 3;
        const float* b = gt.px.data() + p * 3;
        acc += color::delta_e_2000({a[0], a[1], a[2]}, {b[0], b[1], b[2]});
    }
    return acc / static_cast<double>(out.pixel_count());
}

Image gray_world_baseline(const Image& img) {
    img.require_space(ColorSpace::GammaSRGB, "gray_world_baseline");
    Image lin = color::srgb_degamma(img);
    double mean[3] = {0, 0, 0};
    for (std::size_t p = 0; p < lin.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c) mean[c] += lin.px[p * 3 + c];
    for (double& m : mean) m = std::max(m / static_cast<double>(lin.pixel_count()), 1e-6);
    color::IlluminantRGB illum{{mean[0] / mean[1], 1.0, mean[2] / mean[1]}};
    Image corrected = color::diagonal_wb(lin, illum);
    return color::srgb_gamma(corrected);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double n = static_cast<double>(values.size());
    double h = q * (n + 1.0) - 1.0;
    h = std::min(n - 1.0, std::max(0.0, h));
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(values.size() - 1, lo + 1);
    double t = h - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * t;
}

MetricAggregate aggregate(const std::vector<double>& values) {
    MetricAggregate a{0, 0, 0, 0};
    if (values.empty()) return a;
    double sum = 0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    a.q1 = quantile(values, 0.25);
    a.q2 = quantile(values, 0.50);
    a.q3 = quantile(values, 0.75);
    return a;
}

MetricsReport evaluate_images(const std::vector<std::string>& ids,
                              const std::vector<const Image*>& preds,
                              const std::vector<const Image*>& gts, const std::string& label,
                              const std::string& digest) {
    if (ids.size() != preds.size() || ids.size() != gts.size())
        throw std::invalid_argument("evaluate_images: list size mismatch");
    MetricsReport rep;
    rep.method_label = label;
    rep.config_digest = digest;
    std::vector<double> mses, maes, des;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        PerImageMetrics m;
        m.scene_id = ids[i];
        m.mse = image_mse(*preds[i], *gts[i]);
        MaeResult mae = image_mae(*preds[i], *gts[i]);
        m.mae_deg = mae.degrees;
        m.mae_skipped = mae.skipped;
        m.de2000 = image_de2000(*preds[i], *gts[i]);
        mses.push_back(m.mse);
        if (m.mae_deg) maes.push_back(*m.mae_deg);
        des.push_back(m.de2000);
        if (rep.resolution.empty())
            rep.resolution = std::to_string(preds[i]->w) + "x" + std::to_string(preds[i]->h);
        rep.per_image.push_back(std::move(m));
    }
    rep.mse = aggregate(mses);
    rep.mae = aggregate(maes);
    rep.de2000 = aggregate(des);
    return rep;
}

MetricsReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir,
                            const std::string& label, const std::string& digest) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        if (!entry.is_directory()) continue;
        if (fs::exists(entry.path() / "gt.png")) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());

    MetricsReport partial;
    std::vector<Image> preds, gts;
    std::vector<std::string> found;
    for (const auto& id : ids) {
        fs::path pred = fs::path(pred_dir) / (id + ".png");
        if (!fs::exists(pred)) {
            partial.missing.push_back(id);
            continue;
        }
        preds.push_back(read_png16(pred.string(), ColorSpace::GammaSRGB));
        gts.push_back(
            read_png16((fs::path(gt_dir) / id / "gt.png").string(), ColorSpace::GammaSRGB));
        found.push_back(id);
    }
    std::vector<const Image*> pp, gp;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        pp.push_back(&preds[i]);
        gp.push_back(&gts[i]);
    }
    MetricsReport rep = evaluate_images(found, pp, gp, label, digest);
    rep.missing = partial.missing;
    return rep;
}

std::string MetricsReport::to_json() const {
    json j;
    j["method"] = method_label;
    j["digest"] = config_digest;
    j["resolution"] = resolution;
    auto agg = [](const MetricAggregate& a) {
        return json{{"mean", a.mean}, {"q1", a.q1}, {"q2", a.q2}, {"q3", a.q3}};
    };
    j["aggregate"] = {{"mse", agg(mse)}, {"mae_deg", agg(mae)}, {"de2000", agg(de2000)}};
    json per = json::array();
    for (const auto& m : per_image) {
        json e;
        e["scene_id"] = m.scene_id;
        e["mse"] = m.mse;
        if (m.mae_deg) e["mae_deg"] = *m.mae_deg;
        else e["mae_deg"] = nullptr;
        e["mae_skipped"] = m.mae_skipped;
        e["de2000"] = m.de2000;
        per.push_back(std::move(e));
    }
    j["per_image"] = per;
    j["missing"] = missing;
    return j.dump(2) + "\n";
}

namespace {

void table_header(std::string& out) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-34s | %29s | %29s | %29s\n", "Method", "MSE", "MAE (deg)",
                  "dE2000");
    out += line;
    std::snprintf(line, sizeof(line), "%-34s | %6s %6s %6s %6s  | %6s %6s %6s %6s  | %6s %6s %6s %6s\n",
                  "", "Mean", "Q1", "Q2", "Q3", "Mean", "Q1", "Q2", "Q3", "Mean", "Q1", "Q2", "Q3");
    out += line;
    out += std::string(34, '-') + "-+-" + std::string(29, '-') + "-+-" + std::string(29, '-') +
           "-+-" + std::string(29, '-') + "\n";
}

void table_row(std::string& out, const MetricsReport& r) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-34s | %6.1f %6.1f %6.1f %6.1f  | %6.2f %6.2f %6.2f %6.2f  | %6.2f %6.2f %6.2f %6.2f\n",
                  r.method_label.c_str(), r.mse.mean, r.mse.q1, r.mse.q2, r.mse.q3, r.mae.mean,
                  r.mae.q1, r.mae.q2, r.mae.q3, r.de2000.mean, r.de2000.q1, r.de2000.q2,
                  r.de2000.q3);
    out += line;
}

}  // namespace

std::string MetricsReport::to_table() const {
    std::string out;
    table_header(out);
    table_row(out, *this);
    return out;
}

std::string render_comparison_table(const std::vector<MetricsReport>& reports) {
    std::string out;
    table_header(out);
    for (const auto& r : reports) table_row(out, r);
    return out;
}

}  // namespace mixwb::eval
