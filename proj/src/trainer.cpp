#include "mixwb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mixwb/checkpoint.hpp"
#include "mixwb/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixwb::train {

template <typename T>
T reconstruction_loss(const net::Tensor<T>& weights, const net::Tensor<T>& presets,
                      const net::Tensor<T>& target, net::Tensor<T>* dweights, T grad_scale) {
    int k = weights.c;
    if (presets.c != 3 * k || target.c != 3 || presets.h != weights.h || target.h != weights.h)
        throw std::invalid_argument("reconstruction_loss: shape mismatch");
    std::size_t plane = weights.plane();
    T loss = T(0);
    for (std::size_t p = 0; p < plane; ++p) {
        T resid[3];
        for (int c = 0; c < 3; ++c) {
            T blend = T(0);
            for (int i = 0; i < k; ++i) blend += weights.ch(i)[p] * presets.ch(3 * i + c)[p];
            resid[c] = target.ch(c)[p] - blend;
            loss += resid[c] * resid[c];
        }
        if (dweights) {
            for (int i = 0; i < k; ++i) {
                T g = T(0);
                for (int c = 0; c < 3; ++c) g += resid[c] * presets.ch(3 * i + c)[p];
                dweights->ch(i)[p] += T(-2) * grad_scale * g;
            }
        }
    }
    return loss;
}

namespace {

// 3x3 Sobel pair; the smoothness terms only use squared responses so the
// correlation/convolution sign convention does not matter.
constexpr double kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr double kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

template <typename T>
T sobel_term(const T* map, int h, int w, const double* kernel, T* gmap, T grad_scale) {
    T loss = T(0);
    for (int y = 0; y + 2 < h; ++y) {
        for (int x = 0; x + 2 < w; ++x) {
            T r = T(0);
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx)
                    r += static_cast<T>(kernel[ky * 3 + kx]) * map[(y + ky) * w + (x + kx)];
            loss += r * r;
            if (gmap) {
                T g = T(2) * grad_scale * r;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx)
                        gmap[(y + ky) * w + (x + kx)] += g * static_cast<T>(kernel[ky * 3 + kx]);
            }
        }
    }
    return loss;
}

}  // namespace

template <typename T>
T smoothness_loss(const net::Tensor<T>& weights, net::Tensor<T>* dweights, T grad_scale) {
    T loss = T(0);
    for (int i = 0; i < weights.c; ++i) {
        T* g = dweights ? dweights->ch(i) : nullptr;
        loss += sobel_term(weights.ch(i), weights.h, weights.w, kSobelX, g, grad_scale);
        loss += sobel_term(weights.ch(i), weights.h, weights.w, kSobelY, g, grad_scale);
    }
    return loss;
}

double mean_sobel_energy(const net::Tensor<float>& weights) {
    double acc = 0;
    std::size_t count = 0;
    for (int i = 0; i < weights.c; ++i) {
        acc += sobel_term<float>(weights.ch(i), weights.h, weights.w, kSobelX, nullptr, 0.f);
        acc += sobel_term<float>(weights.ch(i), weights.h, weights.w, kSobelY, nullptr, 0.f);
        count += static_cast<std::size_t>(weights.h - 2) * (weights.w - 2);
    }
    return count ? acc / static_cast<double>(count) : 0.0;
}

template <typename T>
T loss_forward_backward(const net::GridNet<T>& g, typename net::GridNet<T>::Workspace& ws,
                        const net::Tensor<T>& presets, const net::Tensor<T>& target, T lambda,
                        typename net::GridNet<T>::Grads& grads, T* recon_out, T* smooth_out) {
    net::Tensor<T> weights = g.forward(presets, ws);
    net::Tensor<T> dweights(weights.c, weights.h, weights.w);
    T lr = reconstruction_loss(weights, presets, target, &dweights, T(1));
    T ls = smoothness_loss(weights, &dweights, lambda);
    g.backward(dweights, ws, grads);
    if (recon_out) *recon_out = lr;
    if (smooth_out) *smooth_out = ls;
    return lr + lambda * ls;
}

Dataset load_dataset(const std::string& dir, const std::string& presets) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("no manifest.json in " + dir);
    json manifest = json::parse(mf);
    Dataset data;
    data.presets = presets;
    for (const auto& entry : manifest.at("scenes")) {
        TrainScene scene;
        scene.id = entry.at("id").get<std::string>();
        fs::path sdir = fs::path(dir) / entry.at("dir").get<std::string>();
        for (char name : presets)
            scene.presets.push_back(read_png16(
                (sdir / (std::string("preset_") + name + ".png")).string(), ColorSpace::GammaSRGB));
        scene.gt = read_png16((sdir / "gt.png").string(), ColorSpace::GammaSRGB);
        data.scenes.push_back(std::move(scene));
    }
    if (data.scenes.empty()) throw std::runtime_error("empty dataset: " + dir);
    return data;
}

namespace {

void copy_patch(const Image& img, int x0, int y0, int p, float* dst_plane0, std::size_t plane,
                int channels_stride) {
    // dst layout: channel-planar starting at dst_plane0, 3 consecutive planes
    for (int c = 0; c < 3; ++c) {
        float* dst = dst_plane0 + static_cast<std::size_t>(c) * channels_stride * plane;
        for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x)
                dst[static_cast<std::size_t>(y) * p + x] = img.at(x0 + x, y0 + y)[c];
    }
}

}  // namespace

Batch sample_batch(const Dataset& data, const TrainConfig& cfg, Rng& rng) {
    int k = static_cast<int>(data.presets.size());
    int p = cfg.patch;
    int n_scenes = static_cast<int>(data.scenes.size());
    int n_img = std::min(cfg.images_per_iter, n_scenes);

    std::vector<int> order(n_scenes);
    for (int i = 0; i < n_scenes; ++i) order[i] = i;
    for (int i = 0; i < n_img; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint32_t>(n_scenes - i)));
        std::swap(order[i], order[j]);
    }

    Batch batch;
    for (int s = 0; s < n_img; ++s) {
        const TrainScene& scene = data.scenes[order[s]];
        if (scene.gt.w < p || scene.gt.h < p)
            throw std::invalid_argument("sample_batch: patch larger than image");
        for (int r = 0; r < cfg.patches_per_image; ++r) {
            int x0 = static_cast<int>(rng.below(static_cast<std::uint32_t>(scene.gt.w - p + 1)));
            int y0 = static_cast<int>(rng.below(static_cast<std::uint32_t>(scene.gt.h - p + 1)));
            net::Tensor<float> input(3 * k, p, p);
            net::Tensor<float> target(3, p, p);
            std::size_t plane = input.plane();
            for (int i = 0; i < k; ++i)
                copy_patch(scene.presets[i], x0, y0, p, input.ch(3 * i), plane, 1);
            copy_patch(scene.gt, x0, y0, p, target.ch(0), plane, 1);
            batch.inputs.push_back(std::move(input));
            batch.targets.push_back(std::move(target));
        }
    }
    return batch;
}

namespace {

struct Adam {
    double lr, beta1, beta2, eps = 1e-8;
    long t = 0;
    std::vector<std::vector<float>> m, v;

    explicit Adam(const std::vector<std::vector<float>>& params, double lr_, double b1, double b2)
        : lr(lr_), beta1(b1), beta2(b2) {
        m.resize(params.size());
        v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i].assign(params[i].size(), 0.f);
            v[i].assign(params[i].size(), 0.f);
        }
    }

    void step(std::vector<std::vector<float>>& params,
              const std::vector<std::vector<float>>& grads, double lr_now) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            float* p = params[i].data();
            float* mi = m[i].data();
            float* vi = v[i].data();
            const float* g = grads[i].data();
            std::size_t n = params[i].size();
            for (std::size_t j = 0; j < n; ++j) {
                mi[j] = static_cast<float>(beta1 * mi[j] + (1.0 - beta1) * g[j]);
                vi[j] = static_cast<float>(beta2 * vi[j] + (1.0 - beta2) * g[j] * g[j]);
                double mhat = mi[j] / bc1;
                double vhat = vi[j] / bc2;
                p[j] = static_cast<float>(p[j] - lr_now * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

}  // namespace

std::string history_to_json(const std::vector<HistoryEntry>& h, const std::string& digest) {
    json j;
    if (!digest.empty()) j["digest"] = digest;
    json arr = json::array();
    for (const auto& e : h)
        arr.push_back({{"epoch", e.epoch},
                       {"iter", e.iter},
                       {"loss", e.loss},
                       {"recon", e.recon},
                       {"smooth", e.smooth}});
    j["iterations"] = arr;
    return j.dump(2) + "\n";
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& digest) {
    if (cfg.patch % 8 != 0) throw std::invalid_argument("train: patch size must be divisible by 8");
    net::GridNetConfig ncfg = cfg.net_config();
    net::GridNet<float> model(ncfg, cfg.seed);

    int batch_size = cfg.batch();
    Adam adam(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2);

    std::vector<net::GridNet<float>::Workspace> ws(batch_size);
    for (auto& w : ws) w = model.make_workspace();
    std::vector<net::GridNet<float>::Grads> sample_grads(batch_size);
    for (auto& g : sample_grads) g = model.make_grads();
    auto grads = model.make_grads();
    std::vector<double> sample_lr(batch_size), sample_ls(batch_size);

    TrainResult result;
    result.net_config = ncfg;
    std::vector<std::vector<float>> last_good = model.parameters();

    int iters_per_epoch =
        std::max<int>(1, static_cast<int>(data.scenes.size()) / cfg.images_per_iter);
    int global_iter = 0;
    bool aborted = false;

    for (int epoch = 0; epoch < cfg.epochs && !aborted; ++epoch) {
        double lr_now = cfg.lr;
        for (int m : cfg.lr_milestones)
            if (epoch >= m) lr_now *= 0.5;
        Rng epoch_rng(mix_seed(cfg.seed, 0xE70C000ULL + static_cast<std::uint64_t>(epoch)));

        for (int it = 0; it < iters_per_epoch; ++it) {
            Batch batch = sample_batch(data, cfg, epoch_rng);
            int n = static_cast<int>(batch.inputs.size());
            float inv_b = 1.0f / static_cast<float>(n);

            parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
                for (auto& g : sample_grads[s])
                    std::fill(g.begin(), g.end(), 0.f);
                net::Tensor<float> weights = model.forward(batch.inputs[s], ws[s]);
                net::Tensor<float> dweights(weights.c, weights.h, weights.w);
                float lr_s = reconstruction_loss<float>(weights, batch.inputs[s],
                                                        batch.targets[s], &dweights, inv_b);
                float ls_s = smoothness_loss<float>(weights, &dweights,
                                                    static_cast<float>(cfg.lambda) * inv_b);
                sample_lr[s] = lr_s;
                sample_ls[s] = ls_s;
                model.backward(dweights, ws[s], sample_grads[s]);
            });

            for (auto& g : grads) std::fill(g.begin(), g.end(), 0.f);
            for (int s = 0; s < n; ++s)
                for (std::size_t j = 0; j < grads.size(); ++j)
                    for (std::size_t t = 0; t < grads[j].size(); ++t)
                        grads[j][t] += sample_grads[s][j][t];

            double recon = 0, smooth = 0;
            for (int s = 0; s < n; ++s) {
                recon += sample_lr[s];
                smooth += sample_ls[s];
            }
            recon /= n;
            smooth /= n;
            double loss = recon + cfg.lambda * smooth;
            result.history.push_back({epoch, global_iter, loss, recon, smooth});
            ++global_iter;

            if (!std::isfinite(loss)) {
                result.diverged = true;
                aborted = true;
                break;
            }
            adam.step(model.parameters(), grads, lr_now);
        }
        if (!aborted) {
            last_good = model.parameters();
            result.epochs_done = epoch + 1;
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                ckpt::save(fs::path(out_dir) / "model_last.mixwb", ncfg, model.parameters(),
                           model.parameter_infos(), cfg.presets, epoch + 1, digest);
            }
        }
    }

    result.parameters = last_good;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        net::GridNet<float> final_model(ncfg, cfg.seed);
        final_model.parameters() = last_good;
        ckpt::save(fs::path(out_dir) / "model.mixwb", ncfg, final_model.parameters(),
                   final_model.parameter_infos(), cfg.presets, result.epochs_done, digest);
        std::ofstream f(fs::path(out_dir) / "history.json");
        f << history_to_json(result.history, digest);
    }
    return result;
}

template float reconstruction_loss<float>(const net::Tensor<float>&, const net::Tensor<float>&,
                                          const net::Tensor<float>&, net::Tensor<float>*, float);
template double reconstruction_loss<double>(const net::Tensor<double>&, const net::Tensor<double>&,
                                            const net::Tensor<double>&, net::Tensor<double>*,
                                            double);
template float smoothness_loss<float>(const net::Tensor<float>&, net::Tensor<float>*, float);
template double smoothness_loss<double>(const net::Tensor<double>&, net::Tensor<double>*, double);
template float loss_forward_backward<float>(const net::GridNet<float>&,
                                            net::GridNet<float>::Workspace&,
                                            const net::Tensor<float>&, const net::Tensor<float>&,
                                            float, net::GridNet<float>::Grads&, float*, float*);
template double loss_forward_backward<double>(const net::GridNet<double>&,
                                              net::GridNet<double>::Workspace&,
                                              const net::Tensor<double>&,
                                              const net::Tensor<double>&, double,
                                              net::GridNet<double>::Grads&, double*, double*);

}  // namespace mixwb::train
