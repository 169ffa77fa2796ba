#pragma once

#include <string>
#include <vector>

#include "mixwb/image.hpp"
#include "mixwb/net.hpp"
#include "mixwb/rng.hpp"

namespace mixwb::train {

// Squared-Frobenius reconstruction error of the weighted blend against the
// target patch. weights (k,p,p), presets (3k,p,p), target (3,p,p). Returns
// the per-sample loss; the gradient w.r.t. the weights is accumulated into
// dweights scaled by grad_scale.
template <typename T>
T reconstruction_loss(const net::Tensor<T>& weights, const net::Tensor<T>& presets,
                      const net::Tensor<T>& target, net::Tensor<T>* dweights = nullptr,
                      T grad_scale = T(1));

// Sum over maps of squared valid-region responses to the horizontal and
// vertical 3x3 Sobel kernels.
template <typename T>
T smoothness_loss(const net::Tensor<T>& weights, net::Tensor<T>* dweights = nullptr,
                  T grad_scale = T(1));

template <typename T>
T total_loss(T recon, T smooth, T lambda) {
    return recon + lambda * smooth;
}

// Mean Sobel energy per map pixel; the statistic used to compare smoothness
// of weight maps across models.
double mean_sobel_energy(const net::Tensor<float>& weights);

// One forward + loss + backward pass for a single sample; parameter
// gradients are accumulated into grads. Exposed for the finite-difference
// gradient checks, which run it in double precision.
template <typename T>
T loss_forward_backward(const net::GridNet<T>& g, typename net::GridNet<T>::Workspace& ws,
                        const net::Tensor<T>& presets, const net::Tensor<T>& target, T lambda,
                        typename net::GridNet<T>::Grads& grads, T* recon_out = nullptr,
                        T* smooth_out = nullptr);

struct TrainConfig {
    int patch = 64;
    int patches_per_image = 4;
    int images_per_iter = 8;
    double lambda = 100.0;
    int epochs = 30;
    double lr = 1e-4;
    std::vector<int> lr_milestones = {50, 100, 150};  // lr halves at each
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::uint64_t seed = 1;
    std::string presets = "tds";
    int batch() const { return images_per_iter * patches_per_image; }
    net::GridNetConfig net_config() const {
        net::GridNetConfig c;
        c.k = static_cast<int>(presets.size());
        return c;
    }
};

struct TrainScene {
    std::string id;
    std::vector<Image> presets;  // gamma sRGB, one per WB setting, fixed order
    Image gt;
};

struct Dataset {
    std::string presets;  // preset order, e.g. "tds"
    std::vector<TrainScene> scenes;
};

// Loads <dir>/<scene>/{preset_<name>.png, gt.png} for every scene listed in
// <dir>/manifest.json.
Dataset load_dataset(const std::string& dir, const std::string& presets);

struct Batch {
    std::vector<net::Tensor<float>> inputs;   // (3k,p,p) each
    std::vector<net::Tensor<float>> targets;  // (3,p,p) each
};

// Picks images_per_iter distinct scenes and patches_per_image aligned crops
// from each; preset and ground-truth crops share coordinates.
Batch sample_batch(const Dataset& data, const TrainConfig& cfg, Rng& rng);

struct HistoryEntry {
    int epoch;
    int iter;
    double loss, recon, smooth;
};

struct TrainResult {
    net::GridNetConfig net_config;
    std::vector<std::vector<float>> parameters;  // final (or last good) state
    std::vector<HistoryEntry> history;
    int epochs_done = 0;
    bool diverged = false;
};

// Adam on the combined loss; fully deterministic given cfg.seed. Writes
// model_last.mixwb after every epoch and model.mixwb plus history.json at
// the end when out_dir is non-empty.
TrainResult train(const Dataset& data, const TrainConfig& cfg, const std::string& out_dir = "",
                  const std::string& digest = "");

std::string history_to_json(const std::vector<HistoryEntry>& h, const std::string& digest);

extern template float reconstruction_loss<float>(const net::Tensor<float>&,
                                                 const net::Tensor<float>&,
                                                 const net::Tensor<float>&, net::Tensor<float>*,
                                                 float);
extern template double reconstruction_loss<double>(const net::Tensor<double>&,
                                                   const net::Tensor<double>&,
                                                   const net::Tensor<double>&,
                                                   net::Tensor<double>*, double);
extern template float smoothness_loss<float>(const net::Tensor<float>&, net::Tensor<float>*,
                                             float);
extern template double smoothness_loss<double>(const net::Tensor<double>&, net::Tensor<double>*,
                                               double);
extern template float loss_forward_backward<float>(const net::GridNet<float>&,
                                                   net::GridNet<float>::Workspace&,
                                                   const net::Tensor<float>&,
                                                   const net::Tensor<float>&, float,
                                                   net::GridNet<float>::Grads&, float*, float*);
extern template double loss_forward_backward<double>(const net::GridNet<double>&,
                                                     net::GridNet<double>::Workspace&,
                                                     const net::Tensor<double>&,
                                                     const net::Tensor<double>&, double,
                                                     net::GridNet<double>::Grads&, double*,
                                                     double*);

}  // namespace mixwb::train
