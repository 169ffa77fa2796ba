#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mixwb/net.hpp"

namespace mixwb::ckpt {

// Single-file archive: the magic line, a little-endian u64 JSON header
// length, the JSON header (network config, preset order, epoch, a shape
// index with blob offsets), then one raw little-endian float32 blob per
// named parameter in index order.
inline constexpr char kMagic[] = "MIXWB-CKPT-1\n";

struct Loaded {
    net::GridNetConfig config;
    std::string presets;  // preset order the model was trained with
    int epoch = 0;
    std::string digest;
    std::vector<std::vector<float>> parameters;
    std::vector<net::GridNet<float>::ParamInfo> infos;

    net::GridNet<float> instantiate() const {
        net::GridNet<float> g(config, 0);
        if (g.parameters().size() != parameters.size())
            throw std::runtime_error("checkpoint: parameter list mismatch");
        g.parameters() = parameters;
        return g;
    }
};

void save(const std::filesystem::path& path, const net::GridNetConfig& cfg,
          const std::vector<std::vector<float>>& params,
          const std::vector<net::GridNet<float>::ParamInfo>& infos, const std::string& presets,
          int epoch, const std::string& digest = "");

Loaded load(const std::filesystem::path& path);

}  // namespace mixwb::ckpt
