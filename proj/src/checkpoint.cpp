#include "mixwb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace mixwb::ckpt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; byte swapping is not implemented");

void save(const std::filesystem::path& path, const net::GridNetConfig& cfg,
          const std::vector<std::vector<float>>& params,
          const std::vector<net::GridNet<float>::ParamInfo>& infos, const std::string& presets,
          int epoch, const std::string& digest) {
    if (params.size() != infos.size()) throw std::invalid_argument("checkpoint save: index mismatch");
    json header;
    header["format"] = 1;
    header["config"] = {{"columns", cfg.columns},
                        {"rows", cfg.rows},
                        {"k", cfg.k},
                        {"stem_channels", cfg.stem_channels}};
    header["presets"] = presets;
    header["epoch"] = epoch;
    if (!digest.empty()) header["digest"] = digest;
    json index = json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        index.push_back({{"name", infos[i].name},
                         {"shape", infos[i].shape},
                         {"offset", offset},
                         {"count", params[i].size()}});
        offset += params[i].size() * sizeof(float);
    }
    header["params"] = index;
    std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path.string());
    f.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
    std::uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& p : params)
        f.write(reinterpret_cast<const char*>(p.data()),
                static_cast<std::streamsize>(p.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Loaded load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path.string());
    std::string magic(std::strlen(kMagic), '\0');
    f.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (magic != kMagic) throw std::runtime_error("not a checkpoint file: " + path.string());
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(htext);

    Loaded out;
    out.config.columns = header.at("config").at("columns").get<int>();
    out.config.rows = header.at("config").at("rows").get<int>();
    out.config.k = header.at("config").at("k").get<int>();
    out.config.stem_channels = header.at("config").at("stem_channels").get<int>();
    out.presets = header.at("presets").get<std::string>();
    out.epoch = header.at("epoch").get<int>();
    out.digest = header.value("digest", "");
    for (const auto& e : header.at("params")) {
        net::GridNet<float>::ParamInfo info;
        info.name = e.at("name").get<std::string>();
        info.shape = e.at("shape").get<std::vector<int>>();
        out.infos.push_back(info);
        std::vector<float> blob(e.at("count").get<std::size_t>());
        f.read(reinterpret_cast<char*>(blob.data()),
               static_cast<std::streamsize>(blob.size() * sizeof(float)));
        out.parameters.push_back(std::move(blob));
    }
    if (!f) throw std::runtime_error("truncated checkpoint: " + path.string());
    return out;
}

}  // namespace mixwb::ckpt
