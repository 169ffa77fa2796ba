#include "mixwb/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace mixwb::cli {

json merge_config(const json& defaults, const json& file_layer, const json& flag_layer) {
    json merged = defaults;
    for (const json* layer : {&file_layer, &flag_layer}) {
        for (auto it = layer->begin(); it != layer->end(); ++it) {
            if (!defaults.contains(it.key()))
                throw std::invalid_argument("unknown config key: " + it.key());
            merged[it.key()] = it.value();
        }
    }
    return merged;
}

json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    return json::parse(f);
}

std::string config_digest(const json& config) {
    json canon = config;
    // output locations do not influence produced content
    for (const char* key : {"out", "work_dir", "dump_weights"}) canon.erase(key);
    std::string text = canon.dump();  // object keys are sorted -> canonical
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t env_seed(std::uint64_t fallback) {
    if (const char* env = std::getenv("MIXWB_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
    }
    return fallback;
}

}  // namespace mixwb::cli
