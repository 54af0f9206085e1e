#include "swinfsr/config.hpp"

#include <fstream>

namespace swinfsr {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    std::int64_t out = 0;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw DataError("config: key '" + key + "' needs an integer, got '" + v + "'");
    }
    if (pos != v.size()) throw DataError("config: key '" + key + "' needs an integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw DataError("config: key '" + key + "' needs a number, got '" + v + "'");
    }
    if (pos != v.size()) throw DataError("config: key '" + key + "' needs a number, got '" + v + "'");
    return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError("config: line " + std::to_string(lineno) + " is not key=value: '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw DataError("config: empty key on line " + std::to_string(lineno));
        out.emplace_back(std::move(key), std::move(val));
    }
    return out;
}

std::pair<SwinFsrConfig, TrainConfig> parse_run_config(const std::string& path) {
    SwinFsrConfig mc;
    TrainConfig tc;
    for (const auto& [key, val] : parse_kv_file(path)) {
        if (key == "n_rsftb") mc.n_rsftb = to_int(key, val);
        else if (key == "stl_per_block") mc.stl_per_block = to_int(key, val);
        else if (key == "embed_dim") mc.embed_dim = to_int(key, val);
        else if (key == "num_heads") mc.num_heads = to_int(key, val);
        else if (key == "window_h") mc.window.wh = to_int(key, val);
        else if (key == "window_w") mc.window.ww = to_int(key, val);
        else if (key == "scale") mc.scale = to_int(key, val);
        else if (key == "dropout_rate") mc.dropout_rate = to_double(key, val);
        else if (key == "drop_path_rate") mc.drop_path_rate = to_double(key, val);
        else if (key == "mlp_ratio") mc.mlp_ratio = to_int(key, val);
        else if (key == "lr_max") tc.lr_max = to_double(key, val);
        else if (key == "lr_min") tc.lr_min = to_double(key, val);
        else if (key == "total_steps") tc.total_steps = to_int(key, val);
        else if (key == "seed") tc.seed = static_cast<std::uint64_t>(to_int(key, val));
        else if (key == "perceptual_weight") tc.perceptual_weight = to_double(key, val);
        else if (key == "log_every") tc.log_every = to_int(key, val);
        else if (key == "val_every") tc.val_every = to_int(key, val);
        else if (key == "ckpt_every") tc.ckpt_every = to_int(key, val);
        else if (key == "patch_h") tc.patch_h = to_int(key, val);
        else if (key == "patch_w") tc.patch_w = to_int(key, val);
        else if (key == "loss_mode") {
            if (val == "l1") tc.loss_mode = LossMode::L1;
            else if (val == "l1+perceptual") tc.loss_mode = LossMode::L1Perceptual;
            else throw DataError("config: loss_mode must be 'l1' or 'l1+perceptual', got '" + val + "'");
        } else {
            throw DataError("config: unknown key '" + key + "'");
        }
    }
    validate_config(mc);
    return {mc, tc};
}

}  // namespace swinfsr
