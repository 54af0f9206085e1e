#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>

#include "swinfsr/model.hpp"

namespace swinfsr {

// Checkpoint wire format (little-endian):
//   "SFSR" | u32 version=1 | u32 tensor count
//   per tensor: u32 name_len | name | u32 ndim | u32 dims... | u8 dtype(0=f32) | payload
//   u32 config_len | "key=value\n" config echo
namespace ckpt_detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string config_blob(const SwinFsrConfig& c) {
    std::string s;
    s += "n_rsftb=" + std::to_string(c.n_rsftb) + "\n";
    s += "stl_per_block=" + std::to_string(c.stl_per_block) + "\n";
    s += "embed_dim=" + std::to_string(c.embed_dim) + "\n";
    s += "num_heads=" + std::to_string(c.num_heads) + "\n";
    s += "window_h=" + std::to_string(c.window.wh) + "\n";
    s += "window_w=" + std::to_string(c.window.ww) + "\n";
    s += "scale=" + std::to_string(c.scale) + "\n";
    s += "dropout_rate=" + fmt_double(c.dropout_rate) + "\n";
    s += "drop_path_rate=" + fmt_double(c.drop_path_rate) + "\n";
    s += "mlp_ratio=" + std::to_string(c.mlp_ratio) + "\n";
    return s;
}

inline SwinFsrConfig parse_config_blob(const std::string& blob) {
    SwinFsrConfig c;
    std::size_t pos = 0;
    while (pos < blob.size()) {
        std::size_t nl = blob.find('\n', pos);
        if (nl == std::string::npos) nl = blob.size();
        const std::string line = blob.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw DataError("checkpoint: malformed config line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "n_rsftb") c.n_rsftb = std::stoll(val);
            else if (key == "stl_per_block") c.stl_per_block = std::stoll(val);
            else if (key == "embed_dim") c.embed_dim = std::stoll(val);
            else if (key == "num_heads") c.num_heads = std::stoll(val);
            else if (key == "window_h") c.window.wh = std::stoll(val);
            else if (key == "window_w") c.window.ww = std::stoll(val);
            else if (key == "scale") c.scale = std::stoll(val);
            else if (key == "dropout_rate") c.dropout_rate = std::stod(val);
            else if (key == "drop_path_rate") c.drop_path_rate = std::stod(val);
            else if (key == "mlp_ratio") c.mlp_ratio = std::stoll(val);
            else throw DataError("checkpoint: unknown config key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw DataError("checkpoint: bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw DataError("checkpoint: bad value for '" + key + "'");
        }
    }
    return c;
}

}  // namespace ckpt_detail

template <typename T>
void save(Model<T>& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write("SFSR", 4);
    ckpt_detail::put_u32(os, 1);
    auto params = m.named_params();
    ckpt_detail::put_u32(os, static_cast<std::uint32_t>(params.size()));
    std::vector<float> buf;
    for (auto& [name, t] : params) {
        ckpt_detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Shape& s = t->shape();
        ckpt_detail::put_u32(os, static_cast<std::uint32_t>(s.size()));
        for (auto d : s) ckpt_detail::put_u32(os, static_cast<std::uint32_t>(d));
        os.put(static_cast<char>(0));  // dtype f32
        buf.resize(static_cast<std::size_t>(t->numel()));
        for (std::int64_t i = 0; i < t->numel(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>((*t)[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    const std::string blob = ckpt_detail::config_blob(m.cfg);
    ckpt_detail::put_u32(os, static_cast<std::uint32_t>(blob.size()));
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!os) throw DataError("checkpoint: write failed on '" + path + "'");
}

template <typename T>
Model<T> load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SFSR", 4) != 0) throw DataError("checkpoint: bad magic in '" + path + "'");
    const std::uint32_t version = ckpt_detail::get_u32(is);
    if (version != 1) throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t count = ckpt_detail::get_u32(is);

    struct Rec {
        Shape shape;
        std::vector<float> data;
    };
    std::vector<std::pair<std::string, Rec>> recs;
    recs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t nlen = ckpt_detail::get_u32(is);
        if (nlen > 4096) throw DataError("checkpoint: implausible name length");
        std::string name(nlen, '\0');
        if (!is.read(name.data(), nlen)) throw DataError("checkpoint: truncated file");
        const std::uint32_t ndim = ckpt_detail::get_u32(is);
        if (ndim > 8) throw DataError("checkpoint: implausible rank");
        Rec r;
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = ckpt_detail::get_u32(is);
            r.shape.push_back(static_cast<std::int64_t>(dim));
            numel *= dim;
        }
        int dtype = is.get();
        if (dtype == EOF) throw DataError("checkpoint: truncated file");
        if (dtype != 0) throw DataError("checkpoint: unsupported dtype code " + std::to_string(dtype));
        r.data.resize(static_cast<std::size_t>(numel));
        if (!is.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(r.data.size() * sizeof(float))))
            throw DataError("checkpoint: truncated tensor payload for '" + name + "'");
        recs.emplace_back(std::move(name), std::move(r));
    }
    const std::uint32_t blob_len = ckpt_detail::get_u32(is);
    std::string blob(blob_len, '\0');
    if (!is.read(blob.data(), blob_len)) throw DataError("checkpoint: truncated config blob");

    SwinFsrConfig cfg = ckpt_detail::parse_config_blob(blob);
    try {
        validate_config(cfg);
    } catch (const ShapeError& e) {
        throw DataError(std::string("checkpoint: invalid config: ") + e.what());
    }
    Rng dummy(0);
    Model<T> m = build<T>(cfg, dummy);
    auto params = m.named_params();
    if (params.size() != recs.size())
        throw DataError("checkpoint: tensor count " + std::to_string(recs.size()) + " does not match model (" +
                        std::to_string(params.size()) + ")");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, t] = params[i];
        auto& [rname, rec] = recs[i];
        if (rname != name) throw DataError("checkpoint: tensor '" + rname + "' where '" + name + "' expected");
        if (rec.shape != t->shape())
            throw DataError("checkpoint: shape mismatch for '" + name + "': file " + shape_str(rec.shape) + " vs model " +
                            shape_str(t->shape()));
        for (std::int64_t k = 0; k < t->numel(); ++k) (*t)[k] = static_cast<T>(rec.data[static_cast<std::size_t>(k)]);
    }
    return m;
}

}  // namespace swinfsr
