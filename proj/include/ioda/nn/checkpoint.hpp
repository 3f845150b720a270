#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "ioda/errors.hpp"
#include "ioda/nn/params.hpp"

// Binary parameter container: versioned, with a key/value metadata block and
// raw little-endian doubles per tensor. Save/load round-trips bit-exactly.

namespace ioda::nn {

namespace detail {

constexpr char kCheckpointMagic[8] = {'I', 'O', 'D', 'A', 'C', 'K', 'P', '\n'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError(path + ": truncated checkpoint");
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const std::string& path) {
    std::uint32_t len = read_u32(in, path);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw DataError(path + ": truncated checkpoint");
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamSet& params,
                            const std::map<std::string, std::string>& meta = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::write_u32(out, detail::kCheckpointVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        detail::write_string(out, k);
        detail::write_string(out, v);
    }
    detail::write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, p] : params) {
        detail::write_string(out, name);
        detail::write_u32(out, static_cast<std::uint32_t>(p.rows()));
        detail::write_u32(out, static_cast<std::uint32_t>(p.cols()));
        out.write(reinterpret_cast<const char*>(p.values().data()),
                  static_cast<std::streamsize>(p.size() * sizeof(double)));
    }
    if (!out) throw DataError("write failed: " + path);
}

inline std::pair<ParamSet, std::map<std::string, std::string>> load_checkpoint(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0)
        throw DataError(path + ": not a checkpoint file");
    std::uint32_t version = detail::read_u32(in, path);
    if (version != detail::kCheckpointVersion)
        throw DataError(path + ": unsupported checkpoint version " +
                        std::to_string(version));

    std::map<std::string, std::string> meta;
    std::uint32_t n_meta = detail::read_u32(in, path);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = detail::read_string(in, path);
        meta[k] = detail::read_string(in, path);
    }

    ParamSet params;
    std::uint32_t n_params = detail::read_u32(in, path);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = detail::read_string(in, path);
        std::uint32_t rows = detail::read_u32(in, path);
        std::uint32_t cols = detail::read_u32(in, path);
        std::vector<double> v(static_cast<std::size_t>(rows) * cols);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw DataError(path + ": truncated checkpoint");
        register_param(params, name,
                       Tensor::from_values(static_cast<int>(rows),
                                           static_cast<int>(cols), std::move(v),
                                           /*trainable=*/true));
    }
    return {std::move(params), std::move(meta)};
}

}  // namespace ioda::nn
