#include "routelab/nn.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace routelab::nn {

namespace {

constexpr char kMagic[8] = {'R', 'L', 'P', 'A', 'R', 'A', 'M', 'S'};
constexpr uint32_t kVersion = 1;

template <class X>
void put(std::ofstream& out, const X& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(X));
}

template <class X>
X get(std::ifstream& in) {
    X x{};
    in.read(reinterpret_cast<char*>(&x), sizeof(X));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return x;
}

std::string get_string(std::ifstream& in, size_t len) {
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

}  // namespace

void save_params_file(const std::string& path, const std::vector<ParamRef<float>>& params,
                      const std::string& metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, static_cast<uint64_t>(metadata.size()));
    out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    put(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        put(out, static_cast<uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put(out, static_cast<uint64_t>(p.value->rows()));
        put(out, static_cast<uint64_t>(p.value->cols()));
        out.write(reinterpret_cast<const char*>(p.value->data()),
                  static_cast<std::streamsize>(sizeof(float) * p.value->size()));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::string load_params_file(const std::string& path, std::vector<ParamRef<float>>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = get<uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto meta_len = get<uint64_t>(in);
    const std::string metadata = get_string(in, meta_len);
    const auto count = get<uint32_t>(in);

    std::map<std::string, ParamRef<float>*> by_name;
    for (auto& p : params) by_name[p.name] = &p;
    std::map<std::string, bool> filled;
    for (uint32_t i = 0; i < count; ++i) {
        const auto name_len = get<uint32_t>(in);
        const std::string name = get_string(in, name_len);
        const auto rows = static_cast<Eigen::Index>(get<uint64_t>(in));
        const auto cols = static_cast<Eigen::Index>(get<uint64_t>(in));
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: unexpected array '" + name + "'");
        Mat<float>& w = *it->second->value;
        if (w.rows() != rows || w.cols() != cols)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        in.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(sizeof(float) * w.size()));
        if (!in) throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
        filled[name] = true;
    }
    for (const auto& p : params)
        if (!filled.count(p.name))
            throw std::runtime_error("checkpoint: missing array '" + p.name + "'");
    return metadata;
}

std::string read_params_metadata(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    get<uint32_t>(in);
    const auto meta_len = get<uint64_t>(in);
    return get_string(in, meta_len);
}

}  // namespace routelab::nn
