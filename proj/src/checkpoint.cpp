#include "glpe/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace glpe::checkpoint {

namespace {

constexpr const char* kMagic = "glpe-checkpoint v1";

void write_le64(std::ostream& os, double v) {
    const uint64_t u = std::bit_cast<uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_le64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

std::string shape_str(const Dims& dims) {
    std::string s;
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(dims[i]);
    }
    return s;
}

Dims parse_shape(const std::string& s) {
    Dims dims;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) dims.push_back(std::stol(part));
    return dims;
}

struct ManifestEntry {
    std::string name;
    Dims dims;
    long offset;
};

std::vector<ManifestEntry> read_manifest(const std::string& stem) {
    std::ifstream mf(stem + ".manifest");
    if (!mf) throw ConfigError("cannot open checkpoint manifest " + stem + ".manifest");
    std::string line;
    if (!std::getline(mf, line) || line != kMagic)
        throw ConfigError("bad checkpoint manifest header in " + stem + ".manifest");
    std::vector<ManifestEntry> entries;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string shape;
        if (!(ls >> e.name >> shape >> e.offset))
            throw ConfigError("malformed manifest line: " + line);
        e.dims = parse_shape(shape);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace

void save(const std::string& stem, const std::vector<NamedParam>& params) {
    std::ofstream mf(stem + ".manifest");
    std::ofstream bf(stem + ".bin", std::ios::binary);
    if (!mf || !bf) throw ConfigError("cannot write checkpoint " + stem);
    mf << kMagic << '\n';
    long offset = 0;
    for (const auto& p : params) {
        mf << p.name << ' ' << shape_str(p.tensor.dims()) << ' ' << offset << '\n';
        for (double v : p.tensor.data()) write_le64(bf, v);
        offset += 8 * p.tensor.size();
    }
    if (!mf.good() || !bf.good()) throw ConfigError("write failure for checkpoint " + stem);
}

std::vector<NamedParam> load(const std::string& stem) {
    auto entries = read_manifest(stem);
    std::ifstream bf(stem + ".bin", std::ios::binary);
    if (!bf) throw ConfigError("cannot open checkpoint payload " + stem + ".bin");
    std::vector<NamedParam> out;
    for (const auto& e : entries) {
        bf.seekg(e.offset);
        std::vector<double> data(static_cast<size_t>(numel(e.dims)));
        for (double& v : data) v = read_le64(bf);
        if (!bf.good()) throw ConfigError("truncated checkpoint payload " + stem + ".bin");
        out.push_back({e.name, Tensor(e.dims, std::move(data))});
    }
    return out;
}

void load_into(const std::string& stem, const std::vector<NamedParam>& params) {
    auto loaded = load(stem);
    if (loaded.size() != params.size())
        throw ConfigError("checkpoint " + stem + " has " + std::to_string(loaded.size()) +
                          " parameters, expected " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        if (loaded[i].name != params[i].name)
            throw ConfigError("checkpoint parameter name mismatch: " + loaded[i].name +
                              " vs " + params[i].name);
        if (loaded[i].tensor.dims() != params[i].tensor.dims())
            throw ConfigError("checkpoint shape mismatch for " + loaded[i].name);
        Tensor dst = params[i].tensor;
        std::copy(loaded[i].tensor.data().begin(), loaded[i].tensor.data().end(),
                  dst.raw().begin());
    }
}

}  // namespace glpe::checkpoint
