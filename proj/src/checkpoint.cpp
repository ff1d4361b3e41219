#include "evlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace evlab::checkpoint {

namespace {

// this codebase only targets little-endian hosts; the format is LE on disk
static_assert(std::endian::native == std::endian::little);

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
    return v;
}

} // namespace

void save(const std::string& path, const ParamList& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write("EVDW", 4);
    write_pod<std::uint32_t>(os, kVersion);
    for (const auto& [name, t] : params) {
        if (name.size() > 0xffff)
            throw std::runtime_error("checkpoint: parameter name too long: " + name);
        write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape().size()));
        for (int d : t.shape()) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::map<std::string, Tensor> load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "EVDW", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(is, path);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);
    std::map<std::string, Tensor> out;
    while (true) {
        std::uint16_t name_len;
        is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (is.eof()) break;
        if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
        const auto rank = read_pod<std::uint8_t>(is, path);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_pod<std::uint32_t>(is, path));
        std::vector<double> data(shape_numel(shape));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated payload for '" + name + "' in " + path);
        out.emplace(name, Tensor::from_data(std::move(shape), std::move(data)));
    }
    return out;
}

void load_into(const std::string& path, ParamList& params) {
    auto stored = load(path);
    for (auto& [name, t] : params) {
        auto it = stored.find(name);
        if (it == stored.end())
            throw std::runtime_error("checkpoint: " + path + " is missing parameter '" + name +
                                     "'");
        if (it->second.shape() != t.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' in " + path +
                                     ": " + shape_str(it->second.shape()) + " vs " +
                                     shape_str(t.shape()));
        t.values() = it->second.values();
    }
}

} // namespace evlab::checkpoint
