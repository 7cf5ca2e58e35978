#include "mmcc/serialize.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mmcc::nn {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("snapshot: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64s(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_f64s(std::istream& is, std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("snapshot: truncated payload");
}

} // namespace

void save_network(std::ostream& os, const Mlp& net) {
    os.write("MMCC", 4);
    put_u32(os, kSnapshotVersion);
    put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        put_u32(os, static_cast<std::uint32_t>(l.weight.rows()));
        put_u32(os, static_cast<std::uint32_t>(l.weight.cols()));
        put_f64s(os, l.weight.values);
        put_f64s(os, l.bias.values);
        char tag = static_cast<char>(l.act);
        os.write(&tag, 1);
    }
}

Mlp load_network(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MMCC", 4) != 0)
        throw std::runtime_error("snapshot: bad magic");
    std::uint32_t version = get_u32(is);
    if (version != kSnapshotVersion)
        throw std::runtime_error("snapshot: unsupported version " + std::to_string(version));
    std::uint32_t count = get_u32(is);
    Mlp net;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t rows = get_u32(is);
        std::uint32_t cols = get_u32(is);
        DenseLayer l;
        l.weight = Tensor::zeros({rows, cols});
        l.bias = Tensor::zeros({rows});
        get_f64s(is, l.weight.values);
        get_f64s(is, l.bias.values);
        char tag = 0;
        is.read(&tag, 1);
        if (!is) throw std::runtime_error("snapshot: truncated activation tag");
        l.act = static_cast<Activation>(tag);
        net.layers.push_back(std::move(l));
    }
    return net;
}

} // namespace mmcc::nn
