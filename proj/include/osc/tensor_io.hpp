#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "osc/tensor.hpp"

namespace osc {

static_assert(std::endian::native == std::endian::little,
              "OSCT i/o assumes a little-endian host");

// OSCT v1 tensor file:
//   bytes 0-3  magic "OSCT"
//   byte  4    version (1)
//   byte  5    ndim (u8)
//   bytes 6-7  reserved, zero
//   ndim x u32 little-endian extents
//   row-major little-endian f64 payload
inline void write_osct(const std::string& path, const Tensor& t) {
    require(t.ndim() >= 1 && t.ndim() <= 255, "write_osct: unsupported rank");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_osct: cannot open " + path);
    const char magic[4] = {'O', 'S', 'C', 'T'};
    f.write(magic, 4);
    unsigned char head[4] = {1, static_cast<unsigned char>(t.ndim()), 0, 0};
    f.write(reinterpret_cast<const char*>(head), 4);
    for (std::size_t d : t.dims) {
        std::uint32_t e = static_cast<std::uint32_t>(d);
        f.write(reinterpret_cast<const char*>(&e), 4);
    }
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("write_osct: write failed for " + path);
}

inline Tensor read_osct(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_osct: cannot open " + path);
    char magic[4];
    unsigned char head[4];
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(head), 4);
    if (!f || std::memcmp(magic, "OSCT", 4) != 0)
        throw std::runtime_error("read_osct: bad magic in " + path);
    if (head[0] != 1) throw std::runtime_error("read_osct: unsupported version in " + path);
    std::size_t ndim = head[1];
    if (ndim == 0) throw std::runtime_error("read_osct: zero rank in " + path);
    std::vector<std::size_t> dims(ndim);
    for (std::size_t i = 0; i < ndim; ++i) {
        std::uint32_t e = 0;
        f.read(reinterpret_cast<char*>(&e), 4);
        dims[i] = e;
    }
    if (!f) throw std::runtime_error("read_osct: truncated header in " + path);
    Tensor t(dims);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("read_osct: truncated payload in " + path);
    return t;
}

} // namespace osc
