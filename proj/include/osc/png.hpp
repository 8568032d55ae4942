#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "osc/tensor.hpp"

namespace osc {
namespace detail {

inline std::uint32_t crc32_update(std::uint32_t crc, const unsigned char* buf, std::size_t n) {
    static const auto table = []() {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ buf[i]) & 0xffu] ^ (crc >> 8);
    return crc;
}

inline void push_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline void push_chunk(std::vector<unsigned char>& out, const char type[4],
                       const std::vector<unsigned char>& data) {
    push_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = crc32_update(0xffffffffu, out.data() + at, out.size() - at);
    push_u32_be(out, crc ^ 0xffffffffu);
}

} // namespace detail

/// Minimal 8-bit grayscale PNG writer. The zlib stream uses stored (raw)
/// deflate blocks, so there is no external compression dependency.
inline void write_png_gray8(const std::string& path, std::size_t width, std::size_t height,
                            const std::vector<unsigned char>& pixels) {
    require(pixels.size() == width * height, "write_png_gray8: size mismatch");
    std::vector<unsigned char> out;
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);

    std::vector<unsigned char> ihdr;
    detail::push_u32_be(ihdr, static_cast<std::uint32_t>(width));
    detail::push_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0); // deflate
    ihdr.push_back(0); // adaptive filtering
    ihdr.push_back(0); // no interlace
    detail::push_chunk(out, "IHDR", ihdr);

    // raw scanlines, each prefixed with filter type 0
    std::vector<unsigned char> raw;
    raw.reserve(height * (width + 1));
    for (std::size_t r = 0; r < height; ++r) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(r * width),
                   pixels.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    }

    std::vector<unsigned char> idat;
    idat.push_back(0x78);
    idat.push_back(0x01);
    std::size_t off = 0;
    while (off < raw.size() || raw.empty()) {
        const std::size_t len = std::min<std::size_t>(raw.size() - off, 65535);
        const bool final = off + len == raw.size();
        idat.push_back(final ? 1 : 0);
        idat.push_back(static_cast<unsigned char>(len & 0xff));
        idat.push_back(static_cast<unsigned char>(len >> 8));
        idat.push_back(static_cast<unsigned char>(~len & 0xff));
        idat.push_back(static_cast<unsigned char>((~len >> 8) & 0xff));
        idat.insert(idat.end(), raw.begin() + static_cast<std::ptrdiff_t>(off),
                    raw.begin() + static_cast<std::ptrdiff_t>(off + len));
        off += len;
        if (raw.empty()) break;
    }
    std::uint32_t s1 = 1, s2 = 0;
    for (unsigned char b : raw) {
        s1 = (s1 + b) % 65521;
        s2 = (s2 + s1) % 65521;
    }
    detail::push_u32_be(idat, (s2 << 16) | s1);
    detail::push_chunk(out, "IDAT", idat);
    detail::push_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png_gray8: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png_gray8: write failed for " + path);
}

/// Min-max normalizes a 2D tensor into 8-bit pixels (constant input maps to 0).
inline std::vector<unsigned char> normalize_to_gray8(const Tensor& t) {
    require(t.ndim() == 2, "normalize_to_gray8: expects 2D tensor");
    double lo = t.data.empty() ? 0.0 : t.data[0];
    double hi = lo;
    for (double v : t.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<unsigned char> px(t.size(), 0);
    if (hi > lo) {
        const double s = 255.0 / (hi - lo);
        for (std::size_t i = 0; i < t.size(); ++i)
            px[i] = static_cast<unsigned char>(std::lround((t.data[i] - lo) * s));
    }
    return px;
}

inline void write_png_normalized(const std::string& path, const Tensor& t) {
    write_png_gray8(path, t.cols(), t.rows(), normalize_to_gray8(t));
}

} // namespace osc
