#pragma once

// Row-major image planes and binary PGM (P5) / PPM (P6) I/O.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "oodrt/core/error.hpp"

namespace oodrt {

template <class T>
struct Plane {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), data(w * h, fill) {}

    T& operator()(std::size_t x, std::size_t y) { return data[y * width + x]; }
    const T& operator()(std::size_t x, std::size_t y) const { return data[y * width + x]; }
    // Clamped read; out-of-range coordinates replicate the border.
    T clamped(long x, long y) const {
        x = std::clamp<long>(x, 0, static_cast<long>(width) - 1);
        y = std::clamp<long>(y, 0, static_cast<long>(height) - 1);
        return data[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
    }
    bool operator==(const Plane&) const = default;
};

using GrayFrame = Plane<std::uint8_t>;
using FloatPlane = Plane<float>;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

using RgbFrame = Plane<Rgb>;

inline std::uint8_t luma(Rgb c) {
    const double y = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
    return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

inline GrayFrame to_gray(const RgbFrame& f) {
    GrayFrame g(f.width, f.height);
    for (std::size_t i = 0; i < f.data.size(); ++i) g.data[i] = luma(f.data[i]);
    return g;
}

inline FloatPlane to_float(const GrayFrame& f) {
    FloatPlane p(f.width, f.height);
    for (std::size_t i = 0; i < f.data.size(); ++i) p.data[i] = static_cast<float>(f.data[i]);
    return p;
}

namespace detail {

inline void write_pnm(const std::string& path, const char* magic, std::size_t w, std::size_t h, const void* bytes,
                      std::size_t n) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f << magic << '\n' << w << ' ' << h << "\n255\n";
    f.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
    if (!f) throw io_error("write failed for '" + path + "'");
}

// Reads the header of a binary PNM and returns the stream positioned at the
// first data byte.
inline std::ifstream read_pnm_header(const std::string& path, const std::string& magic, std::size_t& w,
                                     std::size_t& h) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "'");
    auto token = [&]() {
        std::string t;
        char c;
        while (f.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(f, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    if (token() != magic) throw io_error("'" + path + "' is not a binary " + magic + " file");
    try {
        w = std::stoul(token());
        h = std::stoul(token());
        if (std::stoul(token()) != 255) throw io_error("'" + path + "': only maxval 255 is supported");
    } catch (const std::logic_error&) {
        throw io_error("'" + path + "': malformed header");
    }
    if (w == 0 || h == 0) throw io_error("'" + path + "': zero image extent");
    return f;
}

}  // namespace detail

inline void write_pgm(const std::string& path, const GrayFrame& f) {
    detail::write_pnm(path, "P5", f.width, f.height, f.data.data(), f.data.size());
}

inline void write_ppm(const std::string& path, const RgbFrame& f) {
    static_assert(sizeof(Rgb) == 3);
    detail::write_pnm(path, "P6", f.width, f.height, f.data.data(), f.data.size() * 3);
}

inline GrayFrame read_pgm(const std::string& path) {
    std::size_t w, h;
    auto f = detail::read_pnm_header(path, "P5", w, h);
    GrayFrame g(w, h);
    f.read(reinterpret_cast<char*>(g.data.data()), static_cast<std::streamsize>(w * h));
    if (f.gcount() != static_cast<std::streamsize>(w * h)) throw io_error("'" + path + "': truncated pixel data");
    return g;
}

inline RgbFrame read_ppm(const std::string& path) {
    std::size_t w, h;
    auto f = detail::read_pnm_header(path, "P6", w, h);
    RgbFrame g(w, h);
    f.read(reinterpret_cast<char*>(g.data.data()), static_cast<std::streamsize>(w * h * 3));
    if (f.gcount() != static_cast<std::streamsize>(w * h * 3)) throw io_error("'" + path + "': truncated pixel data");
    return g;
}

}  // namespace oodrt
