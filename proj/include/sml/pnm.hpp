#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sml {

/// 8-bit RGB image, row-major, interleaved channels.
struct RgbImage {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> px; // h*w*3

    std::uint8_t& at(int i, int j, int c) { return px[(static_cast<std::size_t>(i) * w + j) * 3 + c]; }
    std::uint8_t at(int i, int j, int c) const { return px[(static_cast<std::size_t>(i) * w + j) * 3 + c]; }
};

/// 8-bit single-channel image (mask values are class ids).
struct GrayImage {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> px; // h*w

    std::uint8_t& at(int i, int j) { return px[static_cast<std::size_t>(i) * w + j]; }
    std::uint8_t at(int i, int j) const { return px[static_cast<std::size_t>(i) * w + j]; }
};

// Binary PPM (P6) / PGM (P5), maxval 255.
void write_ppm(const std::string& path, const RgbImage& img);
RgbImage read_ppm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

} // namespace sml
