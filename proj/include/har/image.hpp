#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace har {

// Grayscale image, intensities in [0, 1], row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

// round(255 * v), v clamped to [0, 1].
std::vector<std::uint8_t> quantize(const GrayImage& image);

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
void write_png(const GrayImage& image, const std::filesystem::path& path);

}  // namespace har
