#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tactile {

/// Grayscale image, row-major, intensities in [0, 1].
struct TactileImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    TactileImage() = default;
    TactileImage(int h, int w, float fill = 0.0f);

    [[nodiscard]] float at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
    float& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
    [[nodiscard]] size_t size() const { return pixels.size(); }

    /// Throws ShapeError / DomainError when the invariants do not hold.
    void validate() const;

    friend bool operator==(const TactileImage&, const TactileImage&) = default;
};

double mean_abs_diff(const TactileImage& a, const TactileImage& b);

/// Binary PGM ("P5", maxval 255). Values are rounded to the nearest 1/255.
std::vector<uint8_t> encode_pgm(const TactileImage& img);
TactileImage decode_pgm(std::span<const uint8_t> bytes, const std::string& what = "pgm");

void write_pgm(const std::filesystem::path& path, const TactileImage& img);
TactileImage read_pgm(const std::filesystem::path& path);

/// Tiles equally sized images into one mosaic, row by row.
TactileImage mosaic(const std::vector<std::vector<TactileImage>>& grid, int pad = 1);

} // namespace tactile
