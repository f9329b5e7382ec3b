#include "tactile/image.hpp"

#include "tactile/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace tactile {

TactileImage::TactileImage(int h, int w, float fill) : height(h), width(w) {
    if (h <= 0 || w <= 0) {
        throw ShapeError("image dimensions must be positive");
    }
    pixels.assign(static_cast<size_t>(h) * static_cast<size_t>(w), fill);
}

void TactileImage::validate() const {
    if (height <= 0 || width <= 0 || pixels.size() != static_cast<size_t>(height) * static_cast<size_t>(width)) {
        throw ShapeError("image pixel count does not match " + std::to_string(height) + "x" + std::to_string(width));
    }
    for (float v : pixels) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DomainError("image intensity outside [0,1]");
        }
    }
}

double mean_abs_diff(const TactileImage& a, const TactileImage& b) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("mean_abs_diff: image sizes differ");
    }
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        acc += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
    }
    return acc / static_cast<double>(a.pixels.size());
}

std::vector<uint8_t> encode_pgm(const TactileImage& img) {
    img.validate();
    std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels.size());
    for (float v : img.pixels) {
        out.push_back(static_cast<uint8_t>(std::lround(static_cast<double>(v) * 255.0)));
    }
    return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::span<const uint8_t> bytes, size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) {
        tok.push_back(static_cast<char>(bytes[pos++]));
    }
    return tok;
}

int parse_positive(const std::string& tok, const std::string& what) {
    try {
        size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(what + ": bad header field '" + tok + "'");
    }
}

} // namespace

TactileImage decode_pgm(std::span<const uint8_t> bytes, const std::string& what) {
    size_t pos = 0;
    if (next_token(bytes, pos) != "P5") {
        throw FormatError(what + ": missing P5 magic");
    }
    int w = parse_positive(next_token(bytes, pos), what);
    int h = parse_positive(next_token(bytes, pos), what);
    int maxval = parse_positive(next_token(bytes, pos), what);
    if (maxval != 255) {
        throw FormatError(what + ": only maxval 255 is supported");
    }
    ++pos; // single whitespace after maxval
    size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
    if (pos + n > bytes.size()) {
        throw FormatError(what + ": truncated pixel data at byte " + std::to_string(bytes.size()));
    }
    TactileImage img(h, w);
    for (size_t i = 0; i < n; ++i) {
        img.pixels[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const TactileImage& img) {
    auto bytes = encode_pgm(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

TactileImage read_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_pgm(bytes, path.string());
}

TactileImage mosaic(const std::vector<std::vector<TactileImage>>& grid, int pad) {
    if (grid.empty() || grid.front().empty()) {
        throw ShapeError("mosaic: empty grid");
    }
    const int th = grid.front().front().height;
    const int tw = grid.front().front().width;
    size_t cols = 0;
    for (const auto& row : grid) cols = std::max(cols, row.size());
    const int H = static_cast<int>(grid.size()) * (th + pad) + pad;
    const int W = static_cast<int>(cols) * (tw + pad) + pad;
    TactileImage out(H, W, 0.0f);
    for (size_t r = 0; r < grid.size(); ++r) {
        for (size_t c = 0; c < grid[r].size(); ++c) {
            const auto& tile = grid[r][c];
            if (tile.height != th || tile.width != tw) throw ShapeError("mosaic: tile sizes differ");
            const int oy = pad + static_cast<int>(r) * (th + pad);
            const int ox = pad + static_cast<int>(c) * (tw + pad);
            for (int y = 0; y < th; ++y) {
                std::copy_n(&tile.pixels[static_cast<size_t>(y) * tw], tw, &out.at(oy + y, ox));
            }
        }
    }
    return out;
}

} // namespace tactile
