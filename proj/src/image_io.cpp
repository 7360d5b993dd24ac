#include "ndm/image_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace ndm {

uint8_t pixel_to_byte(double v) {
    const double mapped = std::round((v + 1.0) * 127.5);
    return static_cast<uint8_t>(std::min(255.0, std::max(0.0, mapped)));
}

namespace {

void push_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void push_chunk(std::vector<uint8_t>& out, const char type[4],
                const std::vector<uint8_t>& data) {
    push_be32(out, static_cast<uint32_t>(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    push_be32(out, static_cast<uint32_t>(crc));
}

}  // namespace

std::vector<uint8_t> encode_png_gray(const std::vector<uint8_t>& pixels, int width,
                                     int height) {
    if (width < 1 || height < 1 ||
        pixels.size() != static_cast<size_t>(width) * height) {
        throw std::invalid_argument("encode_png_gray: bad dimensions");
    }
    // scanlines with filter byte 0
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (width + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<size_t>(y) * width,
                   pixels.begin() + static_cast<size_t>(y + 1) * width);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) !=
        Z_OK) {
        throw std::runtime_error("encode_png_gray: deflate failed");
    }
    comp.resize(comp_len);

    std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<uint8_t> ihdr;
    push_be32(ihdr, static_cast<uint32_t>(width));
    push_be32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", comp);
    push_chunk(out, "IEND", {});
    return out;
}

void write_png_gray(const std::string& path, const Eigen::MatrixXd& image) {
    const int h = static_cast<int>(image.rows());
    const int w = static_cast<int>(image.cols());
    std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            pixels[static_cast<size_t>(y) * w + x] = pixel_to_byte(image(y, x));
        }
    }
    const std::vector<uint8_t> png = encode_png_gray(pixels, w, h);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(png.data()),
              static_cast<std::streamsize>(png.size()));
}

Eigen::MatrixXd tile_grid(const std::vector<Eigen::MatrixXd>& images) {
    if (images.empty()) throw std::invalid_argument("tile_grid: no images");
    const int n = static_cast<int>(images.size());
    const int h = static_cast<int>(images[0].rows());
    const int w = static_cast<int>(images[0].cols());
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;

    Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(rows * (h + 1) + 1, cols * (w + 1) + 1, 1.0);
    for (int i = 0; i < n; ++i) {
        const int r = i / cols;
        const int c = i % cols;
        grid.block(1 + r * (h + 1), 1 + c * (w + 1), h, w) = images[i];
    }
    return grid;
}

}  // namespace ndm
