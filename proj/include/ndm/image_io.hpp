#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ndm {

// Linear map from [-1, 1] to [0, 255], clamped.
uint8_t pixel_to_byte(double v);

// 8-bit grayscale PNG bytes (deterministic: fixed zlib level, filter 0).
std::vector<uint8_t> encode_png_gray(const std::vector<uint8_t>& pixels, int width,
                                     int height);

void write_png_gray(const std::string& path, const Eigen::MatrixXd& image);

// Tiles images into a near-square grid with a 1-pixel white separator.
Eigen::MatrixXd tile_grid(const std::vector<Eigen::MatrixXd>& images);

}  // namespace ndm
