#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ndm {

// Square grayscale images in [-1, 1] with a global silhouette class and a
// local texture class per image.
struct Dataset {
    std::vector<Eigen::MatrixXd> images;  // each H x W
    std::vector<int> global_labels;
    std::vector<int> texture_labels;
    std::vector<std::string> global_classes;
    std::vector<std::string> texture_classes;
    std::string split = "train";
    uint64_t seed = 0;

    int size() const { return static_cast<int>(images.size()); }
    int height() const { return images.empty() ? 0 : static_cast<int>(images[0].rows()); }
    int width() const { return images.empty() ? 0 : static_cast<int>(images[0].cols()); }
    // joint (global, texture) class id
    int combined_label(int i) const {
        return global_labels[i] * static_cast<int>(texture_classes.size()) + texture_labels[i];
    }
};

struct DatasetSpec {
    int n_images = 4096;
    int image_size = 32;
    std::vector<std::string> global_classes = {"disk", "square", "cross", "triangle"};
    std::vector<std::string> texture_classes = {"flat", "stripes", "speckle"};
    double center_jitter = 3.0;   // max |offset| of the shape center, pixels
    double min_radius = 7.0;      // shape half-extent range
    double max_radius = 12.0;
    uint64_t seed = 0;
    std::string split = "train";
};

// Deterministic given the spec; classes drawn uniformly per image.
Dataset gen_dataset(const DatasetSpec& spec);

// Directory layout: manifest.json, images.f32 (little-endian float32,
// n*H*W), labels.csv (index,global,texture).
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace ndm
