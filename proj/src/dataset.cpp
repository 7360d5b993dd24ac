#include "ndm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ndm/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ndm {

namespace {

bool inside_shape(int shape, double x, double y, double cx, double cy, double r) {
    const double dx = x - cx;
    const double dy = y - cy;
    switch (shape) {
        case 0:  // disk
            return dx * dx + dy * dy <= r * r;
        case 1:  // square
            return std::abs(dx) <= r * 0.85 && std::abs(dy) <= r * 0.85;
        case 2: {  // cross
            const double arm = std::max(2.0, r * 0.3);
            return (std::abs(dx) <= arm && std::abs(dy) <= r) ||
                   (std::abs(dy) <= arm && std::abs(dx) <= r);
        }
        case 3:  // upward triangle
            if (dy < -r || dy > r) return false;
            return std::abs(dx) <= (dy + r) * 0.5;
        default:
            return false;
    }
}

Eigen::MatrixXd render_image(const DatasetSpec& spec, int shape, int texture, Rng& rng) {
    const int n = spec.image_size;
    Eigen::MatrixXd img = Eigen::MatrixXd::Constant(n, n, -1.0);

    const double cx = (n - 1) / 2.0 + (rng.uniform() * 2.0 - 1.0) * spec.center_jitter;
    const double cy = (n - 1) / 2.0 + (rng.uniform() * 2.0 - 1.0) * spec.center_jitter;
    const double r = spec.min_radius + rng.uniform() * (spec.max_radius - spec.min_radius);

    // texture parameters, drawn whether or not each is used so the stream
    // layout is the same for every class combination
    const double flat_level = 0.4 + rng.uniform() * 0.5;
    const double stripe_period = 3.0 + rng.uniform() * 3.0;
    const double stripe_phase = rng.uniform() * stripe_period;
    const bool stripe_vertical = rng.uniform() < 0.5;
    const double stripe_hi = 0.6 + rng.uniform() * 0.4;
    const double stripe_lo = -0.2 + rng.uniform() * 0.4;

    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            if (!inside_shape(shape, x, y, cx, cy, r)) continue;
            double v;
            switch (texture) {
                case 0:
                    v = flat_level;
                    break;
                case 1: {
                    const double coord = stripe_vertical ? x : y;
                    const double phase = std::fmod(coord + stripe_phase, stripe_period);
                    v = phase < stripe_period / 2.0 ? stripe_hi : stripe_lo;
                    break;
                }
                default:
                    v = -0.6 + rng.uniform() * 1.2;  // speckle
                    break;
            }
            img(y, x) = std::clamp(v, -1.0, 1.0);
        }
    }
    return img;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    fs::rename(tmp, path);
}

}  // namespace

Dataset gen_dataset(const DatasetSpec& spec) {
    if (spec.global_classes.size() < 2 || spec.texture_classes.size() < 2) {
        throw std::invalid_argument("gen_dataset: need at least 2 classes of each kind");
    }
    if (spec.n_images < 1 || spec.image_size < 8) {
        throw std::invalid_argument("gen_dataset: invalid size");
    }
    Dataset data;
    data.global_classes = spec.global_classes;
    data.texture_classes = spec.texture_classes;
    data.split = spec.split;
    data.seed = spec.seed;
    data.images.reserve(spec.n_images);

    Rng rng(derive_seed(spec.seed, "dataset"));
    for (int i = 0; i < spec.n_images; ++i) {
        const int g = static_cast<int>(rng.uniform_below(spec.global_classes.size()));
        const int t = static_cast<int>(rng.uniform_below(spec.texture_classes.size()));
        data.global_labels.push_back(g);
        data.texture_labels.push_back(t);
        data.images.push_back(render_image(spec, g, t, rng));
    }
    return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
    fs::create_directories(dir);

    json manifest;
    manifest["n_images"] = data.size();
    manifest["height"] = data.height();
    manifest["width"] = data.width();
    manifest["global_classes"] = data.global_classes;
    manifest["texture_classes"] = data.texture_classes;
    manifest["split"] = data.split;
    manifest["seed"] = data.seed;
    write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");

    std::string tensor;
    tensor.reserve(static_cast<size_t>(data.size()) * data.height() * data.width() * 4);
    for (const auto& img : data.images) {
        for (int y = 0; y < img.rows(); ++y) {
            for (int x = 0; x < img.cols(); ++x) {
                const float f = static_cast<float>(img(y, x));
                const char* p = reinterpret_cast<const char*>(&f);
                tensor.append(p, 4);
            }
        }
    }
    write_file_atomic(dir + "/images.f32", tensor);

    std::string csv = "index,global,texture\n";
    for (int i = 0; i < data.size(); ++i) {
        csv += std::to_string(i) + "," + std::to_string(data.global_labels[i]) + "," +
               std::to_string(data.texture_labels[i]) + "\n";
    }
    write_file_atomic(dir + "/labels.csv", csv);
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw std::runtime_error("missing manifest: " + dir);
    json manifest = json::parse(mf);

    Dataset data;
    const int n = manifest.at("n_images").get<int>();
    const int h = manifest.at("height").get<int>();
    const int w = manifest.at("width").get<int>();
    data.global_classes = manifest.at("global_classes").get<std::vector<std::string>>();
    data.texture_classes = manifest.at("texture_classes").get<std::vector<std::string>>();
    data.split = manifest.value("split", "train");
    data.seed = manifest.value("seed", uint64_t{0});

    std::ifstream tf(dir + "/images.f32", std::ios::binary);
    if (!tf) throw std::runtime_error("missing tensor file: " + dir);
    std::vector<float> buf(static_cast<size_t>(n) * h * w);
    tf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (tf.gcount() != static_cast<std::streamsize>(buf.size() * 4)) {
        throw std::runtime_error("tensor file truncated: " + dir);
    }
    data.images.resize(n);
    size_t k = 0;
    for (int i = 0; i < n; ++i) {
        data.images[i].resize(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                data.images[i](y, x) = buf[k++];
            }
        }
    }

    std::ifstream lf(dir + "/labels.csv");
    if (!lf) throw std::runtime_error("missing labels: " + dir);
    std::string line;
    std::getline(lf, line);  // header
    while (std::getline(lf, line)) {
        if (line.empty()) continue;
        int idx, g, t;
        if (std::sscanf(line.c_str(), "%d,%d,%d", &idx, &g, &t) != 3) {
            throw std::runtime_error("bad label row: " + line);
        }
        data.global_labels.push_back(g);
        data.texture_labels.push_back(t);
    }
    if (static_cast<int>(data.global_labels.size()) != n) {
        throw std::runtime_error("label count mismatch in " + dir);
    }
    return data;
}

}  // namespace ndm
