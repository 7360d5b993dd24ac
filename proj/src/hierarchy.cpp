#include "ndm/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

using json = nlohmann::json;

namespace ndm {

namespace {

Eigen::VectorXd flatten_image(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    int k = 0;
    for (int y = 0; y < m.rows(); ++y) {
        for (int x = 0; x < m.cols(); ++x) {
            v[k++] = m(y, x);
        }
    }
    return v;
}

}  // namespace

void NestedConfig::validate() const {
    if (levels < 1) throw std::invalid_argument("config: levels >= 1 required");
    if (d < 1 || T < 1) throw std::invalid_argument("config: d and T must be positive");
    if (height != width) throw std::invalid_argument("config: square images only");
    if (!sigma.empty() && static_cast<int>(sigma.size()) != levels - 1) {
        throw std::invalid_argument("config: sigma needs one entry per level 2..L");
    }
    for (double s : sigma) {
        if (s < 0.0) throw std::invalid_argument("config: sigma must be >= 0");
    }
    if (!cfg_weights.empty() && static_cast<int>(cfg_weights.size()) != levels) {
        throw std::invalid_argument("config: cfg_weights needs one entry per level");
    }
    if (!steps_per_level.empty() && static_cast<int>(steps_per_level.size()) != levels) {
        throw std::invalid_argument("config: steps_per_level needs one entry per level");
    }
    if (null_drop_prob < 0.0 || null_drop_prob > 1.0) {
        throw std::invalid_argument("config: null_drop_prob must be in [0, 1]");
    }
    if (batch_size < 1 || steps < 0 || lr <= 0.0) {
        throw std::invalid_argument("config: bad training hyperparameters");
    }
    if (time_dim < 2 || time_dim % 2 != 0) {
        throw std::invalid_argument("config: time_dim must be even and >= 2");
    }
    if (gamma && *gamma < 0.0) {
        throw std::invalid_argument("config: gamma must be >= 0");
    }
}

int NestedConfig::steps_for_level(int l) const {
    if (!steps_per_level.empty()) return steps_per_level[l - 1];
    return steps;
}

json NestedConfig::to_json() const {
    json j;
    j["levels"] = levels;
    j["d"] = d;
    j["T"] = T;
    j["schedule"] = to_string(schedule);
    j["height"] = height;
    j["width"] = width;
    j["sigma"] = sigma.empty() ? std::vector<double>(std::max(0, levels - 1), 0.5) : sigma;
    if (!gamma) {
        j["gamma"] = "auto";
    } else if (std::isinf(*gamma)) {
        j["gamma"] = "inf";
    } else {
        j["gamma"] = *gamma;
    }
    j["cfg_weights"] =
        cfg_weights.empty() ? std::vector<double>(levels, 0.0) : cfg_weights;
    j["null_drop_prob"] = null_drop_prob;
    j["steps"] = steps;
    if (!steps_per_level.empty()) j["steps_per_level"] = steps_per_level;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["seed"] = seed;
    j["hidden"] = hidden;
    j["time_dim"] = time_dim;
    return j;
}

NestedConfig NestedConfig::from_json(const json& j) {
    NestedConfig c;
    c.levels = j.value("levels", c.levels);
    c.d = j.value("d", c.d);
    c.T = j.value("T", c.T);
    if (j.contains("schedule")) c.schedule = schedule_kind_from_string(j["schedule"]);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    if (j.contains("sigma")) {
        if (j["sigma"].is_number()) {
            c.sigma.assign(std::max(0, c.levels - 1), j["sigma"].get<double>());
        } else {
            c.sigma = j["sigma"].get<std::vector<double>>();
        }
    }
    if (j.contains("gamma")) {
        if (j["gamma"].is_string()) {
            const std::string g = j["gamma"].get<std::string>();
            if (g == "auto") {
                c.gamma.reset();
            } else if (g == "inf") {
                c.gamma = std::numeric_limits<double>::infinity();
            } else {
                throw std::invalid_argument("config: gamma must be a number, \"inf\" or \"auto\"");
            }
        } else {
            c.gamma = j["gamma"].get<double>();
        }
    }
    if (j.contains("cfg_weights")) {
        if (j["cfg_weights"].is_number()) {
            c.cfg_weights.assign(c.levels, j["cfg_weights"].get<double>());
        } else {
            c.cfg_weights = j["cfg_weights"].get<std::vector<double>>();
        }
    }
    c.null_drop_prob = j.value("null_drop_prob", c.null_drop_prob);
    c.steps = j.value("steps", c.steps);
    if (j.contains("steps_per_level")) {
        c.steps_per_level = j["steps_per_level"].get<std::vector<int>>();
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<int>>();
    c.time_dim = j.value("time_dim", c.time_dim);

    if (c.sigma.empty()) c.sigma.assign(std::max(0, c.levels - 1), 0.5);
    if (c.cfg_weights.empty()) c.cfg_weights.assign(c.levels, 0.0);
    c.validate();
    return c;
}

int level_dim(const NestedConfig& cfg, int l) {
    if (l < 1 || l > cfg.levels) throw std::invalid_argument("level_dim: level out of range");
    if (l == 1) return cfg.height * cfg.width;
    return (cfg.levels - l + 1) * cfg.d;
}

int cond_dim(const NestedConfig& cfg, int l) {
    int total = 0;
    for (int m = l + 1; m <= cfg.levels; ++m) {
        total += level_dim(cfg, m);
    }
    return total;
}

LatentHierarchy build_hierarchy(const EncoderModel& enc, const Eigen::MatrixXd& image,
                                const NestedConfig& cfg) {
    if (image.rows() != cfg.height || image.cols() != cfg.width) {
        throw std::invalid_argument("build_hierarchy: image shape mismatch");
    }
    LatentHierarchy h;
    h.L = cfg.levels;
    h.z.resize(cfg.levels + 1);
    h.sigma.resize(cfg.levels + 1, 0.0);
    h.z[1] = flatten_image(image);
    for (int l = 2; l <= cfg.levels; ++l) {
        const Eigen::MatrixXd coeffs = encode_level(enc, image, l, cfg.levels);
        Eigen::VectorXd flat(coeffs.size());
        int k = 0;
        for (int r = 0; r < coeffs.rows(); ++r) {
            for (int c = 0; c < coeffs.cols(); ++c) {
                flat[k++] = coeffs(r, c);
            }
        }
        h.z[l] = std::move(flat);
        h.sigma[l] = cfg.sigma.empty() ? 0.5 : cfg.sigma[l - 2];
    }
    return h;
}

Eigen::VectorXd inject_noise(const Eigen::VectorXd& z, double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("inject_noise: sigma must be >= 0");
    if (sigma == 0.0) return z;
    return z + sigma * rng.normal_vec(static_cast<int>(z.size()));
}

double capacity_kl(const Eigen::VectorXd& z, double sigma) {
    if (sigma <= 0.0) {
        throw std::invalid_argument("capacity_kl: sigma = 0 carries unbounded information");
    }
    const double s2 = sigma * sigma;
    const double per_dim = s2 - 1.0 - 2.0 * std::log(sigma);
    return 0.5 * (z.size() * per_dim + z.squaredNorm());
}

double generation_noise_scale(double sigma_l, int t, int T, double gamma) {
    if (t < 0 || t > T) throw std::invalid_argument("generation_noise_scale: t out of range");
    if (gamma < 0.0) throw std::invalid_argument("generation_noise_scale: gamma must be >= 0");
    if (gamma == 0.0) return sigma_l;
    if (std::isinf(gamma)) return t < T ? 0.0 : sigma_l;
    return sigma_l * std::pow(static_cast<double>(t) / T, gamma / 2.0);
}

double resolve_gamma(const std::optional<double>& gamma,
                     const std::vector<double>& cfg_weights) {
    if (gamma) return *gamma;
    const bool any_cfg =
        std::any_of(cfg_weights.begin(), cfg_weights.end(), [](double w) { return w != 0.0; });
    return any_cfg ? 0.3 : std::numeric_limits<double>::infinity();
}

}  // namespace ndm
