#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ndm/encoder.hpp"
#include "ndm/rng.hpp"
#include "ndm/schedule.hpp"

namespace ndm {

// Resolved run configuration; JSON round-trippable.
struct NestedConfig {
    int levels = 3;  // L
    int d = 32;
    int T = 100;
    ScheduleKind schedule = ScheduleKind::linear;
    int height = 32;
    int width = 32;
    std::vector<double> sigma;        // per level 2..L; defaults to 0.5 each
    std::optional<double> gamma;      // empty = auto (inf without CFG, 0.3 with)
    std::vector<double> cfg_weights;  // per level 1..L, bottom first; defaults to 0
    double null_drop_prob = 0.1;
    int steps = 3000;  // gradient steps per level
    std::vector<int> steps_per_level;  // optional per-level override, bottom first
    int batch_size = 128;
    double lr = 1e-3;
    uint64_t seed = 0;
    std::vector<int> hidden = {256, 256};
    int time_dim = 32;

    void validate() const;
    int steps_for_level(int l) const;

    nlohmann::json to_json() const;
    static NestedConfig from_json(const nlohmann::json& j);
};

// Flattened dimension of z_l: pixels at l = 1, (L-l+1)*d above.
int level_dim(const NestedConfig& cfg, int l);
// Total dimension of the conditioning stack z_{>l}.
int cond_dim(const NestedConfig& cfg, int l);

// The frozen latent stack {z_1 = pixels, z_2, ..., z_L} for one image.
struct LatentHierarchy {
    int L = 1;
    std::vector<Eigen::VectorXd> z;  // 1-based; z[0] unused
    std::vector<double> sigma;       // 1-based; sigma[l] defined for l >= 2

    int dim(int l) const { return static_cast<int>(z[l].size()); }
};

LatentHierarchy build_hierarchy(const EncoderModel& enc, const Eigen::MatrixXd& image,
                                const NestedConfig& cfg);

// z + sigma * eps with eps ~ N(0, I) from rng.
Eigen::VectorXd inject_noise(const Eigen::VectorXd& z, double sigma, Rng& rng);

// D_KL( N(z, sigma^2 I) || N(0, I) ) in nats; rejects sigma = 0.
double capacity_kl(const Eigen::VectorXd& z, double sigma);

// Std of the conditioning noise at generation step t: sigma * (t/T)^(gamma/2).
// gamma = 0 keeps the training level; gamma = inf removes noise for t < T.
double generation_noise_scale(double sigma_l, int t, int T, double gamma);

// inf without CFG, 0.3 with CFG, unless pinned in the config.
double resolve_gamma(const std::optional<double>& gamma,
                     const std::vector<double>& cfg_weights);

}  // namespace ndm
