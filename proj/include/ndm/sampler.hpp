#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "ndm/bundle.hpp"
#include "ndm/oracle.hpp"

namespace ndm {

// One reverse-process noise prediction; cond = nullptr means unconditional.
using NoisePredictor =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, int, const Eigen::VectorXd*)>;

NoisePredictor net_predictor(const DenoiserNet& net, const NoiseSchedule& s);
// Closed-form reference denoiser as a drop-in predictor; a concatenated
// condition is split back into per-level blocks.
NoisePredictor oracle_predictor(const OracleIndex& idx, int l);

// Clean upper latents and their training noise levels, ascending in m.
struct LevelConditioning {
    std::vector<Eigen::VectorXd> uppers;
    std::vector<double> sigmas;
};

// Ancestral sampling for one level, from z_T ~ N(0,I) down to z_0.
// The conditioning noise is drawn once per trajectory and rescaled by
// generation_noise_scale at every step; CFG runs only when w != 0 and a
// condition is present. The denoised estimate is clamped to [-z0_clip,
// z0_clip] before the posterior update. Draw order: cond noise (m
// ascending), z_T, then the posterior noise for t = T..2.
Eigen::VectorXd sample_level(const NoisePredictor& predict, int dim,
                             const NoiseSchedule& s, const LevelConditioning* cond,
                             double w, double gamma, Rng& rng,
                             std::vector<Eigen::VectorXd>* cond_noise_out = nullptr,
                             double z0_clip = std::numeric_limits<double>::infinity());

// Everything needed to re-run any suffix of levels.
struct SampleTrace {
    int L = 1;
    int height = 0;
    int width = 0;
    double gamma = 0.0;
    std::vector<double> cfg_weights;                    // per level, bottom first
    std::vector<Eigen::VectorXd> z;                     // 1-based
    std::vector<uint64_t> level_seeds;                  // 1-based; 0 for inherited
    std::vector<std::vector<Eigen::VectorXd>> cond_noise;  // [l] -> eps_m, m ascending
    std::vector<uint8_t> inherited;                     // 1-based

    Eigen::MatrixXd image() const;
};

SampleTrace sample_trace(const ModelBundle& bundle, uint64_t trace_seed, double gamma,
                         const std::vector<double>& cfg_weights);

// Top level sampled unconditionally, then each level conditioned on all
// generated latents above it. Per-trace seeds are drawn from rng up front,
// so results do not depend on the thread count.
std::vector<SampleTrace> sample_hierarchy(const ModelBundle& bundle, int n, Rng& rng,
                                          double gamma,
                                          const std::vector<double>& cfg_weights,
                                          int threads = 1);
// Config-default gamma (auto) and CFG weights.
std::vector<SampleTrace> sample_hierarchy(const ModelBundle& bundle, int n, Rng& rng,
                                          int threads = 1);

// Keeps z_{l > k} from the source and re-samples levels k..1. k = 0 keeps
// everything (pure replay). Source may be a previous trace or an image,
// whose ground-truth latents come from the encoder.
SampleTrace resample_from_level(const ModelBundle& bundle, const SampleTrace& source,
                                int k, Rng& rng);
SampleTrace resample_from_level(const ModelBundle& bundle, const Eigen::MatrixXd& source,
                                int k, Rng& rng);
SampleTrace resample_from_level(const ModelBundle& bundle, const SampleTrace& source,
                                int k, Rng& rng, double gamma,
                                const std::vector<double>& cfg_weights);
SampleTrace resample_from_level(const ModelBundle& bundle, const Eigen::MatrixXd& source,
                                int k, Rng& rng, double gamma,
                                const std::vector<double>& cfg_weights);

}  // namespace ndm
