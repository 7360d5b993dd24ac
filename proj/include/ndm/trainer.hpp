#pragma once

#include <vector>

#include "ndm/bundle.hpp"

namespace ndm {

// Minibatch loop for one level's denoising loss. Teacher forcing: the
// conditioning stack is built from ground-truth latents with fresh noise
// per step. The level's rng drives everything; draw order per step is
// batch indices, per-item condition noise (m ascending), then the draws
// inside loss_and_grads.
void train_level_latents(ModelBundle& bundle, int l,
                         const std::vector<Eigen::MatrixXd>& latents, int steps, Rng& rng);

void train_level(ModelBundle& bundle, int l, const Dataset& data, Rng& rng);

// Trains all levels, or only the two lowest when reusing a donor bundle
// with L-1 levels: donor level m becomes level m+1 and keeps its weights
// (strict reuse, no fine-tuning). Level l trains with the sub-stream
// derive_seed(cfg.seed, "train", l), so levels are order-independent.
ModelBundle train_nested(const NestedConfig& cfg, const Dataset& data,
                         const ModelBundle* reuse = nullptr);

struct ElboReport {
    std::vector<double> diffusion_nats;  // 1-based per level
    std::vector<double> prior_nats;      // 1-based per level
    double total = 0.0;

    double level_total(int l) const { return diffusion_nats[l] + prior_nats[l]; }
};

// Monte-Carlo estimate of the per-level variational bound terms in the
// eps-prediction parameterization, with exact posterior weighting from the
// schedule. The deterministic final step contributes a unit-variance
// Gaussian reconstruction term; each level adds its closed-form prior KL
// at t = T.
ElboReport estimate_elbo(const ModelBundle& bundle, const Eigen::MatrixXd& image,
                         int n_mc, Rng& rng);

}  // namespace ndm
