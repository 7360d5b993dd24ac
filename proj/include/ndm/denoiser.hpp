#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ndm/rng.hpp"
#include "ndm/schedule.hpp"

namespace ndm {

// Per-level noise-prediction network. A SiLU MLP F over the concatenation
// [z_t, sinusoidal(t/T), cond-or-null-token] drives the preconditioned
// output
//     eps_hat = beta(t) * z_t - alpha(t) * F(z_t, t, cond),
// so the residual F carries no identity component and stays learnable
// through hidden layers narrower than the latent. The final layer is
// zero-initialized, which makes a fresh net the optimal denoiser for
// unit-Gaussian data (eps_hat = beta(t) * z_t).
struct DenoiserNet {
    int level = 1;
    int input_dim = 0;  // d_l
    int cond_dim = 0;   // c_l, 0 at the top level
    int time_dim = 32;
    std::vector<int> hidden = {256, 256};
    std::vector<Eigen::MatrixXd> W;  // W[k]: out x in
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd null_token;  // learnable, length cond_dim

    int in_features() const { return input_dim + time_dim + cond_dim; }
    int n_layers() const { return static_cast<int>(W.size()); }
};

DenoiserNet make_denoiser(int level, int input_dim, int cond_dim, int time_dim,
                          const std::vector<int>& hidden, uint64_t seed);

Eigen::VectorXd time_embedding(int t, int T, int dim);

// cond = nullptr selects the learnable null token (unconditional branch).
Eigen::VectorXd predict_noise(const DenoiserNet& net, const Eigen::VectorXd& z_t, int t,
                              const Eigen::VectorXd* cond, const NoiseSchedule& s);

struct NetGrads {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd null_token;
};

NetGrads zero_grads(const DenoiserNet& net);

// One denoising-loss evaluation over a minibatch: per item draws t uniform
// in {1..T} and eps ~ N(0,I), noises the latent, substitutes the null token
// with probability drop_prob, and returns the mean squared error over batch
// and coordinates together with exact gradients for all parameters.
double loss_and_grads(const DenoiserNet& net, const Eigen::MatrixXd& latents,
                      const Eigen::MatrixXd& conds, const NoiseSchedule& s, Rng& rng,
                      double drop_prob, NetGrads& grads);

// (1 + w) * eps_cond - w * eps_uncond
Eigen::VectorXd cfg_combine(const Eigen::VectorXd& eps_cond,
                            const Eigen::VectorXd& eps_uncond, double w);

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int t = 0;
    NetGrads m;
    NetGrads v;

    explicit Adam(const DenoiserNet& net, double lr = 1e-3);
    void step(DenoiserNet& net, const NetGrads& g);
};

}  // namespace ndm
