#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ndm/schedule.hpp"

namespace ndm {

// Finite-dataset index for the closed-form optimal denoiser: a kernel
// weighted average of dataset latents, optionally reweighted by agreement
// with noisy upper-level conditions.
struct OracleIndex {
    int L = 1;
    std::vector<Eigen::MatrixXd> latents;  // 1-based; latents[l] is N x dim_l
    std::vector<double> sigma;             // 1-based; sigma[l] for l >= 2
    NoiseSchedule schedule;

    int items() const { return latents.size() > 1 ? static_cast<int>(latents[1].rows()) : 0; }
};

// Expected clean latent E[z_l | z_t, cond]. Weight of item i:
//   exp(-|z_t - alpha(t) z_l^i|^2 / (2 beta(t)^2))
//     * prod_{m>l} exp(-|cond_m - z_m^i|^2 / (2 sigma_m^2)),
// evaluated in log space with max subtraction. cond = nullptr drops the
// conditional factor. sigma_m = 0 restricts to items matching cond_m
// within 1e-9 (error when none match).
Eigen::VectorXd oracle_denoiser(const OracleIndex& idx, int l, const Eigen::VectorXd& z_t,
                                int t, const std::vector<Eigen::VectorXd>* cond);

// Same posterior mean converted to noise prediction:
// (z_t - alpha(t) * D*) / beta(t).
Eigen::VectorXd oracle_eps(const OracleIndex& idx, int l, const Eigen::VectorXd& z_t,
                           int t, const std::vector<Eigen::VectorXd>* cond);

// Euclidean KNN over z_l; the query item itself is included (rank 0 at
// distance 0). Ties broken by smaller index.
std::vector<std::pair<int, double>> neighbor_report(const OracleIndex& idx, int l,
                                                    int query, int K);

}  // namespace ndm
