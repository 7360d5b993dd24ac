#pragma once

#include <string>

#include <Eigen/Core>

namespace ndm {

enum class ScheduleKind { linear, cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Variance-preserving forward-process coefficients for a T-step diffusion.
// Invariants: alpha[0] = 1, beta[0] = 0; alpha[t]^2 + beta[t]^2 = 1 for all t;
// SNR(t) = alpha^2/beta^2 strictly decreasing for t >= 1.
struct NoiseSchedule {
    int T = 0;
    Eigen::VectorXd alpha;  // length T+1, signal coefficient
    Eigen::VectorXd beta;   // length T+1, noise standard deviation
    ScheduleKind kind = ScheduleKind::linear;

    double snr(int t) const;
};

// linear: per-step variance increments from 1e-4 to 0.02, rescaled by
// 1000/T and clipped to (0, 0.999]; cosine: squared-cosine cumulative
// signal with offset 0.008, same increment clip.
NoiseSchedule make_schedule(ScheduleKind kind, int T);

// alpha(t) * z + beta(t) * eps
Eigen::VectorXd forward_sample(const NoiseSchedule& s, const Eigen::VectorXd& z,
                               int t, const Eigen::VectorXd& eps);

struct PosteriorParams {
    Eigen::VectorXd mean;
    double variance = 0.0;
};

// Parameters of q(z^(t-1) | z^(t), z0). The final step t=1 is deterministic:
// mean = z0, variance = 0.
PosteriorParams posterior_params(const NoiseSchedule& s, const Eigen::VectorXd& z0,
                                 const Eigen::VectorXd& zt, int t);

}  // namespace ndm
