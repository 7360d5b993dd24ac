#include "ndm/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace ndm {

namespace {

constexpr double kMaxIncrement = 0.999;

double cosine_signal(double u) {
    // squared-cosine cumulative signal profile, offset 0.008
    constexpr double s = 0.008;
    double c = std::cos((u + s) / (1.0 + s) * M_PI / 2.0);
    return c * c;
}

}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "cosine";
}

double NoiseSchedule::snr(int t) const {
    return (alpha[t] * alpha[t]) / (beta[t] * beta[t]);
}

NoiseSchedule make_schedule(ScheduleKind kind, int T) {
    if (T < 1) {
        throw std::invalid_argument("schedule requires T >= 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.kind = kind;
    s.alpha = Eigen::VectorXd::Zero(T + 1);
    s.beta = Eigen::VectorXd::Zero(T + 1);
    s.alpha[0] = 1.0;
    s.beta[0] = 0.0;

    double signal = 1.0;  // cumulative alpha(t)^2
    for (int t = 1; t <= T; ++t) {
        double inc;
        if (kind == ScheduleKind::linear) {
            const double scale = 1000.0 / T;
            const double frac = (T == 1) ? 1.0 : static_cast<double>(t - 1) / (T - 1);
            inc = scale * (1e-4 + (0.02 - 1e-4) * frac);
        } else {
            inc = 1.0 - cosine_signal(static_cast<double>(t) / T) /
                            cosine_signal(static_cast<double>(t - 1) / T);
        }
        inc = std::min(std::max(inc, 1e-12), kMaxIncrement);
        signal *= 1.0 - inc;
        s.alpha[t] = std::sqrt(signal);
        s.beta[t] = std::sqrt(1.0 - signal);
    }
    return s;
}

Eigen::VectorXd forward_sample(const NoiseSchedule& s, const Eigen::VectorXd& z,
                               int t, const Eigen::VectorXd& eps) {
    if (t < 0 || t > s.T) {
        throw std::invalid_argument("forward_sample: t out of range");
    }
    if (z.size() != eps.size()) {
        throw std::invalid_argument("forward_sample: dimension mismatch");
    }
    return s.alpha[t] * z + s.beta[t] * eps;
}

PosteriorParams posterior_params(const NoiseSchedule& s, const Eigen::VectorXd& z0,
                                 const Eigen::VectorXd& zt, int t) {
    if (t < 1 || t > s.T) {
        throw std::invalid_argument("posterior_params: t out of range");
    }
    if (z0.size() != zt.size()) {
        throw std::invalid_argument("posterior_params: dimension mismatch");
    }
    PosteriorParams p;
    if (t == 1) {
        // deterministic final step
        p.mean = z0;
        p.variance = 0.0;
        return p;
    }
    const double r = s.alpha[t] / s.alpha[t - 1];  // per-step signal ratio
    const double r2 = r * r;
    const double var_t = s.beta[t] * s.beta[t];
    const double var_prev = s.beta[t - 1] * s.beta[t - 1];
    const double coef0 = s.alpha[t - 1] * (1.0 - r2) / var_t;
    const double coeft = r * var_prev / var_t;
    p.mean = coef0 * z0 + coeft * zt;
    p.variance = (1.0 - r2) * var_prev / var_t;
    return p;
}

}  // namespace ndm
