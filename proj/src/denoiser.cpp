#include "ndm/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace ndm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& x) {
    return x.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[k] = silu(pre[k-1])
    std::vector<Eigen::MatrixXd> pre;  // pre-activations per layer
    Eigen::MatrixXd out;
};

ForwardCache forward(const DenoiserNet& net, const Eigen::MatrixXd& x) {
    ForwardCache c;
    c.act.push_back(x);
    const int K = net.n_layers();
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd pre = c.act.back() * net.W[k].transpose();
        pre.rowwise() += net.b[k].transpose();
        if (k + 1 < K) {
            c.act.push_back(silu(pre));
            c.pre.push_back(std::move(pre));
        } else {
            c.out = std::move(pre);
        }
    }
    return c;
}

}  // namespace

DenoiserNet make_denoiser(int level, int input_dim, int cond_dim, int time_dim,
                          const std::vector<int>& hidden, uint64_t seed) {
    if (input_dim < 1 || cond_dim < 0 || time_dim < 2 || hidden.empty()) {
        throw std::invalid_argument("make_denoiser: bad dimensions");
    }
    DenoiserNet net;
    net.level = level;
    net.input_dim = input_dim;
    net.cond_dim = cond_dim;
    net.time_dim = time_dim;
    net.hidden = hidden;

    Rng rng(derive_seed(seed, "net-init", static_cast<uint64_t>(level)));
    std::vector<int> widths;
    widths.push_back(net.in_features());
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(input_dim);

    for (size_t k = 0; k + 1 < widths.size(); ++k) {
        const int in = widths[k];
        const int out = widths[k + 1];
        Eigen::MatrixXd w(out, in);
        if (k + 2 == widths.size()) {
            w.setZero();  // zero-initialized final layer
        } else {
            const double std = std::sqrt(2.0 / in);
            for (int r = 0; r < out; ++r) {
                for (int c = 0; c < in; ++c) {
                    w(r, c) = rng.normal() * std;
                }
            }
        }
        net.W.push_back(std::move(w));
        net.b.push_back(Eigen::VectorXd::Zero(out));
    }
    net.null_token = Eigen::VectorXd::Zero(cond_dim);
    return net;
}

Eigen::VectorXd time_embedding(int t, int T, int dim) {
    const int half = dim / 2;
    const double s = 1000.0 * static_cast<double>(t) / T;
    Eigen::VectorXd emb(dim);
    for (int j = 0; j < half; ++j) {
        const double freq = std::exp(-std::log(10000.0) * j / half);
        emb[j] = std::cos(s * freq);
        emb[half + j] = std::sin(s * freq);
    }
    return emb;
}

Eigen::VectorXd predict_noise(const DenoiserNet& net, const Eigen::VectorXd& z_t, int t,
                              const Eigen::VectorXd* cond, const NoiseSchedule& s) {
    if (z_t.size() != net.input_dim) {
        throw std::invalid_argument("predict_noise: latent dimension mismatch");
    }
    if (t < 0 || t > s.T) {
        throw std::invalid_argument("predict_noise: t out of range");
    }
    if (cond != nullptr && net.cond_dim > 0 && cond->size() != net.cond_dim) {
        throw std::invalid_argument("predict_noise: condition dimension mismatch");
    }
    Eigen::MatrixXd x(1, net.in_features());
    x.row(0).segment(0, net.input_dim) = z_t.transpose();
    x.row(0).segment(net.input_dim, net.time_dim) =
        time_embedding(t, s.T, net.time_dim).transpose();
    if (net.cond_dim > 0) {
        const Eigen::VectorXd& c = cond ? *cond : net.null_token;
        x.row(0).segment(net.input_dim + net.time_dim, net.cond_dim) = c.transpose();
    }
    const Eigen::VectorXd f = forward(net, x).out.row(0).transpose();
    return s.beta[t] * z_t - s.alpha[t] * f;
}

NetGrads zero_grads(const DenoiserNet& net) {
    NetGrads g;
    for (const auto& w : net.W) g.W.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : net.b) g.b.push_back(Eigen::VectorXd::Zero(b.size()));
    g.null_token = Eigen::VectorXd::Zero(net.null_token.size());
    return g;
}

double loss_and_grads(const DenoiserNet& net, const Eigen::MatrixXd& latents,
                      const Eigen::MatrixXd& conds, const NoiseSchedule& s, Rng& rng,
                      double drop_prob, NetGrads& grads) {
    const int B = static_cast<int>(latents.rows());
    if (B == 0) throw std::invalid_argument("loss_and_grads: empty batch");
    if (latents.cols() != net.input_dim) {
        throw std::invalid_argument("loss_and_grads: latent dimension mismatch");
    }
    if (net.cond_dim > 0 && (conds.rows() != B || conds.cols() != net.cond_dim)) {
        throw std::invalid_argument("loss_and_grads: condition dimension mismatch");
    }

    const int d = net.input_dim;
    Eigen::MatrixXd x(B, net.in_features());
    Eigen::MatrixXd eps(B, d);
    Eigen::VectorXd alpha_row(B);
    Eigen::VectorXd beta_row(B);
    std::vector<uint8_t> dropped(B, 0);

    for (int i = 0; i < B; ++i) {
        const int t = 1 + static_cast<int>(rng.uniform_below(static_cast<uint64_t>(s.T)));
        alpha_row[i] = s.alpha[t];
        beta_row[i] = s.beta[t];
        for (int j = 0; j < d; ++j) eps(i, j) = rng.normal();
        x.row(i).segment(0, d) = s.alpha[t] * latents.row(i) + s.beta[t] * eps.row(i);
        x.row(i).segment(d, net.time_dim) =
            time_embedding(t, s.T, net.time_dim).transpose();
        if (net.cond_dim > 0) {
            dropped[i] = rng.uniform() < drop_prob ? 1 : 0;
            if (dropped[i]) {
                x.row(i).segment(d + net.time_dim, net.cond_dim) = net.null_token.transpose();
            } else {
                x.row(i).segment(d + net.time_dim, net.cond_dim) = conds.row(i);
            }
        }
    }

    ForwardCache cache = forward(net, x);
    // eps_hat = beta(t) z_t - alpha(t) F
    Eigen::MatrixXd diff = -(cache.out.array().colwise() * alpha_row.array()).matrix();
    diff += (x.leftCols(d).array().colwise() * beta_row.array()).matrix();
    diff -= eps;
    const double loss = diff.squaredNorm() / (static_cast<double>(B) * d);

    // backward; d(eps_hat)/dF = -alpha(t)
    const int K = net.n_layers();
    Eigen::MatrixXd delta =
        (diff.array().colwise() * (-2.0 * alpha_row.array() / (static_cast<double>(B) * d)))
            .matrix();
    for (int k = K - 1; k >= 0; --k) {
        grads.W[k].noalias() = delta.transpose() * cache.act[k];
        grads.b[k] = delta.colwise().sum().transpose();
        if (k > 0) {
            delta = (delta * net.W[k]).cwiseProduct(silu_grad(cache.pre[k - 1]));
        } else if (net.cond_dim > 0) {
            const Eigen::MatrixXd dx = delta * net.W[0];
            grads.null_token.setZero();
            for (int i = 0; i < B; ++i) {
                if (dropped[i]) {
                    grads.null_token +=
                        dx.row(i).segment(d + net.time_dim, net.cond_dim).transpose();
                }
            }
        }
    }
    return loss;
}

Eigen::VectorXd cfg_combine(const Eigen::VectorXd& eps_cond,
                            const Eigen::VectorXd& eps_uncond, double w) {
    if (eps_cond.size() != eps_uncond.size()) {
        throw std::invalid_argument("cfg_combine: dimension mismatch");
    }
    return (1.0 + w) * eps_cond - w * eps_uncond;
}

Adam::Adam(const DenoiserNet& net, double lr_) : lr(lr_) {
    m = zero_grads(net);
    v = zero_grads(net);
}

void Adam::step(DenoiserNet& net, const NetGrads& g) {
    t += 1;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    auto update = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
        mom = beta1 * mom + (1.0 - beta1) * grad;
        vel = beta2 * vel + (1.0 - beta2) * grad.cwiseProduct(grad);
        param.array() -=
            lr * (mom.array() / bc1) / ((vel.array() / bc2).sqrt() + eps);
    };
    for (int k = 0; k < net.n_layers(); ++k) {
        update(net.W[k], m.W[k], v.W[k], g.W[k]);
        update(net.b[k], m.b[k], v.b[k], g.b[k]);
    }
    if (net.null_token.size() > 0) {
        update(net.null_token, m.null_token, v.null_token, g.null_token);
    }
}

}  // namespace ndm
