#include "ndm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ndm {

void train_level_latents(ModelBundle& bundle, int l,
                         const std::vector<Eigen::MatrixXd>& latents, int steps, Rng& rng) {
    const NestedConfig& cfg = bundle.config;
    DenoiserNet& net = bundle.nets[l];
    const int n = static_cast<int>(latents[l].rows());
    if (n == 0) throw std::invalid_argument("train_level: empty dataset");
    const int B = std::min(cfg.batch_size, n);
    bundle.z0_clip[l] = 1.25 * latents[l].cwiseAbs().maxCoeff();

    Adam opt(net, cfg.lr);
    NetGrads grads = zero_grads(net);
    Eigen::MatrixXd batch(B, net.input_dim);
    Eigen::MatrixXd conds(B, net.cond_dim);

    const auto start = std::chrono::steady_clock::now();
    for (int step = 0; step < steps; ++step) {
        for (int i = 0; i < B; ++i) {
            const int idx = static_cast<int>(rng.uniform_below(n));
            batch.row(i) = latents[l].row(idx);
            int off = 0;
            for (int m = l + 1; m <= cfg.levels; ++m) {
                const int dm = static_cast<int>(latents[m].cols());
                const double sm = bundle.sigma_for(m);
                for (int j = 0; j < dm; ++j) {
                    conds(i, off + j) = latents[m](idx, j) + sm * rng.normal();
                }
                off += dm;
            }
        }
        const double loss =
            loss_and_grads(net, batch, conds, bundle.schedule, rng, cfg.null_drop_prob, grads);
        opt.step(net, grads);

        const double wall_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - start)
                                   .count();
        bundle.log.push_back({l, step, loss, wall_ms});
    }
}

void train_level(ModelBundle& bundle, int l, const Dataset& data, Rng& rng) {
    if (l < 1 || l > bundle.config.levels) {
        throw std::invalid_argument("train_level: level out of range");
    }
    const auto latents = all_level_latents(bundle.encoder, data, bundle.config);
    train_level_latents(bundle, l, latents, bundle.config.steps_for_level(l), rng);
}

ModelBundle train_nested(const NestedConfig& cfg, const Dataset& data,
                         const ModelBundle* reuse) {
    NestedConfig c = cfg;
    if (c.sigma.empty()) c.sigma.assign(std::max(0, c.levels - 1), 0.5);
    if (c.cfg_weights.empty()) c.cfg_weights.assign(c.levels, 0.0);
    c.validate();

    EncoderModel enc;
    if (c.levels > 1) {
        enc = fit_encoder(data, c.levels, c.d, derive_seed(c.seed, "encoder"));
    }
    ModelBundle bundle = init_bundle(c, enc);

    int lowest_trained = c.levels;
    if (reuse != nullptr) {
        const NestedConfig& dc = reuse->config;
        if (dc.levels != c.levels - 1) {
            throw std::invalid_argument("train_nested: reuse bundle must have L-1 levels");
        }
        if (dc.d != c.d || dc.T != c.T || dc.schedule != c.schedule ||
            dc.height != c.height || dc.width != c.width || dc.hidden != c.hidden ||
            dc.time_dim != c.time_dim) {
            throw std::invalid_argument("train_nested: reuse bundle shape mismatch");
        }
        // donor level m becomes level m+1; the fixed upper-shape schedule
        // makes input and condition dims line up exactly
        for (int m = 2; m <= dc.levels; ++m) {
            const DenoiserNet& donor = reuse->nets[m];
            DenoiserNet& dst = bundle.nets[m + 1];
            if (donor.input_dim != dst.input_dim || donor.cond_dim != dst.cond_dim) {
                throw std::invalid_argument("train_nested: donor net shape mismatch");
            }
            const int level = dst.level;
            dst = donor;
            dst.level = level;
            // retained noise levels ride along with the reused nets
            bundle.config.sigma[m + 1 - 2] = dc.sigma[m - 2];
        }
        lowest_trained = std::min(2, c.levels);
    }

    const auto latents = all_level_latents(bundle.encoder.fitted ? bundle.encoder : enc,
                                           data, bundle.config);
    for (int l = 1; l <= lowest_trained; ++l) {
        Rng rng(derive_seed(c.seed, "train", static_cast<uint64_t>(l)));
        train_level_latents(bundle, l, latents, bundle.config.steps_for_level(l), rng);
    }
    return bundle;
}

ElboReport estimate_elbo(const ModelBundle& bundle, const Eigen::MatrixXd& image,
                         int n_mc, Rng& rng) {
    if (n_mc < 1) throw std::invalid_argument("estimate_elbo: n_mc >= 1 required");
    const NestedConfig& cfg = bundle.config;
    const NoiseSchedule& s = bundle.schedule;
    const LatentHierarchy h = build_hierarchy(bundle.encoder, image, cfg);

    ElboReport report;
    report.diffusion_nats.assign(cfg.levels + 1, 0.0);
    report.prior_nats.assign(cfg.levels + 1, 0.0);

    for (int l = 1; l <= cfg.levels; ++l) {
        const Eigen::VectorXd& z = h.z[l];
        const int d = static_cast<int>(z.size());
        double acc = 0.0;
        for (int k = 0; k < n_mc; ++k) {
            const int t = 1 + static_cast<int>(rng.uniform_below(s.T));
            const Eigen::VectorXd eps = rng.normal_vec(d);
            const Eigen::VectorXd z_t = s.alpha[t] * z + s.beta[t] * eps;

            Eigen::VectorXd cond(cond_dim(cfg, l));
            int off = 0;
            for (int m = l + 1; m <= cfg.levels; ++m) {
                const int dm = h.dim(m);
                cond.segment(off, dm) = inject_noise(h.z[m], h.sigma[m], rng);
                off += dm;
            }
            const Eigen::VectorXd eps_hat = predict_noise(
                bundle.nets[l], z_t, t, cond.size() > 0 ? &cond : nullptr, s);

            double term;
            if (t == 1) {
                // deterministic final step: unit-variance reconstruction
                const Eigen::VectorXd z0_hat = (z_t - s.beta[1] * eps_hat) / s.alpha[1];
                term = 0.5 * (z - z0_hat).squaredNorm();
            } else {
                const double r = s.alpha[t] / s.alpha[t - 1];
                const double var_t = s.beta[t] * s.beta[t];
                const double var_prev = s.beta[t - 1] * s.beta[t - 1];
                const double coef0 = s.alpha[t - 1] * (1.0 - r * r) / var_t;
                const double post_var = (1.0 - r * r) * var_prev / var_t;
                const double weight =
                    coef0 * coef0 * var_t / (2.0 * post_var * s.alpha[t] * s.alpha[t]);
                term = weight * (eps - eps_hat).squaredNorm();
            }
            acc += s.T * term;  // t drawn uniformly; estimator of the sum over t
        }
        report.diffusion_nats[l] = acc / n_mc;

        // KL( N(alpha_T z, beta_T^2 I) || N(0, I) )
        const double aT = s.alpha[s.T];
        const double bT = s.beta[s.T];
        report.prior_nats[l] =
            0.5 * (aT * aT * z.squaredNorm() + d * (bT * bT - 1.0 - 2.0 * std::log(bT)));
        report.total += report.diffusion_nats[l] + report.prior_nats[l];
    }
    return report;
}

}  // namespace ndm
