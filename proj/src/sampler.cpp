#include "ndm/sampler.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ndm {

NoisePredictor net_predictor(const DenoiserNet& net, const NoiseSchedule& s) {
    return [&net, &s](const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd* cond) {
        return predict_noise(net, z_t, t, cond, s);
    };
}

NoisePredictor oracle_predictor(const OracleIndex& idx, int l) {
    return [&idx, l](const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd* cond) {
        if (cond == nullptr) {
            return oracle_eps(idx, l, z_t, t, nullptr);
        }
        std::vector<Eigen::VectorXd> split;
        int off = 0;
        for (int m = l + 1; m <= idx.L; ++m) {
            const int dm = static_cast<int>(idx.latents[m].cols());
            split.push_back(cond->segment(off, dm));
            off += dm;
        }
        if (off != cond->size()) {
            throw std::invalid_argument("oracle_predictor: condition size mismatch");
        }
        return oracle_eps(idx, l, z_t, t, &split);
    };
}

Eigen::VectorXd sample_level(const NoisePredictor& predict, int dim,
                             const NoiseSchedule& s, const LevelConditioning* cond,
                             double w, double gamma, Rng& rng,
                             std::vector<Eigen::VectorXd>* cond_noise_out, double z0_clip) {
    const int n_upper = cond ? static_cast<int>(cond->uppers.size()) : 0;
    std::vector<Eigen::VectorXd> cond_eps(n_upper);
    int cond_total = 0;
    for (int m = 0; m < n_upper; ++m) {
        cond_eps[m] = rng.normal_vec(static_cast<int>(cond->uppers[m].size()));
        cond_total += static_cast<int>(cond->uppers[m].size());
    }
    if (cond_noise_out) *cond_noise_out = cond_eps;

    Eigen::VectorXd z = rng.normal_vec(dim);
    Eigen::VectorXd cond_t(cond_total);
    for (int t = s.T; t >= 1; --t) {
        const Eigen::VectorXd* cond_ptr = nullptr;
        if (cond) {
            int off = 0;
            for (int m = 0; m < n_upper; ++m) {
                const double scale = generation_noise_scale(cond->sigmas[m], t, s.T, gamma);
                const int dm = static_cast<int>(cond->uppers[m].size());
                cond_t.segment(off, dm) = cond->uppers[m] + scale * cond_eps[m];
                off += dm;
            }
            cond_ptr = &cond_t;
        }

        Eigen::VectorXd eps_hat;
        if (cond_ptr != nullptr && w != 0.0) {
            eps_hat = cfg_combine(predict(z, t, cond_ptr), predict(z, t, nullptr), w);
        } else {
            eps_hat = predict(z, t, cond_ptr);
        }

        Eigen::VectorXd z0_hat = (z - s.beta[t] * eps_hat) / s.alpha[t];
        if (std::isfinite(z0_clip)) {
            z0_hat = z0_hat.cwiseMax(-z0_clip).cwiseMin(z0_clip);
        }
        const PosteriorParams p = posterior_params(s, z0_hat, z, t);
        if (p.variance > 0.0) {
            z = p.mean + std::sqrt(p.variance) * rng.normal_vec(dim);
        } else {
            z = p.mean;
        }
    }
    return z;
}

Eigen::MatrixXd SampleTrace::image() const {
    Eigen::MatrixXd img(height, width);
    int k = 0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img(y, x) = z[1][k++];
        }
    }
    return img;
}

namespace {

// re-samples levels start_level..1 of a trace whose upper part is filled in
void run_levels(const ModelBundle& bundle, SampleTrace& trace, int start_level,
                Rng& trace_rng) {
    const NestedConfig& cfg = bundle.config;
    for (int l = start_level; l >= 1; --l) {
        trace.level_seeds[l] = trace_rng.next_u64();
    }
    for (int l = start_level; l >= 1; --l) {
        LevelConditioning cond;
        for (int m = l + 1; m <= cfg.levels; ++m) {
            cond.uppers.push_back(trace.z[m]);
            cond.sigmas.push_back(bundle.sigma_for(m));
        }
        Rng level_rng(trace.level_seeds[l]);
        const double w = trace.cfg_weights[l - 1];
        trace.z[l] = sample_level(net_predictor(bundle.nets[l], bundle.schedule), level_dim(cfg, l),
                                  bundle.schedule, cond.uppers.empty() ? nullptr : &cond, w,
                                  trace.gamma, level_rng, &trace.cond_noise[l],
                                  bundle.z0_clip[l]);
        trace.inherited[l] = 0;
    }
}

SampleTrace empty_trace(const ModelBundle& bundle, double gamma,
                        const std::vector<double>& weights) {
    const NestedConfig& cfg = bundle.config;
    if (static_cast<int>(weights.size()) != cfg.levels) {
        throw std::invalid_argument("sample: need one CFG weight per level");
    }
    SampleTrace trace;
    trace.L = cfg.levels;
    trace.height = cfg.height;
    trace.width = cfg.width;
    trace.gamma = gamma;
    trace.cfg_weights = weights;
    trace.z.resize(cfg.levels + 1);
    trace.level_seeds.assign(cfg.levels + 1, 0);
    trace.cond_noise.resize(cfg.levels + 1);
    trace.inherited.assign(cfg.levels + 1, 1);
    return trace;
}

}  // namespace

SampleTrace sample_trace(const ModelBundle& bundle, uint64_t trace_seed, double gamma,
                         const std::vector<double>& cfg_weights) {
    SampleTrace trace = empty_trace(bundle, gamma, cfg_weights);
    Rng trng(trace_seed);
    run_levels(bundle, trace, bundle.config.levels, trng);
    return trace;
}

std::vector<SampleTrace> sample_hierarchy(const ModelBundle& bundle, int n, Rng& rng,
                                          double gamma,
                                          const std::vector<double>& cfg_weights,
                                          int threads) {
    std::vector<uint64_t> seeds(n);
    for (int i = 0; i < n; ++i) seeds[i] = rng.next_u64();

    std::vector<SampleTrace> traces(n);
    const int workers = std::max(1, std::min(threads, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) {
            traces[i] = sample_trace(bundle, seeds[i], gamma, cfg_weights);
        }
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int wkr = 0; wkr < workers; ++wkr) {
            pool.emplace_back([&] {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= n) return;
                    traces[i] = sample_trace(bundle, seeds[i], gamma, cfg_weights);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return traces;
}

std::vector<SampleTrace> sample_hierarchy(const ModelBundle& bundle, int n, Rng& rng,
                                          int threads) {
    const double gamma = resolve_gamma(bundle.config.gamma, bundle.config.cfg_weights);
    return sample_hierarchy(bundle, n, rng, gamma, bundle.config.cfg_weights, threads);
}

SampleTrace resample_from_level(const ModelBundle& bundle, const SampleTrace& source,
                                int k, Rng& rng, double gamma,
                                const std::vector<double>& cfg_weights) {
    const int L = bundle.config.levels;
    if (k < 0 || k > L) throw std::invalid_argument("resample_from_level: k out of range");
    if (source.L != L) throw std::invalid_argument("resample_from_level: trace level mismatch");
    SampleTrace trace = empty_trace(bundle, gamma, cfg_weights);
    for (int l = 1; l <= L; ++l) {
        trace.z[l] = source.z[l];
    }
    if (k == 0) return trace;
    Rng trng(rng.next_u64());
    run_levels(bundle, trace, k, trng);
    return trace;
}

SampleTrace resample_from_level(const ModelBundle& bundle, const Eigen::MatrixXd& source,
                                int k, Rng& rng, double gamma,
                                const std::vector<double>& cfg_weights) {
    const LatentHierarchy h = build_hierarchy(bundle.encoder, source, bundle.config);
    SampleTrace as_trace = [&] {
        SampleTrace t = {};
        t.L = bundle.config.levels;
        t.height = bundle.config.height;
        t.width = bundle.config.width;
        t.cfg_weights = cfg_weights;
        t.z.resize(t.L + 1);
        for (int l = 1; l <= t.L; ++l) t.z[l] = h.z[l];
        t.level_seeds.assign(t.L + 1, 0);
        t.cond_noise.resize(t.L + 1);
        t.inherited.assign(t.L + 1, 1);
        return t;
    }();
    return resample_from_level(bundle, as_trace, k, rng, gamma, cfg_weights);
}

SampleTrace resample_from_level(const ModelBundle& bundle, const SampleTrace& source,
                                int k, Rng& rng) {
    const double gamma = resolve_gamma(bundle.config.gamma, bundle.config.cfg_weights);
    return resample_from_level(bundle, source, k, rng, gamma, bundle.config.cfg_weights);
}

SampleTrace resample_from_level(const ModelBundle& bundle, const Eigen::MatrixXd& source,
                                int k, Rng& rng) {
    const double gamma = resolve_gamma(bundle.config.gamma, bundle.config.cfg_weights);
    return resample_from_level(bundle, source, k, rng, gamma, bundle.config.cfg_weights);
}

}  // namespace ndm
