#include "ndm/bundle.hpp"

#include <limits>
#include <stdexcept>

namespace ndm {

ModelBundle init_bundle(const NestedConfig& cfg, const EncoderModel& enc) {
    NestedConfig c = cfg;
    if (c.sigma.empty()) c.sigma.assign(std::max(0, c.levels - 1), 0.5);
    if (c.cfg_weights.empty()) c.cfg_weights.assign(c.levels, 0.0);
    c.validate();
    if (c.levels > 1) {
        if (!enc.fitted) throw std::invalid_argument("init_bundle: encoder not fitted");
        if (enc.image_h != c.height || enc.image_w != c.width || enc.d != c.d) {
            throw std::invalid_argument("init_bundle: encoder/config mismatch");
        }
    }

    ModelBundle b;
    b.config = c;
    b.encoder = enc;
    b.schedule = make_schedule(c.schedule, c.T);
    b.z0_clip.assign(c.levels + 1, std::numeric_limits<double>::infinity());
    b.nets.resize(c.levels + 1);
    for (int l = 1; l <= c.levels; ++l) {
        b.nets[l] = make_denoiser(l, level_dim(c, l), cond_dim(c, l), c.time_dim, c.hidden,
                                  derive_seed(c.seed, "init"));
    }
    return b;
}

std::vector<Eigen::MatrixXd> all_level_latents(const EncoderModel& enc, const Dataset& data,
                                               const NestedConfig& cfg) {
    const int n = data.size();
    if (n == 0) throw std::invalid_argument("level_latents: empty dataset");
    std::vector<Eigen::MatrixXd> out(cfg.levels + 1);
    for (int l = 1; l <= cfg.levels; ++l) {
        out[l].resize(n, level_dim(cfg, l));
    }
    for (int i = 0; i < n; ++i) {
        const LatentHierarchy h = build_hierarchy(enc, data.images[i], cfg);
        for (int l = 1; l <= cfg.levels; ++l) {
            out[l].row(i) = h.z[l].transpose();
        }
    }
    return out;
}

Eigen::MatrixXd level_latents(const EncoderModel& enc, const Dataset& data, int l,
                              const NestedConfig& cfg) {
    return all_level_latents(enc, data, cfg)[l];
}

}  // namespace ndm
