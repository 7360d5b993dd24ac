#pragma once

#include <vector>

#include "ndm/denoiser.hpp"
#include "ndm/encoder.hpp"
#include "ndm/hierarchy.hpp"
#include "ndm/schedule.hpp"

namespace ndm {

struct TrainLogRow {
    int level = 0;
    int step = 0;
    double loss = 0.0;
    double wall_ms = 0.0;
};

// L trained denoisers + encoder + schedule + config: the unit of
// checkpointing and sampling.
struct ModelBundle {
    NestedConfig config;
    EncoderModel encoder;
    std::vector<DenoiserNet> nets;  // 1-based; nets[0] unused
    NoiseSchedule schedule;
    // per-level bound for the denoised estimate during sampling, set from
    // the training latents (ancestral chains diverge without it while the
    // net is inaccurate); +inf until a level has been trained
    std::vector<double> z0_clip;
    std::vector<TrainLogRow> log;

    int levels() const { return config.levels; }
    double sigma_for(int l) const { return config.sigma[l - 2]; }  // l >= 2
};

// Untrained bundle with freshly initialized nets matching the shape law.
ModelBundle init_bundle(const NestedConfig& cfg, const EncoderModel& enc);

// N x dim_l matrix of frozen latents for every dataset item.
Eigen::MatrixXd level_latents(const EncoderModel& enc, const Dataset& data, int l,
                              const NestedConfig& cfg);

// All levels in one pass; result is 1-based ([0] empty).
std::vector<Eigen::MatrixXd> all_level_latents(const EncoderModel& enc, const Dataset& data,
                                               const NestedConfig& cfg);

}  // namespace ndm
