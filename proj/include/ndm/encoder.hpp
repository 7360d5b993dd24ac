#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ndm/dataset.hpp"

namespace ndm {

// One PCA projection shared by all patches at a given scale.
struct ScaleProjection {
    int patches_per_side = 1;  // M
    Eigen::VectorXd mean;      // patch_dim
    Eigen::MatrixXd basis;     // retained x patch_dim, orthonormal rows
    double feature_scale = 1.0;  // rescales coefficients to ~unit variance
};

// Frozen patch-PCA feature extractor with per-scale SVD channel reduction.
// Stand-in for a pre-trained visual encoder: frozen, deterministic, and
// with channels ordered by explained variance.
struct EncoderModel {
    int image_h = 0;
    int image_w = 0;
    int d = 32;  // channels kept for a whole-image (M = 1) encoding
    uint64_t fit_seed = 0;
    std::vector<ScaleProjection> scales;  // M = 1 .. L-1
    bool fitted = false;

    const ScaleProjection& scale(int M) const;
};

// Non-overlapping square patches in row-major order; concatenating them
// back reproduces the image exactly.
std::vector<Eigen::MatrixXd> patchify(const Eigen::MatrixXd& image, int M);
Eigen::MatrixXd unpatchify(const std::vector<Eigen::MatrixXd>& patches, int M);

// Fits one centered PCA per scale M in {1 .. L-1} over all patches at that
// scale, keeping the top d/M directions. Deterministic: eigen-directions
// get a fixed sign (largest-magnitude component positive).
EncoderModel fit_encoder(const Dataset& data, int L, int d, uint64_t seed);

// Same shapes, means and normalization policy, but random orthonormal
// bases; degrades feature quality on purpose (baseline for the
// feature-quality comparison).
EncoderModel scramble_encoder(const EncoderModel& enc, const Dataset& data, uint64_t seed);

// z_l for 2 <= l <= L: (L-l+1)^2 patches x d/(L-l+1) channels.
Eigen::MatrixXd encode_level(const EncoderModel& enc, const Eigen::MatrixXd& image,
                             int l, int L);

// Inverse of encode_level up to the discarded channels; used by tests and
// the reconstruction-error diagnostics.
Eigen::MatrixXd decode_level(const EncoderModel& enc, const Eigen::MatrixXd& coeffs,
                             int l, int L);

struct KnnResult {
    double top1 = 0.0;
    double top5 = 0.0;
};

// Leave-one-out KNN vote by Euclidean distance; ties in distance broken by
// smaller index, vote ties by smaller class id. top5 counts the true label
// among the 5 most-voted classes.
KnnResult knn_accuracy(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       int K);

}  // namespace ndm
