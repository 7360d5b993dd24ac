#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ndm/bundle.hpp"

namespace ndm {

// Frechet distance between Gaussian fits of two feature sets:
// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^1/2), matrix square roots via
// symmetric eigendecomposition with negative eigenvalues clipped at 0.
// Covariances are regularized by +1e-6 I. Requires N, M > D and D <= 64.
double frechet_distance(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);

struct FlopsReport {
    std::vector<double> per_level;  // 1-based multiply-adds per denoising step
    double total = 0.0;
    double baseline_l1 = 0.0;  // equivalent single-level configuration
    double ratio = 0.0;
};

// Dense layer of shape a x b counts a*b multiply-adds per forward pass.
FlopsReport count_flops(const NestedConfig& cfg);
FlopsReport count_flops(const ModelBundle& bundle);

// Frozen whole-image PCA used for every generation metric, fit on the
// reference data so that bundles with different depths or encoders are
// measured in the same feature space.
EncoderModel fit_metric_encoder(const Dataset& data, int d);
Eigen::MatrixXd metric_features(const EncoderModel& metric_enc,
                                const std::vector<Eigen::MatrixXd>& images);

struct MetricsRecord {
    std::string run_id;
    int n_samples = 0;
    double toy_fd = 0.0;
    double knn_top1 = 0.0;  // combined (shape, texture) labels
    double knn_top5 = 0.0;
    double knn_global_top1 = 0.0;
    FlopsReport flops;
    std::vector<double> capacity_nats;       // per level 2..L; <0 marks sigma=0
    std::vector<double> resample_distance;   // mean feature distance at k = 1..L
    nlohmann::json config_snapshot;

    nlohmann::json to_json() const;
    static MetricsRecord from_json(const nlohmann::json& j);
};

// Generates n_samples, compares their features against the reference data,
// and fills in KNN quality, per-level capacity, resampling distances and
// the flops accounting.
MetricsRecord eval_run(const ModelBundle& bundle, const Dataset& data, int n_samples,
                       Rng& rng, int threads = 1, const std::string& run_id = "run");

}  // namespace ndm
