#include "ndm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "ndm/sampler.hpp"

using json = nlohmann::json;

namespace ndm {

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(x.rows());
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
    cov += 1e-6 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
    return cov;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const int d = static_cast<int>(a.cols());
    if (d < 1 || d > 64 || b.cols() != d) {
        throw std::invalid_argument("frechet_distance: bad feature dimension");
    }
    if (a.rows() <= d || b.rows() <= d) {
        throw std::invalid_argument("frechet_distance: need more samples than dimensions");
    }
    const Eigen::RowVectorXd mu_a = a.colwise().mean();
    const Eigen::RowVectorXd mu_b = b.colwise().mean();
    const Eigen::MatrixXd ca = covariance(a);
    const Eigen::MatrixXd cb = covariance(b);

    const Eigen::MatrixXd sa = sqrt_psd(ca);
    const Eigen::MatrixXd inner = sa * cb * sa;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()));
    const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double fd =
        (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, fd);
}

namespace {

double net_flops(const NestedConfig& cfg, int l) {
    const int in = level_dim(cfg, l) + cfg.time_dim + cond_dim(cfg, l);
    std::vector<int> widths;
    widths.push_back(in);
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(level_dim(cfg, l));
    double total = 0.0;
    for (size_t k = 0; k + 1 < widths.size(); ++k) {
        total += static_cast<double>(widths[k]) * widths[k + 1];
    }
    return total;
}

}  // namespace

FlopsReport count_flops(const NestedConfig& cfg) {
    FlopsReport r;
    r.per_level.assign(cfg.levels + 1, 0.0);
    for (int l = 1; l <= cfg.levels; ++l) {
        r.per_level[l] = net_flops(cfg, l);
        r.total += r.per_level[l];
    }
    NestedConfig base = cfg;
    base.levels = 1;
    base.sigma.clear();
    base.cfg_weights.clear();
    base.steps_per_level.clear();
    r.baseline_l1 = net_flops(base, 1);
    r.ratio = r.total / r.baseline_l1;
    return r;
}

FlopsReport count_flops(const ModelBundle& bundle) { return count_flops(bundle.config); }

EncoderModel fit_metric_encoder(const Dataset& data, int d) {
    return fit_encoder(data, 2, d, derive_seed(data.seed, "metric-encoder"));
}

Eigen::MatrixXd metric_features(const EncoderModel& metric_enc,
                                const std::vector<Eigen::MatrixXd>& images) {
    Eigen::MatrixXd feats(static_cast<int>(images.size()), metric_enc.d);
    for (size_t i = 0; i < images.size(); ++i) {
        feats.row(static_cast<int>(i)) = encode_level(metric_enc, images[i], 2, 2).row(0);
    }
    return feats;
}

json MetricsRecord::to_json() const {
    json j;
    j["run_id"] = run_id;
    j["n_samples"] = n_samples;
    j["toy_fd"] = toy_fd;
    j["knn_top1"] = knn_top1;
    j["knn_top5"] = knn_top5;
    j["knn_global_top1"] = knn_global_top1;
    j["flops_per_level"] = std::vector<double>(flops.per_level.begin() + 1, flops.per_level.end());
    j["flops_total"] = flops.total;
    j["flops_baseline_l1"] = flops.baseline_l1;
    j["flops_ratio"] = flops.ratio;
    json caps = json::array();
    for (double c : capacity_nats) {
        if (c < 0.0) {
            caps.push_back(nullptr);  // sigma = 0, unbounded capacity
        } else {
            caps.push_back(c);
        }
    }
    j["capacity_nats"] = caps;
    j["resample_distance"] = resample_distance;
    j["config"] = config_snapshot;
    return j;
}

MetricsRecord MetricsRecord::from_json(const json& j) {
    MetricsRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.n_samples = j.at("n_samples").get<int>();
    r.toy_fd = j.at("toy_fd").get<double>();
    r.knn_top1 = j.at("knn_top1").get<double>();
    r.knn_top5 = j.at("knn_top5").get<double>();
    r.knn_global_top1 = j.at("knn_global_top1").get<double>();
    r.flops.per_level.assign(1, 0.0);
    for (double v : j.at("flops_per_level")) r.flops.per_level.push_back(v);
    r.flops.total = j.at("flops_total").get<double>();
    r.flops.baseline_l1 = j.at("flops_baseline_l1").get<double>();
    r.flops.ratio = j.at("flops_ratio").get<double>();
    for (const auto& c : j.at("capacity_nats")) {
        r.capacity_nats.push_back(c.is_null() ? -1.0 : c.get<double>());
    }
    r.resample_distance = j.at("resample_distance").get<std::vector<double>>();
    r.config_snapshot = j.at("config");
    return r;
}

MetricsRecord eval_run(const ModelBundle& bundle, const Dataset& data, int n_samples,
                       Rng& rng, int threads, const std::string& run_id) {
    const NestedConfig& cfg = bundle.config;
    if (n_samples <= cfg.d) {
        throw std::invalid_argument("eval_run: need n_samples > d for the Frechet fit");
    }
    MetricsRecord rec;
    rec.run_id = run_id;
    rec.n_samples = n_samples;
    rec.config_snapshot = cfg.to_json();
    rec.flops = count_flops(cfg);

    const EncoderModel metric_enc = fit_metric_encoder(data, cfg.d);
    const Eigen::MatrixXd real_feats = metric_features(metric_enc, data.images);

    // generation quality
    const auto traces = sample_hierarchy(bundle, n_samples, rng, threads);
    std::vector<Eigen::MatrixXd> generated;
    generated.reserve(traces.size());
    for (const auto& t : traces) generated.push_back(t.image());
    rec.toy_fd = frechet_distance(real_feats, metric_features(metric_enc, generated));

    // feature quality of the bundle's own encoder (metric encoder for L = 1);
    // whole-image features either way
    const EncoderModel& knn_enc = bundle.encoder.fitted ? bundle.encoder : metric_enc;
    Eigen::MatrixXd knn_feats(data.size(), cfg.d);
    for (int i = 0; i < data.size(); ++i) {
        knn_feats.row(i) = encode_level(knn_enc, data.images[i], 2, 2).row(0);
    }
    std::vector<int> combined(data.size());
    for (int i = 0; i < data.size(); ++i) combined[i] = data.combined_label(i);
    const int K = std::min(20, data.size() - 1);
    const KnnResult knn = knn_accuracy(knn_feats, combined, K);
    rec.knn_top1 = knn.top1;
    rec.knn_top5 = knn.top5;
    rec.knn_global_top1 = knn_accuracy(knn_feats, data.global_labels, K).top1;

    // capacity of each conditioning level at its training noise
    if (cfg.levels > 1) {
        const auto latents = all_level_latents(bundle.encoder, data, cfg);
        for (int l = 2; l <= cfg.levels; ++l) {
            const double sigma = bundle.sigma_for(l);
            if (sigma <= 0.0) {
                rec.capacity_nats.push_back(-1.0);
                continue;
            }
            double acc = 0.0;
            for (int i = 0; i < data.size(); ++i) {
                acc += capacity_kl(latents[l].row(i).transpose(), sigma);
            }
            rec.capacity_nats.push_back(acc / data.size());
        }
    }

    // resampling fidelity: feature distance to the source per depth k
    const int n_src = std::min(64, data.size());
    rec.resample_distance.assign(cfg.levels, 0.0);
    for (int k = 1; k <= cfg.levels; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n_src; ++i) {
            const SampleTrace t = resample_from_level(bundle, data.images[i], k, rng);
            const Eigen::MatrixXd gen = t.image();
            const Eigen::MatrixXd fa = metric_features(metric_enc, {data.images[i]});
            const Eigen::MatrixXd fb = metric_features(metric_enc, {gen});
            acc += (fa.row(0) - fb.row(0)).norm();
        }
        rec.resample_distance[k - 1] = acc / n_src;
    }
    return rec;
}

}  // namespace ndm
