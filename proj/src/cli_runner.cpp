#include "ndm/cli_runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ndm/checkpoint.hpp"
#include "ndm/eval.hpp"
#include "ndm/image_io.hpp"
#include "ndm/oracle.hpp"
#include "ndm/sampler.hpp"
#include "ndm/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ndm {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::optional<double> parse_gamma(const std::string& s) {
    if (s.empty() || s == "auto") return std::nullopt;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

std::vector<double> parse_weights(const std::string& s, int levels,
                                  const std::vector<double>& fallback) {
    if (s.empty()) return fallback;
    const auto parts = split_csv(s);
    if (parts.size() == 1) {
        return std::vector<double>(levels, std::stod(parts[0]));
    }
    if (static_cast<int>(parts.size()) != levels) {
        throw std::invalid_argument("cfg weights: need 1 value or one per level");
    }
    std::vector<double> w;
    for (const auto& p : parts) w.push_back(std::stod(p));
    return w;
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << text;
    }
    fs::rename(tmp, path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void run_gen_data(const GenDataOpts& o) {
    DatasetSpec spec;
    spec.n_images = o.n_images;
    spec.image_size = o.image_size;
    spec.seed = o.seed;
    spec.split = o.split;
    if (!o.shapes.empty()) spec.global_classes = split_csv(o.shapes);
    if (!o.textures.empty()) spec.texture_classes = split_csv(o.textures);
    const Dataset data = gen_dataset(spec);
    save_dataset(data, o.out_dir);
    std::cout << "wrote " << data.size() << " images to " << o.out_dir << "\n";
}

void run_fit_encoder(const FitEncoderOpts& o) {
    const Dataset data = load_dataset(o.data_dir);
    EncoderModel enc = fit_encoder(data, o.levels, o.d, o.seed);
    if (o.scramble) {
        enc = scramble_encoder(enc, data, o.seed);
    }
    save_checkpoint(encoder_to_checkpoint(enc), o.out_path);
    std::cout << "fit encoder with " << enc.scales.size() << " scale(s) -> " << o.out_path
              << "\n";
}

void run_train(const TrainOpts& o) {
    const Dataset data = load_dataset(o.data_dir);

    NestedConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw std::runtime_error("cannot open config " + o.config_path);
        cfg = NestedConfig::from_json(json::parse(in));
    }
    if (o.levels) cfg.levels = *o.levels;
    if (o.seed) cfg.seed = *o.seed;
    if (o.steps) cfg.steps = *o.steps;
    if (o.levels || cfg.sigma.empty()) {
        cfg.sigma.assign(std::max(0, cfg.levels - 1), 0.5);
    }
    if (o.sigma) cfg.sigma.assign(std::max(0, cfg.levels - 1), *o.sigma);
    if (o.levels || cfg.cfg_weights.empty()) {
        cfg.cfg_weights.assign(cfg.levels, 0.0);
    }
    cfg.height = data.height();
    cfg.width = data.width();
    cfg.validate();

    ModelBundle bundle;
    if (!o.reuse_path.empty()) {
        const ModelBundle donor = bundle_from_checkpoint(load_checkpoint(o.reuse_path));
        bundle = train_nested(cfg, data, &donor);
    } else if (o.scramble_encoder && cfg.levels > 1) {
        // feature-quality baseline: same pipeline behind a scrambled basis
        EncoderModel enc = fit_encoder(data, cfg.levels, cfg.d, derive_seed(cfg.seed, "encoder"));
        enc = scramble_encoder(enc, data, derive_seed(cfg.seed, "encoder"));
        ModelBundle b = init_bundle(cfg, enc);
        const auto latents = all_level_latents(enc, data, cfg);
        for (int l = 1; l <= cfg.levels; ++l) {
            Rng rng(derive_seed(cfg.seed, "train", static_cast<uint64_t>(l)));
            train_level_latents(b, l, latents, cfg.steps_for_level(l), rng);
        }
        bundle = std::move(b);
    } else {
        bundle = train_nested(cfg, data, nullptr);
    }

    save_checkpoint(bundle_to_checkpoint(bundle), o.out_path);

    const std::string run_dir = o.run_dir.empty() ? o.out_path + ".run" : o.run_dir;
    fs::create_directories(run_dir);
    write_text_atomic(run_dir + "/resolved_config.json",
                      bundle.config.to_json().dump(2) + "\n");
    std::string csv = "step,level,loss,wall_ms\n";
    for (const auto& row : bundle.log) {
        csv += std::to_string(row.step) + "," + std::to_string(row.level) + "," +
               format_double(row.loss) + "," + format_double(row.wall_ms) + "\n";
    }
    write_text_atomic(run_dir + "/train_log.csv", csv);
    std::cout << "trained " << bundle.levels() << " level(s) -> " << o.out_path << "\n";
}

void run_sample(const SampleOpts& o) {
    const ModelBundle bundle = bundle_from_checkpoint(load_checkpoint(o.ckpt));
    const auto gamma_opt = parse_gamma(o.gamma);
    const std::vector<double> weights =
        parse_weights(o.cfg, bundle.levels(), bundle.config.cfg_weights);
    const double gamma = gamma_opt ? *gamma_opt : resolve_gamma(bundle.config.gamma, weights);

    Rng rng(derive_seed(o.seed, "sample"));
    const auto traces = sample_hierarchy(bundle, o.n, rng, gamma, weights, o.threads);

    fs::create_directories(o.out_dir);
    std::vector<Eigen::MatrixXd> images;
    for (const auto& t : traces) images.push_back(t.image());
    write_png_gray(o.out_dir + "/grid.png", tile_grid(images));
    if (o.traces) {
        for (size_t i = 0; i < traces.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%04zu.trace", i);
            save_checkpoint(trace_to_checkpoint(traces[i]), o.out_dir + "/" + name);
        }
    }
    json resolved;
    resolved["n"] = o.n;
    resolved["seed"] = o.seed;
    resolved["gamma"] = std::isinf(gamma) ? json("inf") : json(gamma);
    resolved["cfg_weights"] = weights;
    write_text_atomic(o.out_dir + "/sample_config.json", resolved.dump(2) + "\n");
    std::cout << "wrote " << o.n << " samples to " << o.out_dir << "\n";
}

void run_resample(const ResampleOpts& o) {
    const ModelBundle bundle = bundle_from_checkpoint(load_checkpoint(o.ckpt));
    const auto gamma_opt = parse_gamma(o.gamma);
    const std::vector<double> weights =
        parse_weights(o.cfg, bundle.levels(), bundle.config.cfg_weights);
    const double gamma = gamma_opt ? *gamma_opt : resolve_gamma(bundle.config.gamma, weights);

    Eigen::MatrixXd source_image;
    std::optional<SampleTrace> source_trace;
    if (fs::is_directory(o.source)) {
        const Dataset data = load_dataset(o.source);
        if (o.index < 0 || o.index >= data.size()) {
            throw std::runtime_error("resample: image index out of range");
        }
        source_image = data.images[o.index];
    } else {
        source_trace = trace_from_checkpoint(load_checkpoint(o.source));
        source_image = source_trace->image();
    }

    Rng rng(derive_seed(o.seed, "resample"));
    std::vector<Eigen::MatrixXd> images = {source_image};
    fs::create_directories(o.out_dir);
    for (int i = 0; i < o.n; ++i) {
        const SampleTrace t =
            source_trace
                ? resample_from_level(bundle, *source_trace, o.level, rng, gamma, weights)
                : resample_from_level(bundle, source_image, o.level, rng, gamma, weights);
        images.push_back(t.image());
        char name[32];
        std::snprintf(name, sizeof(name), "resample_%04d.trace", i);
        save_checkpoint(trace_to_checkpoint(t), o.out_dir + "/" + name);
    }
    write_png_gray(o.out_dir + "/grid.png", tile_grid(images));
    std::cout << "resampled from level " << o.level << " -> " << o.out_dir << "\n";
}

void run_eval(const EvalOpts& o) {
    const ModelBundle bundle = bundle_from_checkpoint(load_checkpoint(o.ckpt));
    const Dataset data = load_dataset(o.data_dir);
    const std::string run_id = o.run_id.empty() ? "run-" + std::to_string(o.seed) : o.run_id;

    Rng rng(derive_seed(o.seed, "eval"));
    const MetricsRecord rec = eval_run(bundle, data, o.n, rng, o.threads, run_id);

    const std::string dir = o.runs_root + "/" + run_id;
    fs::create_directories(dir);
    write_text_atomic(dir + "/metrics.json", rec.to_json().dump(2) + "\n");

    const std::string summary = o.runs_root + "/summary.csv";
    const bool fresh = !fs::exists(summary);
    std::ofstream out(summary, std::ios::app);
    if (fresh) out << "run_id,levels,toy_fd,knn_top1,knn_top5,flops_ratio\n";
    out << run_id << "," << bundle.levels() << "," << format_double(rec.toy_fd) << ","
        << format_double(rec.knn_top1) << "," << format_double(rec.knn_top5) << ","
        << format_double(rec.flops.ratio) << "\n";
    std::cout << "toy_fd=" << rec.toy_fd << " knn_top1=" << rec.knn_top1
              << " flops_ratio=" << rec.flops.ratio << " -> " << dir << "\n";
}

double run_oracle_check(const OracleCheckOpts& o) {
    const ModelBundle bundle = bundle_from_checkpoint(load_checkpoint(o.ckpt));
    const Dataset data = load_dataset(o.data_dir);
    const NestedConfig& cfg = bundle.config;
    const int l = o.level;
    if (l < 1 || l > cfg.levels) throw std::runtime_error("oracle-check: bad level");

    OracleIndex idx;
    idx.L = cfg.levels;
    idx.schedule = bundle.schedule;
    idx.latents = all_level_latents(bundle.encoder, data, cfg);
    idx.sigma.assign(cfg.levels + 1, 0.0);
    for (int m = 2; m <= cfg.levels; ++m) idx.sigma[m] = bundle.sigma_for(m);

    Rng rng(derive_seed(o.seed, "oracle-check"));
    std::string csv = "point,t,item,rel_err\n";
    std::vector<double> errs;
    for (int i = 0; i < o.grid; ++i) {
        const int item = static_cast<int>(rng.uniform_below(data.size()));
        const int t = 1 + (i * cfg.T) / o.grid;
        const Eigen::VectorXd z = idx.latents[l].row(item).transpose();
        const Eigen::VectorXd z_t =
            forward_sample(bundle.schedule, z, t, rng.normal_vec(static_cast<int>(z.size())));

        // both sides see the same noisy conditioning stack
        std::vector<Eigen::VectorXd> cond_split;
        Eigen::VectorXd cond_cat(cond_dim(cfg, l));
        int off = 0;
        for (int m = l + 1; m <= cfg.levels; ++m) {
            Eigen::VectorXd zm = idx.latents[m].row(item).transpose();
            cond_split.push_back(inject_noise(zm, idx.sigma[m], rng));
            cond_cat.segment(off, zm.size()) = cond_split.back();
            off += static_cast<int>(zm.size());
        }
        const bool has_cond = !cond_split.empty();
        const Eigen::VectorXd eps_net =
            predict_noise(bundle.nets[l], z_t, t, has_cond ? &cond_cat : nullptr, bundle.schedule);
        const Eigen::VectorXd eps_orc =
            oracle_eps(idx, l, z_t, t, has_cond ? &cond_split : nullptr);

        const double rel = (eps_net - eps_orc).norm() / std::max(1e-12, eps_orc.norm());
        errs.push_back(rel);
        csv += std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(item) +
               "," + format_double(rel) + "\n";
    }
    write_text_atomic(o.out_path, csv);

    std::vector<double> sorted = errs;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::cout << "median rel err at level " << l << ": " << median << " (" << o.grid
              << " points) -> " << o.out_path << "\n";
    return median;
}

void run_elbo(const ElboOpts& o) {
    const ModelBundle bundle = bundle_from_checkpoint(load_checkpoint(o.ckpt));
    const Dataset data = load_dataset(o.data_dir);
    if (o.image_index < 0 || o.image_index >= data.size()) {
        throw std::runtime_error("elbo: image index out of range");
    }
    Rng rng(derive_seed(o.seed, "elbo"));
    const ElboReport rep =
        estimate_elbo(bundle, data.images[o.image_index], o.n_mc, rng);

    json j;
    j["image_index"] = o.image_index;
    j["n_mc"] = o.n_mc;
    json levels = json::array();
    for (int l = 1; l <= bundle.levels(); ++l) {
        json lj;
        lj["level"] = l;
        lj["diffusion_nats"] = rep.diffusion_nats[l];
        lj["prior_nats"] = rep.prior_nats[l];
        lj["total_nats"] = rep.level_total(l);
        levels.push_back(lj);
    }
    j["levels"] = levels;
    j["total_nats"] = rep.total;
    const std::string text = j.dump(2) + "\n";
    if (!o.out_path.empty()) write_text_atomic(o.out_path, text);
    std::cout << text;
}

}  // namespace ndm
