#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ndm {

struct GenDataOpts {
    std::string out_dir;
    int n_images = 4096;
    int image_size = 32;
    uint64_t seed = 0;
    std::string split = "train";
    std::string shapes;    // comma-separated override
    std::string textures;  // comma-separated override
};
void run_gen_data(const GenDataOpts& o);

struct FitEncoderOpts {
    std::string data_dir;
    std::string out_path = "encoder.ndm";
    int levels = 3;
    int d = 32;
    uint64_t seed = 0;
    bool scramble = false;
};
void run_fit_encoder(const FitEncoderOpts& o);

struct TrainOpts {
    std::string data_dir;
    std::string config_path;  // optional JSON config
    std::string reuse_path;   // optional donor checkpoint (L-1 levels)
    std::string out_path = "model.ndm";
    std::string run_dir;  // defaults to <out_path>.run
    std::optional<int> levels;
    std::optional<uint64_t> seed;
    std::optional<int> steps;
    std::optional<double> sigma;  // uniform sigma override
    bool scramble_encoder = false;
    int threads = 1;
};
void run_train(const TrainOpts& o);

struct SampleOpts {
    std::string ckpt;
    int n = 16;
    std::string gamma;  // "", number, "inf" or "auto"
    std::string cfg;    // "", single weight or comma-separated per level
    std::string out_dir = "samples";
    uint64_t seed = 0;
    int threads = 1;
    bool traces = true;
};
void run_sample(const SampleOpts& o);

struct ResampleOpts {
    std::string ckpt;
    std::string source;  // dataset directory or .trace file
    int index = 0;       // image index when source is a dataset
    int level = 1;       // resample depth k
    int n = 8;
    std::string gamma;
    std::string cfg;
    std::string out_dir = "resample";
    uint64_t seed = 0;
};
void run_resample(const ResampleOpts& o);

struct EvalOpts {
    std::string ckpt;
    std::string data_dir;
    int n = 256;
    std::string runs_root = "runs";
    std::string run_id;  // defaults to run-<seed>
    uint64_t seed = 0;
    int threads = 1;
};
void run_eval(const EvalOpts& o);

struct OracleCheckOpts {
    std::string ckpt;
    std::string data_dir;
    int level = 1;
    int grid = 200;
    std::string out_path = "oracle_check.csv";
    uint64_t seed = 0;
};
double run_oracle_check(const OracleCheckOpts& o);  // returns the median relative error

struct ElboOpts {
    std::string ckpt;
    std::string data_dir;
    int image_index = 0;
    int n_mc = 64;
    uint64_t seed = 0;
    std::string out_path;  // optional JSON report
};
void run_elbo(const ElboOpts& o);

}  // namespace ndm
