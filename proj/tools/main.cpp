#include <exception>
#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "ndm/cli_runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nested hierarchical diffusion at desk scale"};
    app.require_subcommand(1);

    ndm::GenDataOpts gen;
    auto* cmd_gen = app.add_subcommand("gen-data", "generate a procedural shape dataset");
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
    cmd_gen->add_option("--n", gen.n_images, "number of images");
    cmd_gen->add_option("--size", gen.image_size, "image side length");
    cmd_gen->add_option("--seed", gen.seed, "random seed");
    cmd_gen->add_option("--split", gen.split, "split tag stored in the manifest");
    cmd_gen->add_option("--shapes", gen.shapes, "comma-separated silhouette classes");
    cmd_gen->add_option("--textures", gen.textures, "comma-separated texture classes");

    ndm::FitEncoderOpts fit;
    auto* cmd_fit = app.add_subcommand("fit-encoder", "fit the frozen patch-PCA encoder");
    cmd_fit->add_option("--data", fit.data_dir, "dataset directory")->required();
    cmd_fit->add_option("--out", fit.out_path, "encoder checkpoint path");
    cmd_fit->add_option("--levels", fit.levels, "hierarchy depth L");
    cmd_fit->add_option("--d", fit.d, "base feature dimension");
    cmd_fit->add_option("--seed", fit.seed, "random seed");
    cmd_fit->add_flag("--scramble", fit.scramble, "replace bases with random orthonormal ones");

    ndm::TrainOpts train;
    auto* cmd_train = app.add_subcommand("train", "train a nested model");
    cmd_train->add_option("--data", train.data_dir, "dataset directory")->required();
    cmd_train->add_option("--config", train.config_path, "JSON config file");
    cmd_train->add_option("--levels", train.levels, "hierarchy depth L (overrides config)");
    cmd_train->add_option("--reuse", train.reuse_path, "donor checkpoint with L-1 levels");
    cmd_train->add_option("--seed", train.seed, "random seed (overrides config)");
    cmd_train->add_option("--steps", train.steps, "gradient steps per level (overrides config)");
    cmd_train->add_option("--sigma", train.sigma, "uniform conditioning noise (overrides config)");
    cmd_train->add_option("--out", train.out_path, "checkpoint output path");
    cmd_train->add_option("--run-dir", train.run_dir, "log directory (default <out>.run)");
    cmd_train->add_flag("--scramble-encoder", train.scramble_encoder,
                        "train against a scrambled-basis encoder");
    cmd_train->add_option("--threads", train.threads, "worker threads (1 = deterministic)");

    ndm::SampleOpts sample;
    auto* cmd_sample = app.add_subcommand("sample", "generate images top-down");
    cmd_sample->add_option("--ckpt", sample.ckpt, "model checkpoint")->required();
    cmd_sample->add_option("--n", sample.n, "number of samples");
    cmd_sample->add_option("--gamma", sample.gamma, "conditioning noise decay (number, inf, auto)");
    cmd_sample->add_option("--cfg", sample.cfg, "CFG weight(s): one value or per level");
    cmd_sample->add_option("--out", sample.out_dir, "output directory");
    cmd_sample->add_option("--seed", sample.seed, "random seed");
    cmd_sample->add_option("--threads", sample.threads, "worker threads");
    cmd_sample->add_flag("!--no-traces", sample.traces, "skip writing trace sidecars");

    ndm::ResampleOpts resample;
    auto* cmd_resample =
        app.add_subcommand("resample", "fix upper levels, re-sample the rest");
    cmd_resample->add_option("--ckpt", resample.ckpt, "model checkpoint")->required();
    cmd_resample->add_option("--source", resample.source, "dataset directory or .trace file")
        ->required();
    cmd_resample->add_option("--index", resample.index, "image index within the dataset");
    cmd_resample->add_option("--level", resample.level, "resample depth k (levels k..1 re-run)");
    cmd_resample->add_option("--n", resample.n, "number of resamples");
    cmd_resample->add_option("--gamma", resample.gamma, "conditioning noise decay");
    cmd_resample->add_option("--cfg", resample.cfg, "CFG weight(s)");
    cmd_resample->add_option("--out", resample.out_dir, "output directory");
    cmd_resample->add_option("--seed", resample.seed, "random seed");

    ndm::EvalOpts eval;
    auto* cmd_eval = app.add_subcommand("eval", "compute generation metrics");
    cmd_eval->add_option("--ckpt", eval.ckpt, "model checkpoint")->required();
    cmd_eval->add_option("--data", eval.data_dir, "reference dataset directory")->required();
    cmd_eval->add_option("--n", eval.n, "number of generated samples");
    cmd_eval->add_option("--runs-root", eval.runs_root, "root directory for run outputs");
    cmd_eval->add_option("--run-id", eval.run_id, "run identifier (default run-<seed>)");
    cmd_eval->add_option("--seed", eval.seed, "random seed");
    cmd_eval->add_option("--threads", eval.threads, "worker threads");

    ndm::OracleCheckOpts oracle;
    auto* cmd_oracle =
        app.add_subcommand("oracle-check", "compare a trained net to the closed-form denoiser");
    cmd_oracle->add_option("--ckpt", oracle.ckpt, "model checkpoint")->required();
    cmd_oracle->add_option("--data", oracle.data_dir, "dataset directory")->required();
    cmd_oracle->add_option("--level", oracle.level, "level to check");
    cmd_oracle->add_option("--grid", oracle.grid, "number of (z_t, t) grid points");
    cmd_oracle->add_option("--out", oracle.out_path, "CSV output path");
    cmd_oracle->add_option("--seed", oracle.seed, "random seed");

    ndm::ElboOpts elbo;
    auto* cmd_elbo = app.add_subcommand("elbo", "Monte-Carlo variational bound for one image");
    cmd_elbo->add_option("--ckpt", elbo.ckpt, "model checkpoint")->required();
    cmd_elbo->add_option("--data", elbo.data_dir, "dataset directory")->required();
    cmd_elbo->add_option("--image", elbo.image_index, "image index");
    cmd_elbo->add_option("--n-mc", elbo.n_mc, "Monte-Carlo samples per level");
    cmd_elbo->add_option("--seed", elbo.seed, "random seed");
    cmd_elbo->add_option("--out", elbo.out_path, "optional JSON output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 1;
    }

    try {
        if (cmd_gen->parsed()) ndm::run_gen_data(gen);
        if (cmd_fit->parsed()) ndm::run_fit_encoder(fit);
        if (cmd_train->parsed()) ndm::run_train(train);
        if (cmd_sample->parsed()) ndm::run_sample(sample);
        if (cmd_resample->parsed()) ndm::run_resample(resample);
        if (cmd_eval->parsed()) ndm::run_eval(eval);
        if (cmd_oracle->parsed()) ndm::run_oracle_check(oracle);
        if (cmd_elbo->parsed()) ndm::run_elbo(elbo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
