// Command-line front end. Talks to the core exclusively through the C API
// so the binary exercises the same surface as any other embedder.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iilab.h"

namespace {

struct ConfigHandle {
    iilab_config* cfg = nullptr;
    ~ConfigHandle() { iilab_config_free(cfg); }
};

int fail(iilab_status status) {
    std::fprintf(stderr, "error: %s\n", iilab_last_error());
    return status == IILAB_ERR_INVALID ? 1 : 2;
}

// Builds the effective config: file first (when given), CLI overrides on
// top.
iilab_status build_config(const std::string& config_path, const std::string& out_dir,
                          const std::string& seeds, const std::string& gammas,
                          const std::string& batches, ConfigHandle& handle) {
    if (config_path.empty()) {
        handle.cfg = iilab_config_default();
        if (!handle.cfg) return IILAB_ERR_RUNTIME;
    } else {
        if (iilab_status s = iilab_config_load(config_path.c_str(), &handle.cfg)) return s;
    }
    if (!out_dir.empty())
        if (iilab_status s = iilab_config_set(handle.cfg, "output.dir", out_dir.c_str())) return s;
    if (!seeds.empty())
        if (iilab_status s = iilab_config_set(handle.cfg, "experiment.seeds", seeds.c_str()))
            return s;
    if (!gammas.empty())
        if (iilab_status s = iilab_config_set(handle.cfg, "experiment.gammas", gammas.c_str()))
            return s;
    if (!batches.empty())
        if (iilab_status s = iilab_config_set(handle.cfg, "experiment.batches", batches.c_str()))
            return s;
    return IILAB_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal retrieval experiments on synthetic paired sequences"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds, gammas, batches;
    app.add_option("--config", config_path, "Config file (sectioned key = value text)");
    app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
    app.add_option("--seeds", seeds, "Comma-separated seeds (overrides experiment.seeds)");

    CLI::App* c_gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
    CLI::App* c_train = app.add_subcommand("train", "Train one model; write metrics + checkpoint");
    CLI::App* c_eval = app.add_subcommand("eval", "Evaluate a saved checkpoint on the test split");
    CLI::App* c_gamma = app.add_subcommand("sweep-gamma", "Sweep the intra-loss weight");
    CLI::App* c_batch = app.add_subcommand("sweep-batch", "Sweep batch size for both variants");
    CLI::App* c_noise = app.add_subcommand("noise-exp", "Run the batch-composition noise grid");
    CLI::App* c_grad = app.add_subcommand("grad-check", "Check analytic gradients numerically");
    c_gamma->add_option("--gammas", gammas, "Comma-separated gamma2 values");
    c_batch->add_option("--batches", batches, "Comma-separated batch sizes");

    // Let `iilab <cmd> --config ...` resolve the global options too.
    for (CLI::App* sub : {c_gen, c_train, c_eval, c_gamma, c_batch, c_noise, c_grad})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 uses its own exit codes; map everything but --help to 1.
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (c_grad->parsed()) {
        char* report = nullptr;
        const iilab_status s = iilab_cmd_grad_check(&report);
        if (report) {
            std::fputs(report, stdout);
            iilab_string_free(report);
        }
        if (s != IILAB_OK) return fail(s);
        return 0;
    }

    ConfigHandle handle;
    if (iilab_status s = build_config(config_path, out_dir, seeds, gammas, batches, handle))
        return fail(s);

    char path[4096] = {0};
    if (c_gen->parsed()) {
        int64_t n = 0;
        if (iilab_status s = iilab_cmd_gen_data(handle.cfg, &n, path, sizeof(path)))
            return fail(s);
        std::printf("wrote %lld records, manifest %s\n", static_cast<long long>(n), path);
        return 0;
    }
    if (c_train->parsed()) {
        if (iilab_status s = iilab_cmd_train(handle.cfg, path, sizeof(path))) return fail(s);
        std::printf("metrics %s\n", path);
        return 0;
    }
    if (c_eval->parsed()) {
        if (iilab_status s = iilab_cmd_eval(handle.cfg, path, sizeof(path))) return fail(s);
        std::printf("eval %s\n", path);
        return 0;
    }
    if (c_gamma->parsed()) {
        if (iilab_status s = iilab_cmd_sweep_gamma(handle.cfg, path, sizeof(path)))
            return fail(s);
        std::printf("sweep %s\n", path);
        return 0;
    }
    if (c_batch->parsed()) {
        if (iilab_status s = iilab_cmd_sweep_batch(handle.cfg, path, sizeof(path)))
            return fail(s);
        std::printf("sweep %s\n", path);
        return 0;
    }
    if (c_noise->parsed()) {
        if (iilab_status s = iilab_cmd_noise_exp(handle.cfg, path, sizeof(path))) return fail(s);
        std::printf("experiment %s\n", path);
        return 0;
    }
    std::fprintf(stderr, "error: no subcommand\n");
    return 1;
}
