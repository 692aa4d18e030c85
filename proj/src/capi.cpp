#include "iilab.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "iilab/common.hpp"
#include "iilab/config.hpp"
#include "iilab/data.hpp"
#include "iilab/experiments.hpp"
#include "iilab/train.hpp"

struct iilab_config {
    iilab::RunConfig rc;
};
struct iilab_dataset {
    iilab::Dataset ds;
};
struct iilab_model {
    iilab::ModelState model;
};
struct iilab_metrics {
    std::vector<iilab::EpochMetrics> rows;
};

namespace {

thread_local std::string g_last_error = "no error";

void copy_path(const std::string& s, char* out, size_t cap) {
    if (!out || cap == 0) return;
    const size_t n = std::min(s.size(), cap - 1);
    std::memcpy(out, s.data(), n);
    out[n] = '\0';
}

template <typename Fn>
iilab_status guarded(Fn&& fn) {
    try {
        fn();
        return IILAB_OK;
    } catch (const iilab::InvalidInput& e) {
        g_last_error = e.what();
        return IILAB_ERR_INVALID;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IILAB_ERR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown failure";
        return IILAB_ERR_RUNTIME;
    }
}

iilab_status require(bool ok, const char* message) {
    if (ok) return IILAB_OK;
    g_last_error = message;
    return IILAB_ERR_INVALID;
}

}  // namespace

extern "C" {

const char* iilab_last_error(void) { return g_last_error.c_str(); }

iilab_config* iilab_config_default(void) {
    try {
        return new iilab_config{iilab::default_run_config()};
    } catch (...) {
        return nullptr;
    }
}

iilab_status iilab_config_load(const char* path, iilab_config** out) {
    if (iilab_status s = require(path && out, "config_load: path and out must be non-NULL"))
        return s;
    *out = nullptr;
    return guarded([&] { *out = new iilab_config{iilab::load_run_config(path)}; });
}

iilab_status iilab_config_set(iilab_config* cfg, const char* dotted_key, const char* value) {
    if (iilab_status s =
            require(cfg && dotted_key && value, "config_set: all arguments must be non-NULL"))
        return s;
    return guarded([&] { iilab::apply_override(cfg->rc, dotted_key, value); });
}

void iilab_config_free(iilab_config* cfg) { delete cfg; }

iilab_status iilab_dataset_generate(const iilab_config* cfg, iilab_dataset** out) {
    if (iilab_status s = require(cfg && out, "dataset_generate: cfg and out must be non-NULL"))
        return s;
    *out = nullptr;
    return guarded([&] { *out = new iilab_dataset{iilab::generate_synthetic(cfg->rc.synth)}; });
}

iilab_status iilab_dataset_load(const char* manifest_path, iilab_dataset** out) {
    if (iilab_status s =
            require(manifest_path && out, "dataset_load: path and out must be non-NULL"))
        return s;
    *out = nullptr;
    return guarded([&] { *out = new iilab_dataset{iilab::load_dataset(manifest_path)}; });
}

iilab_status iilab_dataset_save(const iilab_dataset* ds, const char* dir, char* manifest_path_out,
                                size_t cap) {
    if (iilab_status s = require(ds && dir, "dataset_save: ds and dir must be non-NULL")) return s;
    return guarded([&] {
        const auto manifest = iilab::save_dataset(dir, ds->ds);
        copy_path(manifest.string(), manifest_path_out, cap);
    });
}

size_t iilab_dataset_size(const iilab_dataset* ds) { return ds ? ds->ds.records.size() : 0; }

iilab_status iilab_dataset_split(const iilab_dataset* ds, size_t test_pairs_per_category,
                                 uint64_t seed, iilab_dataset** train_out,
                                 iilab_dataset** test_out) {
    if (iilab_status s = require(ds && train_out && test_out,
                                 "dataset_split: all arguments must be non-NULL"))
        return s;
    *train_out = nullptr;
    *test_out = nullptr;
    return guarded([&] {
        auto [tr, te] = iilab::split_train_test(ds->ds, test_pairs_per_category, seed);
        *train_out = new iilab_dataset{std::move(tr)};
        *test_out = new iilab_dataset{std::move(te)};
    });
}

void iilab_dataset_free(iilab_dataset* ds) { delete ds; }

iilab_status iilab_train(const iilab_config* cfg, const iilab_dataset* train_ds,
                         const iilab_dataset* test_ds, iilab_model** model_out,
                         iilab_metrics** metrics_out) {
    if (iilab_status s = require(cfg && train_ds && test_ds,
                                 "train: cfg, train_ds, and test_ds must be non-NULL"))
        return s;
    if (model_out) *model_out = nullptr;
    if (metrics_out) *metrics_out = nullptr;
    return guarded([&] {
        auto [model, metrics] = iilab::train(train_ds->ds, test_ds->ds, cfg->rc.video_encoder,
                                             cfg->rc.music_encoder, cfg->rc.train);
        if (model_out) *model_out = new iilab_model{std::move(model)};
        if (metrics_out) *metrics_out = new iilab_metrics{std::move(metrics)};
    });
}

size_t iilab_metrics_count(const iilab_metrics* m) { return m ? m->rows.size() : 0; }

iilab_status iilab_metrics_row(const iilab_metrics* m, size_t index, double row[6]) {
    if (iilab_status s = require(m && row, "metrics_row: m and row must be non-NULL")) return s;
    if (iilab_status s = require(index < m->rows.size(), "metrics_row: index out of range"))
        return s;
    const iilab::EpochMetrics& em = m->rows[index];
    row[0] = static_cast<double>(em.epoch);
    row[1] = em.inter_loss;
    row[2] = em.intra_loss;
    row[3] = em.r1;
    row[4] = em.r10;
    row[5] = em.r25;
    return IILAB_OK;
}

void iilab_metrics_free(iilab_metrics* m) { delete m; }

iilab_status iilab_model_save(const iilab_model* model, const char* dir) {
    if (iilab_status s = require(model && dir, "model_save: model and dir must be non-NULL"))
        return s;
    return guarded([&] { iilab::save_model(dir, model->model); });
}

iilab_status iilab_model_load(const char* dir, iilab_model** out) {
    if (iilab_status s = require(dir && out, "model_load: dir and out must be non-NULL")) return s;
    *out = nullptr;
    return guarded([&] { *out = new iilab_model{iilab::load_model(dir)}; });
}

void iilab_model_free(iilab_model* model) { delete model; }

iilab_status iilab_evaluate(const iilab_model* model, const iilab_dataset* ds,
                            const iilab_config* cfg, const char* mode, const size_t* ks,
                            size_t n_ks, double* recalls_out) {
    if (iilab_status s = require(model && ds && cfg && mode && ks && recalls_out,
                                 "evaluate: all arguments must be non-NULL"))
        return s;
    if (iilab_status s = require(n_ks > 0, "evaluate: n_ks must be positive")) return s;
    return guarded([&] {
        const iilab::TrainConfig& tc = cfg->rc.train;
        const std::vector<size_t> kvec(ks, ks + n_ks);
        const std::vector<double> r =
            iilab::model_recalls(model->model, ds->ds, tc.sampling, tc.gs_t, tc.fd_window,
                                 iilab::truth_mode_from_name(mode), kvec);
        for (size_t i = 0; i < n_ks; ++i) recalls_out[i] = r[i];
    });
}

iilab_status iilab_cmd_gen_data(const iilab_config* cfg, int64_t* n_records_out, char* path_out,
                                size_t cap) {
    if (iilab_status s = require(cfg != nullptr, "cmd_gen_data: cfg must be non-NULL")) return s;
    return guarded([&] {
        const iilab::GenDataOutputs out = iilab::cmd_gen_data(cfg->rc);
        if (n_records_out) *n_records_out = out.n_records;
        copy_path(out.manifest.string(), path_out, cap);
    });
}

iilab_status iilab_cmd_train(const iilab_config* cfg, char* path_out, size_t cap) {
    if (iilab_status s = require(cfg != nullptr, "cmd_train: cfg must be non-NULL")) return s;
    return guarded([&] {
        const iilab::TrainOutputs out = iilab::cmd_train(cfg->rc);
        copy_path(out.metrics_csv.string(), path_out, cap);
    });
}

iilab_status iilab_cmd_eval(const iilab_config* cfg, char* path_out, size_t cap) {
    if (iilab_status s = require(cfg != nullptr, "cmd_eval: cfg must be non-NULL")) return s;
    return guarded([&] { copy_path(iilab::cmd_eval(cfg->rc).string(), path_out, cap); });
}

iilab_status iilab_cmd_sweep_gamma(const iilab_config* cfg, char* path_out, size_t cap) {
    if (iilab_status s = require(cfg != nullptr, "cmd_sweep_gamma: cfg must be non-NULL"))
        return s;
    return guarded([&] { copy_path(iilab::cmd_sweep_gamma(cfg->rc).string(), path_out, cap); });
}

iilab_status iilab_cmd_sweep_batch(const iilab_config* cfg, char* path_out, size_t cap) {
    if (iilab_status s = require(cfg != nullptr, "cmd_sweep_batch: cfg must be non-NULL"))
        return s;
    return guarded([&] { copy_path(iilab::cmd_sweep_batch(cfg->rc).string(), path_out, cap); });
}

iilab_status iilab_cmd_noise_exp(const iilab_config* cfg, char* path_out, size_t cap) {
    if (iilab_status s = require(cfg != nullptr, "cmd_noise_exp: cfg must be non-NULL")) return s;
    return guarded([&] { copy_path(iilab::cmd_noise_exp(cfg->rc).string(), path_out, cap); });
}

iilab_status iilab_cmd_grad_check(char** report_out) {
    if (iilab_status s = require(report_out != nullptr, "cmd_grad_check: report_out must be non-NULL"))
        return s;
    *report_out = nullptr;
    std::string report;
    int code = 0;
    const iilab_status s = guarded([&] { code = iilab::cmd_grad_check(report); });
    if (s != IILAB_OK) return s;
    char* buf = static_cast<char*>(std::malloc(report.size() + 1));
    if (!buf) {
        g_last_error = "out of memory";
        return IILAB_ERR_RUNTIME;
    }
    std::memcpy(buf, report.c_str(), report.size() + 1);
    *report_out = buf;
    if (code != 0) {
        g_last_error = "gradient check found errors at or above the threshold";
        return IILAB_ERR_RUNTIME;
    }
    return IILAB_OK;
}

void iilab_string_free(char* s) { std::free(s); }

}  // extern "C"
