#include "iilab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "iilab/csv.hpp"
#include "iilab/gradcheck.hpp"

namespace iilab {

namespace {

std::vector<size_t> clamped_ks(std::vector<size_t> ks, size_t pool) {
    for (size_t& k : ks) k = std::min(std::max<size_t>(k, 1), pool);
    return ks;
}

// Runs fn(0..n-1), each at most once, on up to `jobs` workers. Results keep
// index order. The first failure wins; later arms may still finish but
// completed results after the first gap are not reported.
template <typename Row, typename Fn>
std::vector<std::optional<Row>> run_arms(size_t n, size_t jobs, const Fn& fn,
                                         std::exception_ptr& error) {
    std::vector<std::optional<Row>> results(n);
    error = nullptr;
    const size_t workers = std::max<size_t>(1, std::min(jobs, n));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) {
            try {
                results[i] = fn(i);
            } catch (...) {
                error = std::current_exception();
                break;
            }
        }
        return results;
    }
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (!failed.load()) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    results[i] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    error = first_error;
    return results;
}

struct SweepContext {
    Dataset ds_train;
    Dataset ds_test;
};

SweepContext make_context(const RunConfig& rc) {
    auto [tr, te] = materialize_split(rc);
    return {std::move(tr), std::move(te)};
}

// One sweep training: config overrides applied on top of [train], final
// model evaluated on the held-out split.
std::vector<double> sweep_point(const SweepContext& ctx, const RunConfig& rc, TrainConfig tc,
                                TruthMode mode, const std::vector<size_t>& ks) {
    auto [model, metrics] = train(ctx.ds_train, ctx.ds_test, rc.video_encoder, rc.music_encoder,
                                  tc);
    (void)metrics;
    return model_recalls(model, ctx.ds_test, tc.sampling, tc.gs_t, tc.fd_window, mode,
                         clamped_ks(ks, ctx.ds_test.records.size()));
}

}  // namespace

Dataset materialize_dataset(const RunConfig& rc) {
    if (rc.data.source == "synth") return generate_synthetic(rc.synth);
    if (rc.data.source == "manifest") {
        if (rc.data.manifest.empty())
            throw InvalidInput("data.source = manifest requires data.manifest");
        return load_dataset(rc.data.manifest);
    }
    throw InvalidInput("data.source must be synth or manifest, got '" + rc.data.source + "'");
}

std::pair<Dataset, Dataset> materialize_split(const RunConfig& rc) {
    const Dataset ds = materialize_dataset(rc);
    return split_train_test(ds, rc.data.test_pairs_per_category, rc.data.split_seed);
}

std::vector<GammaRow> run_sweep_gamma(const RunConfig& rc) {
    rc.validate();
    if (rc.experiment.gammas.empty()) throw InvalidInput("experiment.gammas must be nonempty");
    if (rc.experiment.seeds.empty()) throw InvalidInput("experiment.seeds must be nonempty");
    const SweepContext ctx = make_context(rc);

    struct Arm {
        double gamma2;
        uint64_t seed;
    };
    std::vector<Arm> arms;
    for (double g : rc.experiment.gammas)
        for (uint64_t s : rc.experiment.seeds) arms.push_back({g, s});

    std::exception_ptr error;
    auto rows = run_arms<GammaRow>(
        arms.size(), rc.experiment.jobs,
        [&](size_t i) {
            TrainConfig tc = rc.train;
            tc.weights.gamma2 = arms[i].gamma2;
            tc.seed = arms[i].seed;
            const std::vector<double> r =
                sweep_point(ctx, rc, tc, tc.eval_mode, {1, 10, 25});
            return GammaRow{arms[i].gamma2, arms[i].seed, r[0], r[1], r[2]};
        },
        error);
    if (error) std::rethrow_exception(error);
    std::vector<GammaRow> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(*r);
    return out;
}

std::vector<BatchRow> run_sweep_batch(const RunConfig& rc) {
    rc.validate();
    if (rc.experiment.batches.empty()) throw InvalidInput("experiment.batches must be nonempty");
    if (rc.experiment.seeds.empty()) throw InvalidInput("experiment.seeds must be nonempty");
    const SweepContext ctx = make_context(rc);

    struct Arm {
        size_t batch_n;
        const char* variant;
        uint64_t seed;
    };
    std::vector<Arm> arms;
    for (size_t b : rc.experiment.batches)
        for (const char* variant : {"inter_only", "ii"})
            for (uint64_t s : rc.experiment.seeds) arms.push_back({b, variant, s});

    std::exception_ptr error;
    auto rows = run_arms<BatchRow>(
        arms.size(), rc.experiment.jobs,
        [&](size_t i) {
            TrainConfig tc = rc.train;
            tc.batch_n = arms[i].batch_n;
            tc.seed = arms[i].seed;
            if (std::string(arms[i].variant) == "inter_only") tc.weights.gamma2 = 0.0;
            const std::vector<double> r =
                sweep_point(ctx, rc, tc, tc.eval_mode, {1, 10, 25});
            return BatchRow{arms[i].batch_n, arms[i].variant, arms[i].seed, r[0], r[1], r[2]};
        },
        error);
    if (error) std::rethrow_exception(error);
    std::vector<BatchRow> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(*r);
    return out;
}

std::vector<NoiseRow> run_noise_exp(const RunConfig& rc) {
    rc.validate();
    if (rc.experiment.seeds.empty()) throw InvalidInput("experiment.seeds must be nonempty");
    if (rc.train.batch_n % 12 != 0)
        throw InvalidInput("noise experiment needs train.batch_n divisible by 12");
    const SweepContext ctx = make_context(rc);

    struct Arm {
        SamplerMode mode;
        const char* variant;
        uint64_t seed;
    };
    std::vector<Arm> arms;
    for (SamplerMode mode : {SamplerMode::no_noise, SamplerMode::with_noise,
                             SamplerMode::more_noise, SamplerMode::most_noise})
        for (const char* variant : {"inter_only", "ii"})
            for (uint64_t s : rc.experiment.seeds) arms.push_back({mode, variant, s});

    std::exception_ptr error;
    auto rows = run_arms<NoiseRow>(
        arms.size(), rc.experiment.jobs,
        [&](size_t i) {
            TrainConfig tc = rc.train;
            tc.sampler = arms[i].mode;
            tc.seed = arms[i].seed;
            tc.eval_mode = TruthMode::category;
            if (std::string(arms[i].variant) == "inter_only") tc.weights.gamma2 = 0.0;
            const std::vector<double> r =
                sweep_point(ctx, rc, tc, TruthMode::category, {1, 5, 10});
            return NoiseRow{sampler_mode_name(arms[i].mode), arms[i].variant, arms[i].seed,
                            r[0], r[1], r[2]};
        },
        error);
    if (error) std::rethrow_exception(error);
    std::vector<NoiseRow> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(*r);
    return out;
}

GenDataOutputs cmd_gen_data(const RunConfig& rc) {
    rc.validate();
    const Dataset ds = generate_synthetic(rc.synth);
    GenDataOutputs out;
    out.manifest = save_dataset(std::filesystem::path(rc.output.dir) / "data", ds);
    out.n_records = static_cast<int64_t>(ds.records.size());
    return out;
}

TrainOutputs cmd_train(const RunConfig& rc) {
    rc.validate();
    const auto [ds_train, ds_test] = materialize_split(rc);
    auto [model, metrics] =
        train(ds_train, ds_test, rc.video_encoder, rc.music_encoder, rc.train);

    TrainOutputs out;
    out.metrics = metrics;
    out.checkpoint_dir = std::filesystem::path(rc.output.dir) / "checkpoint";
    out.metrics_csv = std::filesystem::path(rc.output.dir) / "metrics.csv";
    save_model(out.checkpoint_dir, model);

    CsvWriter csv(out.metrics_csv, {"epoch", "inter_loss", "intra_loss", "r1", "r10", "r25"});
    for (const EpochMetrics& m : metrics)
        csv.row({fmt_int(static_cast<long long>(m.epoch)), fmt_fixed(m.inter_loss),
                 fmt_fixed(m.intra_loss), fmt_fixed(m.r1), fmt_fixed(m.r10), fmt_fixed(m.r25)});
    csv.finish();
    return out;
}

std::filesystem::path cmd_eval(const RunConfig& rc) {
    rc.validate();
    if (rc.eval.checkpoint.empty()) throw InvalidInput("eval.checkpoint is required");
    const ModelState model = load_model(rc.eval.checkpoint);
    const auto [ds_train, ds_test] = materialize_split(rc);
    (void)ds_train;
    const std::vector<size_t> ks = clamped_ks(rc.eval.ks, ds_test.records.size());
    const std::vector<double> r = model_recalls(model, ds_test, rc.train.sampling, rc.train.gs_t,
                                                rc.train.fd_window, rc.eval.mode, ks);

    const auto path = std::filesystem::path(rc.output.dir) / "eval.csv";
    CsvWriter csv(path, {"k", "recall"});
    for (size_t i = 0; i < ks.size(); ++i)
        csv.row({fmt_int(static_cast<long long>(ks[i])), fmt_fixed(r[i])});
    csv.finish();
    return path;
}

std::filesystem::path cmd_sweep_gamma(const RunConfig& rc) {
    const auto path = std::filesystem::path(rc.output.dir) / "sweep_gamma.csv";
    CsvWriter csv(path, {"gamma2", "seed", "r1", "r10", "r25"});
    // Compute first, then emit in arm order so the final file is all-or-
    // nothing while failures still leave the completed prefix in .partial.
    std::vector<GammaRow> rows = run_sweep_gamma(rc);
    for (const GammaRow& r : rows)
        csv.row({fmt_fixed(r.gamma2), fmt_int(static_cast<long long>(r.seed)), fmt_fixed(r.r1),
                 fmt_fixed(r.r10), fmt_fixed(r.r25)});
    csv.finish();
    return path;
}

std::filesystem::path cmd_sweep_batch(const RunConfig& rc) {
    const auto path = std::filesystem::path(rc.output.dir) / "sweep_batch.csv";
    CsvWriter csv(path, {"batch_n", "variant", "seed", "r1", "r10", "r25"});
    std::vector<BatchRow> rows = run_sweep_batch(rc);
    for (const BatchRow& r : rows)
        csv.row({fmt_int(static_cast<long long>(r.batch_n)), r.variant,
                 fmt_int(static_cast<long long>(r.seed)), fmt_fixed(r.r1), fmt_fixed(r.r10),
                 fmt_fixed(r.r25)});
    csv.finish();
    return path;
}

std::filesystem::path cmd_noise_exp(const RunConfig& rc) {
    const auto path = std::filesystem::path(rc.output.dir) / "noise_exp.csv";
    CsvWriter csv(path, {"mode", "variant", "seed", "r1", "r5", "r10"});
    std::vector<NoiseRow> rows = run_noise_exp(rc);
    for (const NoiseRow& r : rows)
        csv.row({r.mode, r.variant, fmt_int(static_cast<long long>(r.seed)), fmt_fixed(r.r1),
                 fmt_fixed(r.r5), fmt_fixed(r.r10)});
    csv.finish();
    return path;
}

int cmd_grad_check(std::string& report) {
    const std::vector<GradCheckRow> rows = grad_check_battery();
    report = grad_check_report(rows);
    return grad_check_passed(rows) ? 0 : 2;
}

}  // namespace iilab
