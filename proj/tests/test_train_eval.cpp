#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "iilab/common.hpp"
#include "iilab/rng.hpp"
#include "iilab/train.hpp"

using namespace iilab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const size_t r = rows.size(), c = rows.begin()->size();
    Tensor t(Shape{r, c});
    size_t i = 0;
    for (const auto& row : rows) {
        size_t j = 0;
        for (double v : row) t.at(i, j++) = v;
        ++i;
    }
    return t;
}

// cats categories x per pairs, tiny dims so a train() call stays cheap.
Dataset tiny_synth(size_t cats, size_t per, uint64_t seed = 7) {
    SynthConfig sc;
    sc.n_categories = cats;
    sc.pairs_per_category = per;
    sc.latent_dim = 2;
    sc.video_dim = 4;
    sc.music_dim = 3;
    sc.seq_len_min = 4;
    sc.seq_len_max = 8;
    sc.seed = seed;
    return generate_synthetic(sc);
}

std::map<int64_t, size_t> category_counts(const Dataset& ds, const std::vector<int64_t>& batch) {
    std::map<int64_t, int64_t> cat_of;
    for (const PairRecord& r : ds.records) cat_of[r.pair_id] = r.category;
    std::map<int64_t, size_t> counts;
    for (int64_t id : batch) {
        REQUIRE(cat_of.count(id) == 1);
        ++counts[cat_of.at(id)];
    }
    return counts;
}

void check_batch_ids_distinct(const std::vector<int64_t>& batch) {
    std::set<int64_t> seen(batch.begin(), batch.end());
    CHECK(seen.size() == batch.size());
}

EncoderConfig small_encoder(uint64_t seed) {
    EncoderConfig cfg;
    cfg.kind = EncoderKind::mlp;
    cfg.hidden_dim = 8;
    cfg.output_dim = 4;
    cfg.seed = seed;
    return cfg;
}

TrainConfig fast_train(size_t batch_n, size_t epochs, uint64_t seed = 1) {
    TrainConfig tc;
    tc.batch_n = batch_n;
    tc.epochs = epochs;
    tc.gs_t = 4;
    tc.seed = seed;
    return tc;
}

}  // namespace

TEST_CASE("sampler and sampling names round trip") {
    for (SamplerMode m : {SamplerMode::uniform, SamplerMode::no_noise, SamplerMode::with_noise,
                          SamplerMode::more_noise, SamplerMode::most_noise})
        CHECK(sampler_mode_from_name(sampler_mode_name(m)) == m);
    CHECK_THROWS_AS(sampler_mode_from_name("bogus"), InvalidInput);
    for (SamplingKind k : {SamplingKind::gs, SamplingKind::fd})
        CHECK(sampling_kind_from_name(sampling_kind_name(k)) == k);
    CHECK_THROWS_AS(sampling_kind_from_name("bogus"), InvalidInput);
}

TEST_CASE("train config validation") {
    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());
    SUBCASE("batch too small") {
        tc.batch_n = 1;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
    }
    SUBCASE("noise modes need batch divisible by 12") {
        tc.sampler = SamplerMode::most_noise;
        tc.batch_n = 16;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
        tc.batch_n = 24;
        CHECK_NOTHROW(tc.validate());
    }
    SUBCASE("bad optimizer settings") {
        tc.lr = 0.0;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
        tc = TrainConfig{};
        tc.adam_beta2 = 1.0;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
        tc = TrainConfig{};
        tc.adam_eps = 0.0;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
    }
    SUBCASE("bad sampling settings") {
        tc.gs_t = 0;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
        tc = TrainConfig{};
        tc.fd_window = 0;
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
        tc = TrainConfig{};
        tc.temp_init = std::nan("");
        CHECK_THROWS_AS(tc.validate(), InvalidInput);
    }
}

TEST_CASE("sample_sequence dispatches on kind") {
    const Tensor frames = matrix({{1, 2}, {3, 4}, {5, 6}, {7, 8}});
    const Tensor via_gs = sample_sequence(frames, SamplingKind::gs, 2, 99);
    const Tensor direct_gs = gs_sample(frames, 2);
    REQUIRE(via_gs.shape == direct_gs.shape);
    for (size_t i = 0; i < via_gs.count(); ++i) CHECK(via_gs.data[i] == direct_gs.data[i]);

    const Tensor via_fd = sample_sequence(frames, SamplingKind::fd, 99, 3);
    const Tensor direct_fd = fd_sample(frames, 3);
    REQUIRE(via_fd.shape == direct_fd.shape);
    for (size_t i = 0; i < via_fd.count(); ++i) CHECK(via_fd.data[i] == direct_fd.data[i]);
}

TEST_CASE("uniform batches partition a shuffle of the dataset") {
    const Dataset ds = tiny_synth(4, 6);  // 24 records
    TrainConfig tc = fast_train(8, 1);
    const auto batches = make_batches(ds, tc, 55);
    REQUIRE(batches.size() == 3);
    std::set<int64_t> seen;
    for (const auto& b : batches) {
        CHECK(b.size() == 8);
        seen.insert(b.begin(), b.end());
    }
    CHECK(seen.size() == 24);  // every record exactly once

    const auto again = make_batches(ds, tc, 55);
    CHECK(batches == again);
    const auto other = make_batches(ds, tc, 56);
    CHECK(batches != other);
}

TEST_CASE("uniform batching drops the remainder") {
    const Dataset ds = tiny_synth(4, 6);  // 24 records
    TrainConfig tc = fast_train(10, 1);
    const auto batches = make_batches(ds, tc, 3);
    REQUIRE(batches.size() == 2);
    for (const auto& b : batches) CHECK(b.size() == 10);
}

TEST_CASE("batch smaller than dataset is required") {
    const Dataset ds = tiny_synth(2, 2);
    TrainConfig tc = fast_train(24, 1);
    CHECK_THROWS_AS(make_batches(ds, tc, 1), InvalidInput);
}

TEST_CASE("noise mode category composition") {
    const Dataset ds = tiny_synth(8, 5);  // 40 records
    SUBCASE("most_noise: 6 categories of 4") {
        TrainConfig tc = fast_train(24, 1);
        tc.sampler = SamplerMode::most_noise;
        const auto batches = make_batches(ds, tc, 9);
        REQUIRE(batches.size() == 1);  // floor(40 / 24)
        check_batch_ids_distinct(batches[0]);
        const auto counts = category_counts(ds, batches[0]);
        CHECK(counts.size() == 6);
        for (const auto& [cat, n] : counts) CHECK(n == 4);
    }
    SUBCASE("with_noise: 4 singles plus 4 doubles") {
        TrainConfig tc = fast_train(12, 1);
        tc.sampler = SamplerMode::with_noise;
        const auto batches = make_batches(ds, tc, 9);
        REQUIRE(batches.size() == 3);
        for (const auto& batch : batches) {
            check_batch_ids_distinct(batch);
            const auto counts = category_counts(ds, batch);
            REQUIRE(counts.size() == 8);
            std::vector<size_t> sizes;
            for (const auto& [cat, n] : counts) sizes.push_back(n);
            std::sort(sizes.begin(), sizes.end());
            CHECK(sizes == std::vector<size_t>{1, 1, 1, 1, 2, 2, 2, 2});
        }
    }
    SUBCASE("more_noise: 6 doubles") {
        TrainConfig tc = fast_train(12, 1);
        tc.sampler = SamplerMode::more_noise;
        const auto batches = make_batches(ds, tc, 9);
        REQUIRE(batches.size() == 3);
        for (const auto& batch : batches) {
            check_batch_ids_distinct(batch);
            const auto counts = category_counts(ds, batch);
            REQUIRE(counts.size() == 6);
            for (const auto& [cat, n] : counts) CHECK(n == 2);
        }
    }
    SUBCASE("no_noise: every record from a distinct category") {
        const Dataset wide = tiny_synth(30, 2);  // 60 records
        TrainConfig tc = fast_train(24, 1);
        tc.sampler = SamplerMode::no_noise;
        const auto batches = make_batches(wide, tc, 9);
        REQUIRE(batches.size() == 2);
        for (const auto& batch : batches) {
            check_batch_ids_distinct(batch);
            const auto counts = category_counts(wide, batch);
            CHECK(counts.size() == 24);
        }
    }
    SUBCASE("determinism") {
        TrainConfig tc = fast_train(24, 1);
        tc.sampler = SamplerMode::most_noise;
        CHECK(make_batches(ds, tc, 42) == make_batches(ds, tc, 42));
    }
}

TEST_CASE("noise modes reject datasets with too few categories") {
    const Dataset ds = tiny_synth(5, 6);  // 30 records, most_noise wants 6 cats
    TrainConfig tc = fast_train(24, 1);
    tc.sampler = SamplerMode::most_noise;
    CHECK_THROWS_AS(make_batches(ds, tc, 1), InvalidInput);

    // Eligibility needs the per-category draw, not just the category count.
    const Dataset thin = tiny_synth(12, 3);  // 36 records, 3 < 4 pairs each
    CHECK_THROWS_AS(make_batches(thin, tc, 1), InvalidInput);
}

TEST_CASE("adam step oracles") {
    SUBCASE("zero gradient leaves parameters untouched") {
        Tensor theta = matrix({{0.5, -0.25}});
        AdamState st;
        adam_step({{"w", &theta}}, {Tensor(Shape{1, 2})}, st, 1e-3, 0.9, 0.999, 1e-8);
        CHECK(theta.at(0, 0) == 0.5);
        CHECK(theta.at(0, 1) == -0.25);
        CHECK(st.step == 1);
    }
    SUBCASE("bias-corrected first and second steps") {
        Tensor theta = matrix({{0.5}});
        Tensor g(Shape{1, 1});
        g.data[0] = 1.0;
        AdamState st;
        adam_step({{"w", &theta}}, {g}, st, 1e-3, 0.9, 0.999, 1e-8);
        // m_hat = v_hat = 1 after correction, so the move is lr/(1 + eps).
        CHECK(theta.data[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
        const double after_one = theta.data[0];
        adam_step({{"w", &theta}}, {g}, st, 1e-3, 0.9, 0.999, 1e-8);
        CHECK(theta.data[0] == doctest::Approx(after_one - 1e-3).epsilon(1e-6));
        CHECK(st.step == 2);
    }
    SUBCASE("non-finite gradient aborts") {
        Tensor theta = matrix({{0.5}});
        Tensor g(Shape{1, 1});
        g.data[0] = std::nan("");
        AdamState st;
        CHECK_THROWS_AS(adam_step({{"w", &theta}}, {g}, st, 1e-3, 0.9, 0.999, 1e-8),
                        RuntimeFailure);
    }
    SUBCASE("gradient shape mismatch aborts") {
        Tensor theta = matrix({{0.5}});
        AdamState st;
        CHECK_THROWS_AS(adam_step({{"w", &theta}}, {Tensor(Shape{2, 1})}, st, 1e-3, 0.9, 0.999,
                                  1e-8),
                        InvalidInput);
    }
    SUBCASE("gradient count mismatch aborts") {
        Tensor theta = matrix({{0.5}});
        AdamState st;
        CHECK_THROWS_AS(adam_step({{"w", &theta}}, {}, st, 1e-3, 0.9, 0.999, 1e-8), InvalidInput);
    }
}

TEST_CASE("rank_by_cosine breaks ties by candidate index") {
    const Tensor corpus = matrix({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}});  // exact duplicates
    const auto ranked = rank_by_cosine(matrix({{5, 5}, {1, 0}}), corpus);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == std::vector<size_t>{0, 1, 2});
    CHECK(ranked[1] == std::vector<size_t>{0, 1, 2});
}

TEST_CASE("recall on a crafted three-pair retrieval") {
    const Tensor corpus = matrix({{1, 0}, {0, 1}, {0.70710678, 0.70710678}});
    // Partners rank 1st, 2nd, and 3rd respectively; query 2 additionally
    // ties candidates 0 and 1 exactly, broken by index.
    const Tensor queries = matrix({{1, 0}, {0.6, 0.8}, {-1, -1}});
    const std::vector<int64_t> labels = {0, 1, 2};
    const RetrievalResult res = evaluate_retrieval(queries, corpus, labels, labels, {1, 2, 3});
    CHECK(res.ranked[0] == std::vector<size_t>{0, 2, 1});
    CHECK(res.ranked[1] == std::vector<size_t>{2, 1, 0});
    CHECK(res.ranked[2] == std::vector<size_t>{0, 1, 2});
    CHECK(res.recalls[0].second == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(res.recalls[1].second == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(res.recalls[2].second == 1.0);
}

TEST_CASE("pair versus category truth on a crafted four-pair retrieval") {
    const auto at_deg = [](double deg) {
        const double rad = deg * 3.14159265358979323846 / 180.0;
        return std::pair<double, double>{std::cos(rad), std::sin(rad)};
    };
    Tensor corpus(Shape{4, 2}), queries(Shape{4, 2});
    const double corpus_deg[4] = {0, 10, 90, 180};
    const double query_deg[4] = {8, 2, 80, 170};
    for (size_t i = 0; i < 4; ++i) {
        const auto [cx, cy] = at_deg(corpus_deg[i]);
        corpus.at(i, 0) = cx;
        corpus.at(i, 1) = cy;
        const auto [qx, qy] = at_deg(query_deg[i]);
        queries.at(i, 0) = qx;
        queries.at(i, 1) = qy;
    }
    const std::vector<int64_t> pair_labels = {0, 1, 2, 3};
    const std::vector<int64_t> cat_labels = {0, 0, 1, 1};

    const RetrievalResult pair_res =
        evaluate_retrieval(queries, corpus, pair_labels, pair_labels, {1, 2});
    CHECK(pair_res.recalls[0].second == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pair_res.recalls[1].second == 1.0);

    const RetrievalResult cat_res =
        evaluate_retrieval(queries, corpus, cat_labels, cat_labels, {1});
    CHECK(cat_res.recalls[0].second == 1.0);
}

TEST_CASE("recall is nondecreasing in k and hits 1 at the pool size") {
    Rng rng(71);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 2 + rng.below(6);
        Tensor queries(Shape{n, 3}), corpus(Shape{n, 3});
        for (double& v : queries.data) v = rng.normal();
        for (double& v : corpus.data) v = rng.normal();
        std::vector<int64_t> labels(n);
        for (size_t i = 0; i < n; ++i) labels[i] = static_cast<int64_t>(i);
        std::vector<size_t> ks(n);
        for (size_t k = 1; k <= n; ++k) ks[k - 1] = k;
        const RetrievalResult res = evaluate_retrieval(queries, corpus, labels, labels, ks);
        for (size_t i = 1; i < res.recalls.size(); ++i)
            CHECK(res.recalls[i].second >= res.recalls[i - 1].second);
        CHECK(res.recalls.back().second == 1.0);
    }
}

TEST_CASE("category recall ignores the label alphabet") {
    Rng rng(73);
    Tensor queries(Shape{6, 3}), corpus(Shape{6, 3});
    for (double& v : queries.data) v = rng.normal();
    for (double& v : corpus.data) v = rng.normal();
    const std::vector<int64_t> cats = {0, 0, 1, 1, 2, 2};
    const std::vector<int64_t> relabeled = {7, 7, -3, -3, 4096, 4096};
    const RetrievalResult a = evaluate_retrieval(queries, corpus, cats, cats, {1, 2, 3});
    const RetrievalResult b =
        evaluate_retrieval(queries, corpus, relabeled, relabeled, {1, 2, 3});
    for (size_t i = 0; i < a.recalls.size(); ++i)
        CHECK(a.recalls[i].second == b.recalls[i].second);
}

TEST_CASE("zero epochs returns the initial model and no metrics") {
    const Dataset ds = tiny_synth(4, 6);
    const auto [train_ds, test_ds] = split_train_test(ds, 1, 5);
    const auto [model, metrics] = train(train_ds, test_ds, small_encoder(101),
                                        small_encoder(202), fast_train(12, 0));
    CHECK(metrics.empty());
    CHECK(model.video_cfg.input_dim == 4);
    CHECK(model.music_cfg.input_dim == 3);
    // Init seeds derive from (encoder seed, run seed).
    CHECK(model.video_cfg.seed == mix_seed(101, 1));
    CHECK(model.music_cfg.seed == mix_seed(202, 1));
}

TEST_CASE("initial temperature is clamped into range") {
    const Dataset ds = tiny_synth(4, 6);
    const auto [train_ds, test_ds] = split_train_test(ds, 1, 5);
    TrainConfig tc = fast_train(12, 0);
    tc.temp_init = 9.0;
    auto [model, metrics] = train(train_ds, test_ds, small_encoder(101), small_encoder(202), tc);
    CHECK(model.n_t == doctest::Approx(std::log(100.0)).epsilon(1e-15));
    tc.temp_init = -30.0;
    auto [model2, metrics2] =
        train(train_ds, test_ds, small_encoder(101), small_encoder(202), tc);
    CHECK(model2.n_t == kTempMin);
}

TEST_CASE("training is bit-identical across runs") {
    const Dataset ds = tiny_synth(4, 6);
    const auto [train_ds, test_ds] = split_train_test(ds, 1, 5);
    const TrainConfig tc = fast_train(12, 2);
    const auto [m1, r1] = train(train_ds, test_ds, small_encoder(101), small_encoder(202), tc);
    const auto [m2, r2] = train(train_ds, test_ds, small_encoder(101), small_encoder(202), tc);
    REQUIRE(r1.size() == 2);
    REQUIRE(r2.size() == 2);
    for (size_t e = 0; e < r1.size(); ++e) {
        CHECK(r1[e].epoch == r2[e].epoch);
        CHECK(r1[e].inter_loss == r2[e].inter_loss);
        CHECK(r1[e].intra_loss == r2[e].intra_loss);
        CHECK(r1[e].r1 == r2[e].r1);
        CHECK(r1[e].r10 == r2[e].r10);
        CHECK(r1[e].r25 == r2[e].r25);
    }
    CHECK(m1.n_t == m2.n_t);
    for (size_t p = 0; p < m1.video_params.named.size(); ++p) {
        const Tensor& a = m1.video_params.named[p].second;
        const Tensor& b = m2.video_params.named[p].second;
        REQUIRE(a.shape == b.shape);
        for (size_t i = 0; i < a.count(); ++i) CHECK(a.data[i] == b.data[i]);
    }

    // A different run seed must change the trajectory.
    TrainConfig other = tc;
    other.seed = 2;
    const auto [m3, r3] = train(train_ds, test_ds, small_encoder(101), small_encoder(202), other);
    CHECK(r3[0].inter_loss != r1[0].inter_loss);
}

TEST_CASE("per-epoch recall columns clamp k to the pool") {
    // Pool of 4: r10 and r25 both become R@4 = 1 under pair truth.
    const Dataset ds = tiny_synth(4, 6);
    const auto [train_ds, test_ds] = split_train_test(ds, 1, 5);
    REQUIRE(test_ds.records.size() == 4);
    const auto [model, metrics] = train(train_ds, test_ds, small_encoder(101),
                                        small_encoder(202), fast_train(12, 1));
    REQUIRE(metrics.size() == 1);
    CHECK(metrics[0].r10 == 1.0);
    CHECK(metrics[0].r25 == 1.0);
    CHECK(metrics[0].r1 <= 1.0);
}

TEST_CASE("the contrastive term descends on an easy two-pair problem") {
    Dataset ds;
    ds.video_dim = 2;
    ds.music_dim = 2;
    for (int64_t i = 0; i < 2; ++i) {
        PairRecord r;
        r.pair_id = i;
        r.category = i;
        r.video = matrix({{i == 0 ? 1.0 : 0.0, i == 0 ? 0.0 : 1.0},
                          {i == 0 ? 1.0 : 0.0, i == 0 ? 0.0 : 1.0}});
        r.music = r.video;
        ds.records.push_back(std::move(r));
    }
    TrainConfig tc = fast_train(2, 10);
    tc.weights.gamma2 = 0.0;  // isolate the contrastive term
    tc.lr = 0.01;
    tc.gs_t = 2;
    EncoderConfig enc = small_encoder(101);
    enc.hidden_dim = 4;
    const auto [model, metrics] = train(ds, ds, enc, small_encoder(202), tc);
    REQUIRE(metrics.size() == 10);
    for (size_t e = 1; e < metrics.size(); ++e)
        CHECK(metrics[e].inter_loss <= metrics[e - 1].inter_loss + 1e-9);
    CHECK(metrics.back().inter_loss < 0.95 * metrics.front().inter_loss);
}

TEST_CASE("encode_corpus matches the training forward path") {
    const Dataset ds = tiny_synth(3, 4);
    EncoderConfig cfg = small_encoder(11);
    cfg.input_dim = ds.video_dim;
    const EncoderParams params = init_params(cfg);
    const Tensor all = encode_corpus(cfg, params, ds, Side::video, SamplingKind::gs, 4, 30);
    REQUIRE(all.shape == (Shape{ds.records.size(), cfg.output_dim}));

    // Re-encode one record alone through the tape path.
    const Tensor sampled = sample_sequence(ds.records[5].video, SamplingKind::gs, 4, 30);
    Tensor slab(Shape{1, 4, ds.video_dim});
    for (size_t j = 0; j < 4; ++j)
        for (size_t c = 0; c < ds.video_dim; ++c) slab.at3(0, j, c) = sampled.at(j, c);
    Tape tape;
    const EncoderNodes nodes = params_to_tape(tape, params, false);
    const NodeId out = encode(tape, cfg, nodes, tape.leaf(slab, false));
    for (size_t c = 0; c < cfg.output_dim; ++c)
        CHECK(all.at(5, c) == tape.value(out).at(0, c));
}

TEST_CASE("checkpoint round trip") {
    const Dataset ds = tiny_synth(4, 6);
    const auto [train_ds, test_ds] = split_train_test(ds, 1, 5);
    const auto [model, metrics] = train(train_ds, test_ds, small_encoder(101),
                                        small_encoder(202), fast_train(12, 1));

    const fs::path dir = fresh_dir("iilab_test_ckpt");
    save_model(dir / "ckpt", model);
    const ModelState loaded = load_model(dir / "ckpt");

    CHECK(loaded.video_cfg.kind == model.video_cfg.kind);
    CHECK(loaded.video_cfg.input_dim == model.video_cfg.input_dim);
    CHECK(loaded.video_cfg.hidden_dim == model.video_cfg.hidden_dim);
    CHECK(loaded.video_cfg.output_dim == model.video_cfg.output_dim);
    CHECK(loaded.video_cfg.seed == model.video_cfg.seed);
    CHECK(loaded.n_t == model.n_t);  // stored as text, full precision

    // Tensor files hold f32, so parameters come back f32-rounded.
    REQUIRE(loaded.video_params.named.size() == model.video_params.named.size());
    for (size_t p = 0; p < model.video_params.named.size(); ++p) {
        CHECK(loaded.video_params.named[p].first == model.video_params.named[p].first);
        const Tensor& orig = model.video_params.named[p].second;
        const Tensor& back = loaded.video_params.named[p].second;
        REQUIRE(orig.shape == back.shape);
        for (size_t i = 0; i < orig.count(); ++i)
            CHECK(back.data[i] == static_cast<double>(static_cast<float>(orig.data[i])));
    }

    // Saving the loaded model again must reproduce the files byte for byte.
    save_model(dir / "ckpt2", loaded);
    for (const auto& entry : fs::directory_iterator(dir / "ckpt")) {
        const fs::path twin = dir / "ckpt2" / entry.path().filename();
        REQUIRE(fs::exists(twin));
        std::ifstream a(entry.path(), std::ios::binary), b(twin, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)),
                             std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(b)),
                             std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }

    // And the loaded model retrieves identically to a fresh save/load cycle.
    const std::vector<double> r_orig =
        model_recalls(loaded, test_ds, SamplingKind::gs, 4, 30, TruthMode::pair, {1, 2});
    const ModelState again = load_model(dir / "ckpt2");
    const std::vector<double> r_again =
        model_recalls(again, test_ds, SamplingKind::gs, 4, 30, TruthMode::pair, {1, 2});
    CHECK(r_orig == r_again);

    SUBCASE("corrupted checkpoints are rejected") {
        fs::remove(dir / "ckpt" / "video_w1.tnsr");
        CHECK_THROWS_AS(load_model(dir / "ckpt"), RuntimeFailure);
        CHECK_THROWS_AS(load_model(dir / "nonexistent"), InvalidInput);
    }
}
