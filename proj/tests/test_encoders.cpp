#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iilab/encoders.hpp"
#include "iilab/kernels.hpp"
#include "iilab/rng.hpp"
#include "iilab/tape.hpp"

using namespace iilab;

namespace {

Tensor random_batch(uint64_t seed, size_t n, size_t t, size_t e) {
    Rng rng(seed);
    Tensor b(Shape{n, t, e});
    for (double& v : b.data) v = rng.normal();
    return b;
}

EncoderConfig make_cfg(EncoderKind kind, size_t e = 5, size_t h = 7, size_t d = 4,
                       uint64_t seed = 3) {
    EncoderConfig cfg;
    cfg.kind = kind;
    cfg.input_dim = e;
    cfg.hidden_dim = h;
    cfg.output_dim = d;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("encoder kind names round trip") {
    for (EncoderKind k : {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool})
        CHECK(encoder_kind_from_name(encoder_kind_name(k)) == k);
    CHECK_THROWS_AS(encoder_kind_from_name("bogus"), InvalidInput);
}

TEST_CASE("init_params shapes and determinism") {
    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool}) {
        const EncoderConfig cfg = make_cfg(kind);
        const EncoderParams a = init_params(cfg);
        const EncoderParams b = init_params(cfg);
        REQUIRE(a.named.size() == b.named.size());
        for (size_t i = 0; i < a.named.size(); ++i) {
            CHECK(a.named[i].first == b.named[i].first);
            REQUIRE(a.named[i].second.shape == b.named[i].second.shape);
            for (size_t j = 0; j < a.named[i].second.count(); ++j)
                CHECK(a.named[i].second.data[j] == b.named[i].second.data[j]);
        }

        EncoderConfig other = cfg;
        other.seed = cfg.seed + 1;
        const EncoderParams c = init_params(other);
        bool any_diff = false;
        for (size_t j = 0; j < a.named[0].second.count(); ++j)
            any_diff = any_diff || a.named[0].second.data[j] != c.named[0].second.data[j];
        CHECK(any_diff);
    }

    const EncoderParams mp = init_params(make_cfg(EncoderKind::meanpool_linear));
    CHECK(mp.at("w").shape == Shape{5, 4});
    CHECK(mp.at("b").shape == Shape{4});
    const EncoderParams ml = init_params(make_cfg(EncoderKind::mlp));
    CHECK(ml.at("w1").shape == Shape{5, 7});
    CHECK(ml.at("b1").shape == Shape{7});
    CHECK(ml.at("w2").shape == Shape{7, 4});
    CHECK(ml.at("b2").shape == Shape{4});
    const EncoderParams ap = init_params(make_cfg(EncoderKind::attnpool));
    CHECK(ap.at("q").shape == Shape{5});
    CHECK(ap.at("w").shape == Shape{5, 4});
    CHECK(ap.at("b").shape == Shape{4});
}

TEST_CASE("xavier bounds and zero biases") {
    const EncoderConfig cfg = make_cfg(EncoderKind::mlp, 6, 9, 4, 11);
    const EncoderParams p = init_params(cfg);
    const double bound1 = std::sqrt(6.0 / (6 + 9));
    for (double v : p.at("w1").data) {
        CHECK(v <= bound1);
        CHECK(v >= -bound1);
    }
    for (double v : p.at("b1").data) CHECK(v == 0.0);
    for (double v : p.at("b2").data) CHECK(v == 0.0);
}

TEST_CASE("encode output shape is batch by output_dim") {
    const Tensor batch = random_batch(1, 3, 6, 5);
    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool}) {
        const EncoderConfig cfg = make_cfg(kind);
        const Tensor out = encode_plain(cfg, init_params(cfg), batch);
        CHECK(out.shape == Shape{3, 4});
        CHECK(out.all_finite());
    }
}

TEST_CASE("encode and encode_plain agree bit for bit") {
    const Tensor batch = random_batch(2, 4, 5, 5);
    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool}) {
        const EncoderConfig cfg = make_cfg(kind);
        const EncoderParams params = init_params(cfg);
        const Tensor plain = encode_plain(cfg, params, batch);

        Tape tape;
        const EncoderNodes nodes = params_to_tape(tape, params, false);
        const NodeId out = encode(tape, cfg, nodes, tape.leaf(batch, false));
        const Tensor& taped = tape.value(out);
        REQUIRE(taped.shape == plain.shape);
        for (size_t i = 0; i < plain.count(); ++i) CHECK(taped.data[i] == plain.data[i]);
    }
}

TEST_CASE("attnpool with zero query equals meanpool with shared weights") {
    const Tensor batch = random_batch(3, 3, 7, 5);
    const EncoderConfig mp_cfg = make_cfg(EncoderKind::meanpool_linear);
    const EncoderParams mp = init_params(mp_cfg);

    const EncoderConfig ap_cfg = make_cfg(EncoderKind::attnpool);
    EncoderParams ap = init_params(ap_cfg);
    for (double& v : ap.at("q").data) v = 0.0;  // uniform attention
    ap.at("w") = mp.at("w");
    ap.at("b") = mp.at("b");

    const Tensor a = encode_plain(mp_cfg, mp, batch);
    const Tensor b = encode_plain(ap_cfg, ap, batch);
    REQUIRE(a.shape == b.shape);
    for (size_t i = 0; i < a.count(); ++i) CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-10));
}

TEST_CASE("encoding is equivariant to batch permutation") {
    const Tensor batch = random_batch(4, 4, 6, 5);
    const size_t perm[4] = {2, 0, 3, 1};
    Tensor permuted(batch.shape);
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 6; ++j)
            for (size_t c = 0; c < 5; ++c) permuted.at3(i, j, c) = batch.at3(perm[i], j, c);

    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool}) {
        const EncoderConfig cfg = make_cfg(kind);
        const EncoderParams params = init_params(cfg);
        const Tensor out = encode_plain(cfg, params, batch);
        const Tensor out_p = encode_plain(cfg, params, permuted);
        for (size_t i = 0; i < 4; ++i)
            for (size_t d = 0; d < 4; ++d) CHECK(out_p.at(i, d) == out.at(perm[i], d));
    }
}

TEST_CASE("mlp forward matches a straight-line reimplementation") {
    const size_t n = 3, t = 4, e = 5, h = 7, d = 4;
    const Tensor batch = random_batch(9, n, t, e);
    const EncoderConfig cfg = make_cfg(EncoderKind::mlp, e, h, d, 21);
    const EncoderParams p = init_params(cfg);
    const Tensor out = encode_plain(cfg, p, batch);

    for (size_t i = 0; i < n; ++i) {
        // mean over frames
        double mean[5] = {0};
        for (size_t j = 0; j < t; ++j)
            for (size_t c = 0; c < e; ++c) mean[c] += batch.at3(i, j, c);
        for (size_t c = 0; c < e; ++c) mean[c] /= static_cast<double>(t);
        // hidden = tanh(mean.w1 + b1)
        double hidden[7];
        for (size_t k = 0; k < h; ++k) {
            double s = p.at("b1").data[k];
            for (size_t c = 0; c < e; ++c) s += mean[c] * p.at("w1").at(c, k);
            hidden[k] = std::tanh(s);
        }
        // out = hidden.w2 + b2
        for (size_t o = 0; o < d; ++o) {
            double s = p.at("b2").data[o];
            for (size_t k = 0; k < h; ++k) s += hidden[k] * p.at("w2").at(k, o);
            CHECK(out.at(i, o) == doctest::Approx(s).epsilon(1e-12));
        }
    }
}

TEST_CASE("gradients flow through every encoder kind") {
    const Tensor batch = random_batch(17, 3, 4, 5);
    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool}) {
        const EncoderConfig cfg = make_cfg(kind);
        const EncoderParams params = init_params(cfg);
        std::vector<Tensor> param_values;
        std::vector<std::string> names;
        for (const auto& [name, tensor] : params.named) {
            param_values.push_back(tensor);
            names.push_back(name);
        }
        const double err = finite_diff_check(
            [&](Tape& tape, const std::vector<NodeId>& ids) {
                EncoderNodes nodes;
                for (size_t i = 0; i < ids.size(); ++i) nodes.named.emplace_back(names[i], ids[i]);
                const NodeId out = encode(tape, cfg, nodes, tape.leaf(batch, false));
                return tape.reduce_sum(tape.mul(out, out));
            },
            param_values);
        CHECK(err < 1e-5);
    }
}

TEST_CASE("encoder config validation") {
    EncoderConfig cfg = make_cfg(EncoderKind::mlp);
    cfg.input_dim = 0;
    CHECK_THROWS_AS(init_params(cfg), InvalidInput);
    cfg = make_cfg(EncoderKind::mlp);
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(init_params(cfg), InvalidInput);
    cfg = make_cfg(EncoderKind::meanpool_linear);
    cfg.output_dim = 0;
    CHECK_THROWS_AS(init_params(cfg), InvalidInput);
}
