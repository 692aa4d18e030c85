#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iilab/common.hpp"
#include "iilab/losses.hpp"
#include "iilab/rng.hpp"

using namespace iilab;

namespace {

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

Tensor random_tensor(Rng& rng, const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.normal();
    return t;
}

struct LossFixture {
    EncoderConfig vcfg, mcfg;
    EncoderParams vparams, mparams;

    explicit LossFixture(EncoderKind kind = EncoderKind::mlp, uint64_t seed = 5) {
        vcfg.kind = mcfg.kind = kind;
        vcfg.input_dim = 6;
        mcfg.input_dim = 5;
        vcfg.hidden_dim = mcfg.hidden_dim = 7;
        vcfg.output_dim = mcfg.output_dim = 4;
        vcfg.seed = seed;
        mcfg.seed = seed + 1;
        vparams = init_params(vcfg);
        mparams = init_params(mcfg);
    }

    LossBreakdown run(Tape& tape, const Tensor& vbatch, const Tensor& mbatch,
                      const LossWeights& w, double n_t = 0.07) const {
        const EncoderNodes vn = params_to_tape(tape, vparams, true);
        const EncoderNodes mn = params_to_tape(tape, mparams, true);
        const NodeId nt = tape.leaf(Tensor::scalar(n_t), true);
        const NodeId vb = tape.leaf(vbatch, false);
        const NodeId mb = tape.leaf(mbatch, false);
        return ii_loss(tape, vcfg, vn, mcfg, mn, vb, mb, nt, w);
    }
};

}  // namespace

TEST_CASE("temperature clamp keeps exp(n_t) in [1/e, 100]") {
    CHECK(clamp_temperature(0.07) == 0.07);
    CHECK(clamp_temperature(-5.0) == kTempMin);
    CHECK(clamp_temperature(9.0) == doctest::Approx(std::log(100.0)).epsilon(1e-15));
    CHECK(std::exp(clamp_temperature(9.0)) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(temp_max() == doctest::Approx(std::log(100.0)).epsilon(1e-15));
}

TEST_CASE("loss weights validation") {
    LossWeights w;
    w.gamma2 = -0.5;
    CHECK_THROWS_AS(w.validate(), InvalidInput);
    w = LossWeights{};
    w.alpha1 = -1e-9;
    CHECK_THROWS_AS(w.validate(), InvalidInput);
    CHECK_NOTHROW(LossWeights{}.validate());
}

TEST_CASE("inter_loss on a single pair is exactly zero") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Tape tape;
        const NodeId v = tape.leaf(random_tensor(rng, Shape{1, 4}), true);
        const NodeId m = tape.leaf(random_tensor(rng, Shape{1, 4}), true);
        const NodeId nt = tape.leaf(Tensor::scalar(0.07), true);
        const NodeId loss = inter_loss(tape, v, m, nt, LossWeights{});
        CHECK(tape.value(loss).item() == 0.0);
    }
}

TEST_CASE("inter_loss orthonormal two-pair value") {
    Tape tape;
    const NodeId v = tape.leaf(matrix({{1, 0}, {0, 1}}), true);
    const NodeId m = tape.leaf(matrix({{1, 0}, {0, 1}}), true);
    const NodeId nt = tape.leaf(Tensor::scalar(0.0), true);
    const NodeId loss = inter_loss(tape, v, m, nt, LossWeights{});
    // each row/column: -ln(e / (e + 1))
    CHECK(tape.value(loss).item() == doctest::Approx(0.313262).epsilon(1e-6));
}

TEST_CASE("inter_loss is modality-symmetric at equal alphas") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor ve = random_tensor(rng, Shape{5, 3});
        const Tensor me = random_tensor(rng, Shape{5, 3});
        Tape t1, t2;
        const NodeId a = inter_loss(t1, t1.leaf(ve, true), t1.leaf(me, true),
                                    t1.leaf(Tensor::scalar(0.4), true), LossWeights{});
        const NodeId b = inter_loss(t2, t2.leaf(me, true), t2.leaf(ve, true),
                                    t2.leaf(Tensor::scalar(0.4), true), LossWeights{});
        CHECK(t1.value(a).item() == doctest::Approx(t2.value(b).item()).epsilon(1e-12));
    }
}

TEST_CASE("inter_loss ignores positive row rescaling") {
    Rng rng(13);
    const Tensor ve = random_tensor(rng, Shape{4, 3});
    const Tensor me = random_tensor(rng, Shape{4, 3});
    Tensor scaled_v = ve;
    Tensor scaled_m = me;
    const double row_scales[4] = {0.25, 3.0, 10.0, 0.01};
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 3; ++j) {
            scaled_v.at(i, j) *= row_scales[i];
            scaled_m.at(i, j) *= row_scales[3 - i];
        }
    Tape t1, t2;
    const NodeId a = inter_loss(t1, t1.leaf(ve, true), t1.leaf(me, true),
                                t1.leaf(Tensor::scalar(0.07), true), LossWeights{});
    const NodeId b = inter_loss(t2, t2.leaf(scaled_v, true), t2.leaf(scaled_m, true),
                                t2.leaf(Tensor::scalar(0.07), true), LossWeights{});
    CHECK(t1.value(a).item() == doctest::Approx(t2.value(b).item()).epsilon(1e-12));
}

TEST_CASE("raising a diagonal similarity never raises the inter objective") {
    // Perturbs S directly through the same graph tail inter_loss builds
    // after the cosine matrix: logits = exp(n_t)*S, symmetric CE.
    const auto objective = [](const Tensor& s) {
        Tape tape;
        const NodeId sn = tape.leaf(s, true);
        const NodeId nt = tape.leaf(Tensor::scalar(0.07), true);
        const NodeId logits = tape.scale_by(sn, tape.exp(nt));
        const std::vector<size_t> diag = {0, 1, 2, 3};
        const NodeId rows = tape.cross_entropy_rows(logits, diag);
        const NodeId cols = tape.cross_entropy_rows(tape.transpose(logits), diag);
        const NodeId loss = tape.add(tape.scale(rows, 0.5), tape.scale(cols, 0.5));
        return tape.value(loss).item();
    };
    Rng rng(17);
    Tensor s(Shape{4, 4});
    for (double& v : s.data) v = rng.uniform(-1.0, 1.0);
    const double base = objective(s);
    for (size_t i = 0; i < 4; ++i) {
        for (double bump : {0.05, 0.3, 1.0}) {
            Tensor s2 = s;
            s2.at(i, i) += bump;
            CHECK(objective(s2) <= base + 1e-15);
        }
    }
}

TEST_CASE("intra_sim_pre worked examples") {
    const Tensor identity = intra_sim_pre(matrix({{1, 0}, {0, 1}}));
    CHECK(identity.at(0, 0) == doctest::Approx(1).epsilon(1e-12));
    CHECK(identity.at(0, 1) == doctest::Approx(0).epsilon(1e-12));

    const Tensor ones = intra_sim_pre(matrix({{2, 2}, {4, 4}}));
    for (size_t i = 0; i < 4; ++i) CHECK(ones.data[i] == doctest::Approx(1).epsilon(1e-12));

    const Tensor mixed = intra_sim_pre(matrix({{1, 0}, {1, 1}}));
    CHECK(mixed.at(0, 1) == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(mixed.at(1, 0) == doctest::Approx(0.70711).epsilon(1e-5));
}

TEST_CASE("intra_sim_post matches intra_sim_pre values on tape") {
    Rng rng(23);
    const Tensor emb = random_tensor(rng, Shape{4, 3});
    const Tensor pre = intra_sim_pre(emb);
    Tape tape;
    const NodeId post = intra_sim_post(tape, tape.leaf(emb, true));
    for (size_t i = 0; i < pre.count(); ++i)
        CHECK(tape.value(post).data[i] == doctest::Approx(pre.data[i]).epsilon(1e-15));
}

TEST_CASE("intra_loss_modality analytic cases") {
    SUBCASE("identical structure gives zero") {
        Rng rng(29);
        const Tensor emb = random_tensor(rng, Shape{5, 3});
        const Tensor pre = intra_sim_pre(emb);
        Tape tape;
        const NodeId post = intra_sim_post(tape, tape.leaf(emb, true));
        const NodeId loss = intra_loss_modality(tape, pre, post);
        CHECK(tape.value(loss).item() == doctest::Approx(0).epsilon(1e-9));
    }
    SUBCASE("collapsed encoder against identity structure") {
        Tape tape;
        const NodeId post = tape.leaf(matrix({{1, 1}, {1, 1}}), true);
        const NodeId loss = intra_loss_modality(tape, matrix({{1, 0}, {0, 1}}), post);
        CHECK(tape.value(loss).item() == doctest::Approx(0.292893).epsilon(1e-6));
    }
    SUBCASE("positive scaling gives zero") {
        const Tensor pre = matrix({{1.0, 0.3, -0.2}, {0.3, 1.0, 0.5}, {-0.2, 0.5, 1.0}});
        Tensor post = pre;
        for (double& v : post.data) v *= 7.5;
        Tape tape;
        const NodeId loss = intra_loss_modality(tape, pre, tape.leaf(post, true));
        CHECK(tape.value(loss).item() == doctest::Approx(0).epsilon(1e-9));
    }
    SUBCASE("value stays in [0, 2]") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            const Tensor a = random_tensor(rng, Shape{4, 4});
            const Tensor b = random_tensor(rng, Shape{4, 4});
            Tape tape;
            const NodeId loss = intra_loss_modality(tape, a, tape.leaf(b, true));
            CHECK(tape.value(loss).item() >= 0.0);
            CHECK(tape.value(loss).item() <= 2.0);
        }
    }
}

TEST_CASE("ii_loss breakdown recomposes per the declared weights") {
    Rng rng(37);
    LossFixture fx;
    for (int trial = 0; trial < 25; ++trial) {
        LossWeights w;
        w.alpha1 = rng.uniform01();
        w.alpha2 = rng.uniform01();
        w.beta1 = rng.uniform01();
        w.beta2 = rng.uniform01();
        w.gamma1 = 2.0 * rng.uniform01();
        w.gamma2 = 10.0 * rng.uniform01();
        const size_t n = 2 + rng.below(6);
        Tape tape;
        const LossBreakdown lb = fx.run(tape, random_tensor(rng, Shape{n, 3, 6}),
                                        random_tensor(rng, Shape{n, 3, 5}), w);
        const double recomposed =
            0.5 * (w.gamma1 * lb.inter_value +
                   w.gamma2 * (w.beta1 * lb.intra_v_value + w.beta2 * lb.intra_m_value));
        CHECK(std::abs(lb.total_value - recomposed) <= 1e-12);
        CHECK(lb.intra_v_value >= 0.0);
        CHECK(lb.intra_v_value <= 2.0);
        CHECK(lb.intra_m_value >= 0.0);
        CHECK(lb.intra_m_value <= 2.0);
        CHECK(tape.value(lb.total).item() == lb.total_value);
    }
}

TEST_CASE("gamma2 zero reduces the total to half the inter loss") {
    Rng rng(41);
    LossFixture fx;
    LossWeights w;
    w.gamma1 = 1.0;
    w.gamma2 = 0.0;
    Tape tape;
    const LossBreakdown lb =
        fx.run(tape, random_tensor(rng, Shape{4, 3, 6}), random_tensor(rng, Shape{4, 3, 5}), w);
    CHECK(lb.total_value == 0.5 * lb.inter_value);
}

TEST_CASE("identity encoders yield zero intra terms") {
    // meanpool with identity weights: embedding == temporal mean of the
    // sampled sequence, so pre and post similarity matrices coincide.
    LossFixture fx(EncoderKind::meanpool_linear);
    fx.vcfg.input_dim = fx.vcfg.output_dim = 4;
    fx.mcfg.input_dim = fx.mcfg.output_dim = 4;
    fx.vparams = init_params(fx.vcfg);
    fx.mparams = init_params(fx.mcfg);
    for (auto* params : {&fx.vparams, &fx.mparams}) {
        Tensor& w = params->at("w");
        for (size_t i = 0; i < 4; ++i)
            for (size_t j = 0; j < 4; ++j) w.at(i, j) = i == j ? 1.0 : 0.0;
        for (double& v : params->at("b").data) v = 0.0;
    }
    Rng rng(43);
    Tape tape;
    const LossBreakdown lb = fx.run(tape, random_tensor(rng, Shape{5, 3, 4}),
                                    random_tensor(rng, Shape{5, 3, 4}), LossWeights{});
    CHECK(lb.intra_v_value == doctest::Approx(0).epsilon(1e-9));
    CHECK(lb.intra_m_value == doctest::Approx(0).epsilon(1e-9));
}

TEST_CASE("full loss gradients pass the finite difference check") {
    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool}) {
        for (size_t n : {2, 4, 8}) {
            LossFixture fx(kind, 50 + n);
            Rng rng(mix_seed(59, n));
            const Tensor vbatch = random_tensor(rng, Shape{n, 3, 6});
            const Tensor mbatch = random_tensor(rng, Shape{n, 3, 5});

            std::vector<Tensor> params;
            std::vector<std::string> vnames, mnames;
            for (const auto& [name, tensor] : fx.vparams.named) {
                params.push_back(tensor);
                vnames.push_back(name);
            }
            for (const auto& [name, tensor] : fx.mparams.named) {
                params.push_back(tensor);
                mnames.push_back(name);
            }
            params.push_back(Tensor::scalar(0.07));

            const double err = finite_diff_check(
                [&](Tape& tape, const std::vector<NodeId>& ids) {
                    EncoderNodes vn, mn;
                    size_t i = 0;
                    for (const auto& name : vnames) vn.named.emplace_back(name, ids[i++]);
                    for (const auto& name : mnames) mn.named.emplace_back(name, ids[i++]);
                    const NodeId nt = ids[i++];
                    return ii_loss(tape, fx.vcfg, vn, fx.mcfg, mn, tape.leaf(vbatch, false),
                                   tape.leaf(mbatch, false), nt, LossWeights{})
                        .total;
                },
                params);
            CHECK(err < 1e-5);
        }
    }
}
