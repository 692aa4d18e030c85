#include "iilab/gradcheck.hpp"

#include <cstdio>

#include "iilab/losses.hpp"
#include "iilab/rng.hpp"
#include "iilab/tape.hpp"

namespace iilab {

namespace {

Tensor random_tensor(Rng& rng, const Shape& shape, double scale = 1.0) {
    Tensor t(shape);
    for (double& v : t.data) v = scale * rng.normal();
    return t;
}

// Every checked graph must end in a scalar; sum-of-squares keeps the
// reduction sensitive to each element's sign and magnitude.
NodeId sum_sq(Tape& tape, NodeId x) { return tape.reduce_sum(tape.mul(x, x)); }

struct Probe {
    std::string name;
    std::vector<Tensor> params;
    GraphBuilder build;
};

std::vector<Probe> op_probes() {
    Rng rng(0x9e3779b97f4a7c15ull);
    std::vector<Probe> probes;

    const Shape m34{3, 4};
    const Shape m43{4, 3};
    const Shape m33{3, 3};
    const Shape v4{4};
    const Shape seq{2, 3, 4};

    probes.push_back({"matmul",
                      {random_tensor(rng, m34), random_tensor(rng, m43)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.matmul(p[0], p[1]));
                      }});
    probes.push_back({"matmul_nt",
                      {random_tensor(rng, m34), random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.matmul_nt(p[0], p[1]));
                      }});
    probes.push_back({"add",
                      {random_tensor(rng, m34), random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.add(p[0], p[1]));
                      }});
    probes.push_back({"sub",
                      {random_tensor(rng, m34), random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.sub(p[0], p[1]));
                      }});
    probes.push_back({"mul",
                      {random_tensor(rng, m34), random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.mul(p[0], p[1]));
                      }});
    probes.push_back({"scale",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.scale(p[0], -1.7));
                      }});
    probes.push_back({"scale_by",
                      {random_tensor(rng, m34), random_tensor(rng, Shape{1})},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.scale_by(p[0], p[1]));
                      }});
    probes.push_back({"add_rowvec",
                      {random_tensor(rng, m34), random_tensor(rng, v4)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.add_rowvec(p[0], p[1]));
                      }});
    probes.push_back({"exp",
                      {random_tensor(rng, m34, 0.5)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.exp(p[0]));
                      }});
    {
        // log needs strictly positive input, kept away from 0 so the
        // difference probe cannot cross it.
        Tensor pos(m34);
        for (double& v : pos.data) v = 0.5 + rng.uniform01();
        probes.push_back({"log",
                          {std::move(pos)},
                          [](Tape& t, const std::vector<NodeId>& p) {
                              return sum_sq(t, t.log(p[0]));
                          }});
    }
    probes.push_back({"tanh",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.tanh(p[0]));
                      }});
    probes.push_back({"transpose",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.transpose(p[0]));
                      }});
    probes.push_back({"row_l2_normalize",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          // Sum-of-squares of unit rows is constant, so
                          // weight elements unevenly instead.
                          Tensor w(Shape{3, 4});
                          for (size_t i = 0; i < w.count(); ++i)
                              w.data[i] = 0.2 * static_cast<double>(i + 1);
                          const NodeId wn = t.leaf(std::move(w), false);
                          return t.reduce_sum(t.mul(t.row_l2_normalize(p[0]), wn));
                      }});
    probes.push_back({"row_softmax",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          // Weight by a fixed matrix so the check sees more
                          // than the constant row sums.
                          Tensor w(Shape{3, 4});
                          for (size_t i = 0; i < w.count(); ++i)
                              w.data[i] = 0.1 * static_cast<double>(i + 1);
                          const NodeId wn = t.leaf(std::move(w), false);
                          return t.reduce_sum(t.mul(t.row_softmax(p[0]), wn));
                      }});
    probes.push_back({"cross_entropy_rows",
                      {random_tensor(rng, m33)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return t.cross_entropy_rows(p[0], {0, 1, 2});
                      }});
    probes.push_back({"seq_mean",
                      {random_tensor(rng, seq)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.seq_mean(p[0]));
                      }});
    probes.push_back({"seq_matvec",
                      {random_tensor(rng, seq), random_tensor(rng, v4)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.seq_matvec(p[0], p[1]));
                      }});
    probes.push_back({"seq_weighted_sum",
                      {random_tensor(rng, seq), random_tensor(rng, Shape{2, 3})},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.seq_weighted_sum(p[0], p[1]));
                      }});
    probes.push_back({"reduce_sum",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          const NodeId s = t.reduce_sum(p[0]);
                          return t.mul(s, s);
                      }});
    probes.push_back({"reduce_mean",
                      {random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          const NodeId s = t.reduce_mean(p[0]);
                          return t.mul(s, s);
                      }});
    probes.push_back({"cosine_sim_matrix",
                      {random_tensor(rng, m34), random_tensor(rng, m34)},
                      [](Tape& t, const std::vector<NodeId>& p) {
                          return sum_sq(t, t.cosine_sim_matrix(p[0], p[1]));
                      }});
    return probes;
}

Probe loss_probe(EncoderKind kind, size_t n) {
    const size_t e_v = 6, e_m = 5, t_len = 4, d = 5, h = 7;

    EncoderConfig vcfg, mcfg;
    vcfg.kind = mcfg.kind = kind;
    vcfg.input_dim = e_v;
    mcfg.input_dim = e_m;
    vcfg.hidden_dim = mcfg.hidden_dim = h;
    vcfg.output_dim = mcfg.output_dim = d;
    vcfg.seed = 31;
    mcfg.seed = 47;

    const EncoderParams vparams = init_params(vcfg);
    const EncoderParams mparams = init_params(mcfg);

    Rng rng(mix_seed(0xabcdef12345ull, mix_seed(static_cast<uint64_t>(kind), n)));
    Tensor vbatch = random_tensor(rng, Shape{n, t_len, e_v});
    Tensor mbatch = random_tensor(rng, Shape{n, t_len, e_m});
    Tensor n_t = Tensor::scalar(0.07);

    std::vector<Tensor> params;
    std::vector<std::string> vnames, mnames;
    for (const auto& [name, tensor] : vparams.named) {
        params.push_back(tensor);
        vnames.push_back(name);
    }
    for (const auto& [name, tensor] : mparams.named) {
        params.push_back(tensor);
        mnames.push_back(name);
    }
    params.push_back(n_t);

    Probe probe;
    probe.name = std::string("ii_loss/") + encoder_kind_name(kind) + "/n" + std::to_string(n);
    probe.params = std::move(params);
    probe.build = [vcfg, mcfg, vnames, mnames, vbatch, mbatch](Tape& tape,
                                                               const std::vector<NodeId>& p) {
        EncoderNodes vn, mn;
        size_t i = 0;
        for (const std::string& name : vnames) vn.named.emplace_back(name, p[i++]);
        for (const std::string& name : mnames) mn.named.emplace_back(name, p[i++]);
        const NodeId nt = p[i++];
        const NodeId vb = tape.leaf(vbatch, false);
        const NodeId mb = tape.leaf(mbatch, false);
        LossWeights w;
        return ii_loss(tape, vcfg, vn, mcfg, mn, vb, mb, nt, w).total;
    };
    return probe;
}

}  // namespace

std::vector<GradCheckRow> grad_check_battery() {
    std::vector<Probe> probes = op_probes();
    for (EncoderKind kind :
         {EncoderKind::meanpool_linear, EncoderKind::mlp, EncoderKind::attnpool})
        for (size_t n : {2, 4, 8}) probes.push_back(loss_probe(kind, n));

    std::vector<GradCheckRow> rows;
    rows.reserve(probes.size());
    for (const Probe& probe : probes)
        rows.push_back({probe.name, finite_diff_check(probe.build, probe.params)});
    return rows;
}

std::string grad_check_report(const std::vector<GradCheckRow>& rows) {
    std::string out;
    char buf[128];
    for (const GradCheckRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-28s %.3e %s\n", r.name.c_str(), r.max_rel_err,
                      r.max_rel_err < kGradCheckThreshold ? "ok" : "FAIL");
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "gradient check: %zu probes, %s\n", rows.size(),
                  grad_check_passed(rows) ? "all passed" : "FAILURES PRESENT");
    out += buf;
    return out;
}

bool grad_check_passed(const std::vector<GradCheckRow>& rows) {
    for (const GradCheckRow& r : rows)
        if (!(r.max_rel_err < kGradCheckThreshold)) return false;
    return !rows.empty();
}

}  // namespace iilab
